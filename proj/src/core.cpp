#include "crowdstream/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "crowdstream/agreement.hpp"
#include "crowdstream/fixed_point.hpp"

namespace crowdstream {

namespace {

std::vector<std::int8_t> checked_entries(std::span<const int> entries) {
    if (entries.size() <= 2) {
        throw std::invalid_argument("observation vector needs more than 2 labellers");
    }
    std::vector<std::int8_t> out;
    out.reserve(entries.size());
    for (int v : entries) {
        if (v < -1 || v > 1) {
            throw std::invalid_argument("label " + std::to_string(v) + " not in {-1, 0, 1}");
        }
        out.push_back(static_cast<std::int8_t>(v));
    }
    return out;
}

}  // namespace

ObservationVector::ObservationVector(std::span<const int> entries)
    : entries_(checked_entries(entries)) {}

ObservationVector::ObservationVector(std::initializer_list<int> entries)
    : entries_(checked_entries(std::span<const int>(entries.begin(), entries.size()))) {}

ObservationVector::ObservationVector(std::vector<std::int8_t> entries) {
    std::vector<int> widened(entries.begin(), entries.end());
    entries_ = checked_entries(widened);
}

ObservationVector ObservationVector::operator-() const {
    ObservationVector out = *this;
    for (auto& v : out.entries_) v = static_cast<std::int8_t>(-v);
    return out;
}

ObservationSummary summarize(const ObservationVector& x) noexcept {
    ObservationSummary s;
    for (int v : x) {
        s.sum += v;
        s.answers += v != 0;
    }
    return s;
}

void require_probability_vector(std::span<const double> p) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] >= 0.0 && p[i] <= 1.0)) {
            throw std::invalid_argument("entry " + std::to_string(i) +
                                        " is not a probability: " + std::to_string(p[i]));
        }
    }
}

CrowdModel::CrowdModel(std::vector<double> error_probs, double answer_prob)
    : p(std::move(error_probs)), alpha(answer_prob) {
    if (p.size() <= 2) throw std::invalid_argument("crowd model needs n > 2 labellers");
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("answer probability must lie in (0, 1]");
    }
    require_probability_vector(p);
}

double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<double> weights_from_error_probs(std::span<const double> p, double clamp) {
    if (!(clamp > 0.0 && clamp < 0.5)) {
        throw std::invalid_argument("weight clamp must lie in (0, 1/2)");
    }
    require_probability_vector(p);
    std::vector<double> w(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = std::clamp(p[i], clamp, 1.0 - clamp);
        w[i] = std::log(1.0 / pi - 1.0);
    }
    return w;
}

std::vector<double> decoding_weights(std::span<const double> p, double clamp) {
    auto w = weights_from_error_probs(p, clamp);
    if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })) {
        std::fill(w.begin(), w.end(), 1.0);
    }
    return w;
}

double dot(const ObservationVector& x, std::span<const double> w) {
    if (x.size() != w.size()) {
        throw std::invalid_argument("observation has " + std::to_string(x.size()) +
                                    " labels but there are " + std::to_string(w.size()) +
                                    " weights");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (x[i] != 0) s += x[i] * w[i];
    }
    return s;
}

Label weighted_majority(const ObservationVector& x, std::span<const double> w, Rng& tie_rng) {
    const double s = dot(x, w);
    if (s == 0.0) return fair_sign(tie_rng) > 0 ? Label::Positive : Label::Negative;
    return label_of_sign(s);
}

double min_nonzero_margin(std::span<const double> w) {
    const std::size_t n = w.size();
    // Odometer over {-1, 0, 1}^n; each margin is a fresh left-to-right sum.
    std::vector<int> x(n, -1);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (x[i] != 0) s += x[i] * w[i];
        }
        if (s != 0.0) best = std::min(best, std::abs(s));
        std::size_t k = 0;
        while (k < n && x[k] == 1) x[k++] = -1;
        if (k == n) break;
        ++x[k];
    }
    return best;
}

ErrorProfile model_diagnostics(const CrowdModel& model, std::size_t lambda_max_n) {
    ErrorProfile out;
    out.p = model.p;
    out.q = mean(model.p);
    out.w = weights_from_error_probs(model.p);
    out.eta = std::numeric_limits<double>::infinity();
    for (double pi : model.p) out.eta = std::min(out.eta, pi * (1.0 - pi));
    const auto a = agreement_rates_exact(model.p);
    const double v = (1.0 - 2.0 * out.q) * (1.0 - 2.0 * out.q);
    out.gamma = std::max(v - v0(a), 0.0);
    if (model.n() <= lambda_max_n) out.lambda = min_nonzero_margin(out.w);
    return out;
}

bool check_assumption(std::span<const double> p) {
    const double n = static_cast<double>(p.size());
    return mean(p) < 0.5 - 1.0 / n;
}

}  // namespace crowdstream
