#include "crowdstream/agreement.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>

#include "crowdstream/fixed_point.hpp"

namespace crowdstream {

std::vector<double> agreement_rates_exact(std::span<const double> p) {
    const std::size_t n = p.size();
    if (n <= 2) throw std::invalid_argument("need more than 2 labellers");
    require_probability_vector(p);
    std::vector<double> a(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) s += p[i] * p[j] + (1.0 - p[i]) * (1.0 - p[j]);
        }
        a[i] = s / static_cast<double>(n - 1);
    }
    return a;
}

std::vector<double> agreement_rates_exact(const CrowdModel& model) {
    return agreement_rates_exact(model.p);
}

AgreementState::AgreementState(std::size_t n, double alpha, AveragingMode mode, double beta)
    : a_hat_(n, 0.0), mode_(mode), beta_(beta), alpha_(alpha) {
    if (n <= 2) throw std::invalid_argument("need more than 2 labellers");
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("answer probability must lie in (0, 1]");
    }
    if (mode == AveragingMode::Ewma && !(beta > 0.0 && beta < 1.0)) {
        throw std::invalid_argument("EWMA beta must lie in (0, 1)");
    }
}

AgreementState AgreementState::uniform(std::size_t n, double alpha) {
    return AgreementState(n, alpha, AveragingMode::Uniform, 0.0);
}

AgreementState AgreementState::ewma(std::size_t n, double alpha, double beta) {
    return AgreementState(n, alpha, AveragingMode::Ewma, beta);
}

void AgreementState::observe(const ObservationVector& x) {
    if (x.size() != n()) {
        throw std::invalid_argument("observation has " + std::to_string(x.size()) +
                                    " labels, state tracks " + std::to_string(n()));
    }
    const ObservationSummary s = summarize(x);
    const double norm = static_cast<double>(n() - 1) * alpha_ * alpha_;
    ++t_;
    if (mode_ == AveragingMode::Uniform) {
        const double td = static_cast<double>(t_);
        const double keep = (td - 1.0) / td;
        for (std::size_t i = 0; i < n(); ++i) {
            a_hat_[i] = keep * a_hat_[i] + agreement_count(x[i], s) / (td * norm);
        }
    } else {
        for (std::size_t i = 0; i < n(); ++i) {
            a_hat_[i] = (1.0 - beta_) * a_hat_[i] + beta_ * agreement_count(x[i], s) / norm;
        }
    }
}

std::vector<double> AgreementState::to_record() const {
    std::vector<double> r;
    r.reserve(4 + n());
    r.push_back(static_cast<double>(t_));
    r.push_back(mode_ == AveragingMode::Uniform ? 0.0 : 1.0);
    r.push_back(beta_);
    r.push_back(alpha_);
    r.insert(r.end(), a_hat_.begin(), a_hat_.end());
    return r;
}

AgreementState AgreementState::from_record(std::span<const double> record) {
    if (record.size() < 4 + 3) throw std::invalid_argument("agreement record too short");
    const double t = record[0];
    if (!(t >= 0.0) || t != std::floor(t)) throw std::invalid_argument("bad task counter");
    const double mode = record[1];
    if (mode != 0.0 && mode != 1.0) throw std::invalid_argument("bad averaging mode");
    const std::size_t n = record.size() - 4;
    AgreementState s = mode == 0.0 ? uniform(n, record[3]) : ewma(n, record[3], record[2]);
    s.beta_ = record[2];
    s.t_ = static_cast<long long>(t);
    std::copy(record.begin() + 4, record.end(), s.a_hat_.begin());
    return s;
}

std::string AgreementState::serialize() const {
    std::string out;
    char buf[32];
    for (double v : to_record()) {
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        if (!out.empty()) out.push_back(' ');
        out.append(buf, res.ptr);
    }
    return out;
}

AgreementState AgreementState::deserialize(std::string_view text) {
    std::vector<double> record;
    const char* p = text.data();
    const char* end = p + text.size();
    while (p < end) {
        while (p < end && (*p == ' ' || *p == '\t' || *p == '\n')) ++p;
        if (p == end) break;
        double v = 0.0;
        const auto res = std::from_chars(p, end, v);
        if (res.ec != std::errc()) throw std::invalid_argument("malformed agreement record");
        record.push_back(v);
        p = res.ptr;
    }
    return from_record(record);
}

AgreementState stream_update(AgreementState state, const ObservationVector& x) {
    if (state.mode() != AveragingMode::Uniform) {
        throw std::invalid_argument("stream_update requires a uniform-mode state");
    }
    state.observe(x);
    return state;
}

AgreementState stream_update_ewma(AgreementState state, const ObservationVector& x) {
    if (state.mode() != AveragingMode::Ewma) {
        throw std::invalid_argument("stream_update_ewma requires an EWMA-mode state");
    }
    state.observe(x);
    return state;
}

ErrorEstimate estimate_from_agreement(std::span<const double> u, double tol) {
    ErrorEstimate out;
    out.p.assign(u.size(), 0.5);
    if (!has_unique_fixed_point(u)) return out;
    auto sol = solve_fixed_point(u, tol);
    if (!sol.unique) return out;
    for (auto& pi : sol.p_of_u) pi = std::clamp(pi, 0.0, 1.0);
    out.p = std::move(sol.p_of_u);
    out.unique = true;
    return out;
}

ErrorEstimate estimate_error_probs(const AgreementState& state, double tol) {
    if (state.t() < 1) throw std::invalid_argument("no tasks observed yet");
    return estimate_from_agreement(state.a_hat(), tol);
}

double solver_tolerance(long long t, std::size_t n) {
    if (t < 1) throw std::invalid_argument("tolerance schedule starts at t = 1");
    return std::max(std::sqrt(std::log(static_cast<double>(n)) / static_cast<double>(t)), 1e-12);
}

double beta_heuristic(double sigma, double alpha, std::size_t n) {
    if (n <= 2) throw std::invalid_argument("need more than 2 labellers");
    if (!(sigma >= 0.0)) throw std::invalid_argument("drift speed must be non-negative");
    const double log_n = std::log(static_cast<double>(n));
    const double beta = std::pow(alpha, 4.0 / 3.0) * std::cbrt(sigma * sigma) /
                        (log_n * log_n * log_n);
    return std::clamp(beta, kBetaMin, kBetaMax);
}

}  // namespace crowdstream
