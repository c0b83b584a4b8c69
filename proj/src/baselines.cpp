#include "crowdstream/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace crowdstream {

LabelMatrix::LabelMatrix(std::vector<ObservationVector> rows) {
    if (!rows.empty()) n_ = rows.front().size();
    rows_.reserve(rows.size());
    for (auto& r : rows) push_back(std::move(r));
}

void LabelMatrix::push_back(ObservationVector row) {
    if (n_ == 0) n_ = row.size();
    if (row.size() != n_) {
        throw std::invalid_argument("row has " + std::to_string(row.size()) +
                                    " labels, matrix has " + std::to_string(n_) + " labellers");
    }
    rows_.push_back(std::move(row));
}

LabelMatrix LabelMatrix::negated() const {
    LabelMatrix out(n_);
    for (const auto& r : rows_) out.push_back(-r);
    return out;
}

Label majority_vote(const ObservationVector& x, Rng& tie_rng) {
    const int s = summarize(x).sum;
    if (s == 0) return fair_sign(tie_rng) > 0 ? Label::Positive : Label::Negative;
    return s > 0 ? Label::Positive : Label::Negative;
}

namespace {

constexpr double kLog2 = 0.69314718055994530942;

// log(e^a + e^b), tolerating -inf.
double log_add_exp(double a, double b) {
    const double hi = std::max(a, b);
    if (hi == -std::numeric_limits<double>::infinity()) return hi;
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Log-likelihood of one row under G = +1 and G = -1.
std::pair<double, double> row_log_likelihoods(const ObservationVector& x,
                                              std::span<const double> log_right,
                                              std::span<const double> log_wrong) {
    double pos = 0.0;
    double neg = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0) {
            pos += log_right[i];
            neg += log_wrong[i];
        } else if (x[i] < 0) {
            pos += log_wrong[i];
            neg += log_right[i];
        }
    }
    return {pos, neg};
}

double logistic(double d) {
    if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
    const double e = std::exp(d);
    return e / (1.0 + e);
}

void log_probs(std::span<const double> p, std::vector<double>& log_right,
               std::vector<double>& log_wrong) {
    log_right.resize(p.size());
    log_wrong.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        log_right[i] = std::log(1.0 - p[i]);
        log_wrong[i] = std::log(p[i]);
    }
}

// E-step: fills posteriors, returns the marginal log-likelihood. Rows are
// reduced in index order.
double expectation(const LabelMatrix& m, std::span<const double> p,
                   std::vector<double>& posteriors) {
    std::vector<double> log_right, log_wrong;
    log_probs(p, log_right, log_wrong);
    posteriors.resize(m.tasks());
    double ll = 0.0;
    for (std::size_t t = 0; t < m.tasks(); ++t) {
        const auto [pos, neg] = row_log_likelihoods(m.row(t), log_right, log_wrong);
        ll += log_add_exp(pos, neg) - kLog2;
        posteriors[t] = logistic(pos - neg);
    }
    return ll;
}

std::vector<double> maximization(const LabelMatrix& m, std::span<const double> posteriors,
                                 double clamp) {
    const std::size_t n = m.labellers();
    std::vector<double> wrong(n, 0.0);
    std::vector<double> answers(n, 0.0);
    for (std::size_t t = 0; t < m.tasks(); ++t) {
        const auto& x = m.row(t);
        for (std::size_t i = 0; i < n; ++i) {
            if (x[i] > 0) {
                wrong[i] += 1.0 - posteriors[t];
                answers[i] += 1.0;
            } else if (x[i] < 0) {
                wrong[i] += posteriors[t];
                answers[i] += 1.0;
            }
        }
    }
    std::vector<double> p(n, 0.5);
    for (std::size_t i = 0; i < n; ++i) {
        if (answers[i] > 0.0) p[i] = std::clamp(wrong[i] / answers[i], clamp, 1.0 - clamp);
    }
    return p;
}

}  // namespace

double marginal_log_likelihood(const LabelMatrix& m, std::span<const double> p) {
    if (p.size() != m.labellers()) throw std::invalid_argument("p length mismatch");
    std::vector<double> posteriors;
    return expectation(m, p, posteriors);
}

EmResult dawid_skene_em(const LabelMatrix& m, const EmOptions& options) {
    if (m.tasks() < 1) throw std::invalid_argument("EM needs at least one task");
    if (m.labellers() <= 2) throw std::invalid_argument("EM needs more than 2 labellers");
    if (options.max_iters < 0) throw std::invalid_argument("max_iters must be non-negative");

    EmResult r;
    // Majority-vote pseudo-truth; ties start undecided.
    std::vector<double> posteriors(m.tasks());
    for (std::size_t t = 0; t < m.tasks(); ++t) {
        const int s = summarize(m.row(t)).sum;
        posteriors[t] = s > 0 ? 1.0 : (s < 0 ? 0.0 : 0.5);
    }
    r.p_hat = maximization(m, posteriors, options.clamp);

    while (true) {
        const double ll = expectation(m, r.p_hat, posteriors);
        r.log_likelihood_trace.push_back(ll);
        const auto k = r.log_likelihood_trace.size();
        if (k > 1 && ll - r.log_likelihood_trace[k - 2] < options.ll_tol) {
            r.converged = true;
            break;
        }
        if (r.iterations >= options.max_iters) break;
        r.p_hat = maximization(m, posteriors, options.clamp);
        ++r.iterations;
    }
    r.posteriors = std::move(posteriors);
    return r;
}

std::vector<Label> em_predictions(const EmResult& result, Rng& tie_rng) {
    std::vector<Label> out;
    out.reserve(result.posteriors.size());
    for (double post : result.posteriors) {
        if (post == 0.5) {
            out.push_back(fair_sign(tie_rng) > 0 ? Label::Positive : Label::Negative);
        } else {
            out.push_back(post > 0.5 ? Label::Positive : Label::Negative);
        }
    }
    return out;
}

}  // namespace crowdstream
