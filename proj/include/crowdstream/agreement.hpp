#pragma once
// Streaming estimate of the agreement-rate vector and its conversion into
// error-probability estimates.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdstream/core.hpp"

namespace crowdstream {

enum class AveragingMode { Uniform, Ewma };

// a_i = 1/(n-1) sum_{j != i} (p_i p_j + (1 - p_i)(1 - p_j)).
std::vector<double> agreement_rates_exact(std::span<const double> p);
std::vector<double> agreement_rates_exact(const CrowdModel& model);

// Per-task agreement count of labeller i, sum_{j != i} 1{x_i x_j = 1},
// computed from S and N in O(1): (x_i S + |x_i| (N - 2)) / 2.
inline int agreement_count(int xi, const ObservationSummary& s) noexcept {
    const int ai = xi < 0 ? -xi : xi;
    return (xi * s.sum + ai * (s.answers - 2)) / 2;
}

// Running agreement-rate estimate. Uniform mode keeps the empirical mean over
// all tasks; EWMA mode weights task s by beta (1 - beta)^(t - s) without
// renormalization. Single writer; copies are independent snapshots.
class AgreementState {
public:
    static AgreementState uniform(std::size_t n, double alpha);
    static AgreementState ewma(std::size_t n, double alpha, double beta);

    std::size_t n() const noexcept { return a_hat_.size(); }
    long long t() const noexcept { return t_; }
    double alpha() const noexcept { return alpha_; }
    double beta() const noexcept { return beta_; }
    AveragingMode mode() const noexcept { return mode_; }
    std::span<const double> a_hat() const noexcept { return a_hat_; }

    // O(n) update with one task; dispatches on mode.
    void observe(const ObservationVector& x);

    // Flat checkpoint record: t, mode, beta, alpha, then the n rates.
    std::vector<double> to_record() const;
    static AgreementState from_record(std::span<const double> record);
    std::string serialize() const;
    static AgreementState deserialize(std::string_view text);

    bool operator==(const AgreementState&) const = default;

private:
    AgreementState(std::size_t n, double alpha, AveragingMode mode, double beta);

    long long t_ = 0;
    std::vector<double> a_hat_;
    AveragingMode mode_ = AveragingMode::Uniform;
    double beta_ = 0.0;
    double alpha_ = 1.0;
};

// Value-returning forms; each requires the matching mode.
AgreementState stream_update(AgreementState state, const ObservationVector& x);
AgreementState stream_update_ewma(AgreementState state, const ObservationVector& x);

struct ErrorEstimate {
    std::vector<double> p;
    bool unique = false;
};

// phi(u) clamped to [0, 1] when u admits a unique fixed point, otherwise the
// all-1/2 fallback. Never throws on numerical failure.
ErrorEstimate estimate_from_agreement(std::span<const double> u, double tol);
ErrorEstimate estimate_error_probs(const AgreementState& state, double tol);

// Bisection tolerance after t tasks: max(sqrt(log n / t), 1e-12).
double solver_tolerance(long long t, std::size_t n);

inline constexpr double kBetaMin = 1e-4;
inline constexpr double kBetaMax = 0.5;

// alpha^(4/3) sigma^(2/3) / (log n)^3 clamped to [kBetaMin, kBetaMax].
double beta_heuristic(double sigma, double alpha, std::size_t n);

}  // namespace crowdstream
