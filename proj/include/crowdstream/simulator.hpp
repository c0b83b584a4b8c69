#pragma once
// Synthetic crowds (stationary and drifting) and the prequential experiment
// loop comparing the agreement-based estimator with majority vote, batch EM
// and the oracle that knows p.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "crowdstream/agreement.hpp"
#include "crowdstream/baselines.hpp"
#include "crowdstream/core.hpp"

namespace crowdstream {

struct ExplicitProfile {
    std::vector<double> p;
};

// First half of the labellers err with p1, second half answer at random.
struct HammerSpammerProfile {
    double p1 = 0.0;
};

// p_i(t) = (1 + sin(omega t + 2 pi i / n)) / 4, i = 0..n-1.
struct SinusoidProfile {
    double omega = 1e-2;
};

using Profile = std::variant<ExplicitProfile, HammerSpammerProfile, SinusoidProfile>;

struct GeneratorConfig {
    std::size_t n = 10;
    double alpha = 1.0;
    Profile profile = HammerSpammerProfile{};
    std::uint64_t seed = 1;
    long long tasks = 1000;

    // Throws std::invalid_argument on an inconsistent configuration.
    void validate() const;
};

struct DriftTrajectory {
    std::function<std::vector<double>(long long)> p_of_t;
    // Per-task Lipschitz bound on every p_i(t); 0 when stationary.
    double sigma_bound = 0.0;
};

std::vector<double> hammer_spammer_p(std::size_t n, double p1);

DriftTrajectory trajectory(const GeneratorConfig& config);
std::vector<double> error_probs_at(const GeneratorConfig& config, long long t);

struct Task {
    Label truth = Label::Positive;
    ObservationVector labels;
};

// Draws G uniformly, then each labeller answers w.p. alpha and is wrong w.p. p_i.
Task draw_task(std::span<const double> p, double alpha, Rng& rng);
Task generate_task(const GeneratorConfig& config, long long t, Rng& rng);

// Empirical disagreement rate with the known truth; 1/2 for silent labellers.
std::vector<double> oracle_error_known_truth(const LabelMatrix& labels,
                                             std::span<const Label> truth);

enum class Method { AB, MV, EM, Oracle };

struct ExperimentOptions {
    // Method whose errors, minus the oracle's, form the regret.
    Method learner = Method::AB;
    bool run_em = false;
    long long em_every = 50;
    AveragingMode averaging = AveragingMode::Uniform;
    double beta = 0.03;
    // Fixed solver tolerance; the default schedule is solver_tolerance(t, n).
    std::optional<double> tol;
    // Index of the labeller traced in the p_true / p_hat columns.
    std::size_t traced = 0;
    // 0 = CROWDSTREAM_THREADS or hardware concurrency.
    unsigned threads = 0;
};

// Per-task series (index t-1), each averaged over runs.
struct ExperimentMetrics {
    std::vector<double> linf_error;
    std::vector<double> l1_error;
    std::vector<double> known_truth_l1_error;
    std::vector<double> ab_errors;
    std::vector<double> mv_errors;
    std::vector<double> em_errors;  // empty unless EM ran
    std::vector<double> oracle_errors;
    std::vector<double> regret;
    std::vector<double> traced_p_true;
    std::vector<double> traced_p_hat;
    std::vector<double> traced_abs_error;
    std::vector<double> fallback_rate;

    GeneratorConfig config;
    ExperimentOptions options;
    int runs = 0;

    std::size_t tasks() const noexcept { return linf_error.size(); }
};

ExperimentMetrics run_experiment(const GeneratorConfig& config,
                                 const ExperimentOptions& options, int runs);

// Thread cap from CROWDSTREAM_THREADS, else hardware concurrency (>= 1).
unsigned default_thread_count();

}  // namespace crowdstream
