#include "crowdstream/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>

namespace crowdstream {

void GeneratorConfig::validate() const {
    if (n <= 2) throw std::invalid_argument("n must exceed 2");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
    if (tasks < 1) throw std::invalid_argument("tasks must be positive");
    if (const auto* e = std::get_if<ExplicitProfile>(&profile)) {
        if (e->p.size() != n) {
            throw std::invalid_argument("explicit profile has " + std::to_string(e->p.size()) +
                                        " entries for n = " + std::to_string(n));
        }
        require_probability_vector(e->p);
    } else if (const auto* h = std::get_if<HammerSpammerProfile>(&profile)) {
        if (n % 2 != 0) throw std::invalid_argument("hammer-spammer profile needs even n");
        if (!(h->p1 >= 0.0 && h->p1 < 0.5)) throw std::invalid_argument("p1 must lie in [0, 1/2)");
    } else if (const auto* s = std::get_if<SinusoidProfile>(&profile)) {
        if (!(s->omega >= 0.0) || !std::isfinite(s->omega)) {
            throw std::invalid_argument("omega must be finite and non-negative");
        }
    }
}

std::vector<double> hammer_spammer_p(std::size_t n, double p1) {
    if (n % 2 != 0) throw std::invalid_argument("hammer-spammer profile needs even n");
    if (!(p1 >= 0.0 && p1 < 0.5)) throw std::invalid_argument("p1 must lie in [0, 1/2)");
    std::vector<double> p(n, 0.5);
    std::fill(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(n / 2), p1);
    return p;
}

DriftTrajectory trajectory(const GeneratorConfig& config) {
    config.validate();
    DriftTrajectory out;
    if (const auto* e = std::get_if<ExplicitProfile>(&config.profile)) {
        out.p_of_t = [p = e->p](long long) { return p; };
    } else if (const auto* h = std::get_if<HammerSpammerProfile>(&config.profile)) {
        out.p_of_t = [p = hammer_spammer_p(config.n, h->p1)](long long) { return p; };
    } else {
        const double omega = std::get<SinusoidProfile>(config.profile).omega;
        const std::size_t n = config.n;
        out.p_of_t = [omega, n](long long t) {
            std::vector<double> p(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(n);
                p[i] = 0.25 * (1.0 + std::sin(omega * static_cast<double>(t) + phase));
            }
            return p;
        };
        out.sigma_bound = omega / 4.0;
    }
    return out;
}

std::vector<double> error_probs_at(const GeneratorConfig& config, long long t) {
    return trajectory(config).p_of_t(t);
}

Task draw_task(std::span<const double> p, double alpha, Rng& rng) {
    Task task;
    task.truth = fair_sign(rng) > 0 ? Label::Positive : Label::Negative;
    const int g = to_int(task.truth);
    std::vector<std::int8_t> x(p.size(), 0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (uniform01(rng) < alpha) {
            x[i] = static_cast<std::int8_t>(uniform01(rng) < p[i] ? -g : g);
        }
    }
    task.labels = ObservationVector(std::move(x));
    return task;
}

Task generate_task(const GeneratorConfig& config, long long t, Rng& rng) {
    const auto p = error_probs_at(config, t);
    return draw_task(p, config.alpha, rng);
}

std::vector<double> oracle_error_known_truth(const LabelMatrix& labels,
                                             std::span<const Label> truth) {
    if (truth.size() != labels.tasks()) {
        throw std::invalid_argument("truth has " + std::to_string(truth.size()) +
                                    " entries for " + std::to_string(labels.tasks()) + " tasks");
    }
    const std::size_t n = labels.labellers();
    std::vector<double> wrong(n, 0.0), answers(n, 0.0);
    for (std::size_t t = 0; t < labels.tasks(); ++t) {
        const auto& x = labels.row(t);
        for (std::size_t i = 0; i < n; ++i) {
            if (x[i] == 0) continue;
            answers[i] += 1.0;
            wrong[i] += x[i] != to_int(truth[t]);
        }
    }
    std::vector<double> p(n, 0.5);
    for (std::size_t i = 0; i < n; ++i) {
        if (answers[i] > 0.0) p[i] = wrong[i] / answers[i];
    }
    return p;
}

unsigned default_thread_count() {
    if (const char* env = std::getenv("CROWDSTREAM_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct RunSeries {
    std::vector<double> linf, l1, known_l1, traced_true, traced_hat, traced_abs, fallback;
    std::vector<long long> ab, mv, em, oracle;
};

RunSeries simulate_run(const GeneratorConfig& config, const DriftTrajectory& traj,
                       const ExperimentOptions& opt, bool with_em, int run) {
    const std::size_t n = config.n;
    const auto T = static_cast<std::size_t>(config.tasks);
    const bool stationary = !std::holds_alternative<SinusoidProfile>(config.profile);

    RunSeries s;
    for (auto* v : {&s.linf, &s.l1, &s.known_l1, &s.traced_true, &s.traced_hat, &s.traced_abs,
                    &s.fallback}) {
        v->resize(T);
    }
    for (auto* v : {&s.ab, &s.mv, &s.oracle}) v->resize(T);
    if (with_em) s.em.resize(T);

    Rng data_rng(derive_seed(config.seed, 2 * static_cast<std::uint64_t>(run)));
    const std::uint64_t tie_seed = derive_seed(config.seed, 2 * static_cast<std::uint64_t>(run) + 1);
    Rng ab_tie(tie_seed), mv_tie(tie_seed), em_tie(tie_seed), oracle_tie(tie_seed);

    AgreementState state = opt.averaging == AveragingMode::Uniform
                               ? AgreementState::uniform(n, config.alpha)
                               : AgreementState::ewma(n, config.alpha, opt.beta);
    std::vector<double> w_ab = decoding_weights(std::vector<double>(n, 0.5));
    std::vector<double> w_em = w_ab;
    std::vector<double> wrong(n, 0.0), answers(n, 0.0);
    LabelMatrix prefix(n);

    std::vector<double> p = traj.p_of_t(1);
    std::vector<double> w_oracle = weights_from_error_probs(p);
    long long ab_err = 0, mv_err = 0, em_err = 0, oracle_err = 0;

    for (std::size_t k = 0; k < T; ++k) {
        const long long t = static_cast<long long>(k) + 1;
        if (!stationary && t > 1) {
            p = traj.p_of_t(t);
            w_oracle = weights_from_error_probs(p);
        }
        Task task = draw_task(p, config.alpha, data_rng);

        // Predictions use only tasks 1..t-1.
        ab_err += weighted_majority(task.labels, w_ab, ab_tie) != task.truth;
        mv_err += majority_vote(task.labels, mv_tie) != task.truth;
        oracle_err += weighted_majority(task.labels, w_oracle, oracle_tie) != task.truth;
        if (with_em) em_err += weighted_majority(task.labels, w_em, em_tie) != task.truth;

        state.observe(task.labels);
        const double tol = opt.tol ? *opt.tol : solver_tolerance(t, n);
        const ErrorEstimate est = estimate_error_probs(state, tol);
        w_ab = decoding_weights(est.p);

        double linf = 0.0, l1 = 0.0, known_l1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = std::abs(est.p[i] - p[i]);
            linf = std::max(linf, e);
            l1 += e;
            if (task.labels[i] != 0) {
                answers[i] += 1.0;
                wrong[i] += task.labels[i] != to_int(task.truth);
            }
            const double known = answers[i] > 0.0 ? wrong[i] / answers[i] : 0.5;
            known_l1 += std::abs(known - p[i]);
        }

        if (with_em) {
            prefix.push_back(task.labels);
            if (t % opt.em_every == 0) w_em = decoding_weights(dawid_skene_em(prefix).p_hat);
        }

        s.linf[k] = linf;
        s.l1[k] = l1 / static_cast<double>(n);
        s.known_l1[k] = known_l1 / static_cast<double>(n);
        s.traced_true[k] = p[opt.traced];
        s.traced_hat[k] = est.p[opt.traced];
        s.traced_abs[k] = std::abs(est.p[opt.traced] - p[opt.traced]);
        s.fallback[k] = est.unique ? 0.0 : 1.0;
        s.ab[k] = ab_err;
        s.mv[k] = mv_err;
        s.oracle[k] = oracle_err;
        if (with_em) s.em[k] = em_err;
    }
    return s;
}

template <typename T>
std::vector<double> average(const std::vector<RunSeries>& runs, std::vector<T> RunSeries::*field) {
    const std::size_t len = (runs.front().*field).size();
    std::vector<double> out(len, 0.0);
    for (const auto& r : runs) {
        const auto& v = r.*field;
        for (std::size_t k = 0; k < len; ++k) out[k] += static_cast<double>(v[k]);
    }
    for (auto& x : out) x /= static_cast<double>(runs.size());
    return out;
}

}  // namespace

ExperimentMetrics run_experiment(const GeneratorConfig& config, const ExperimentOptions& options,
                                 int runs) {
    config.validate();
    if (runs < 1) throw std::invalid_argument("runs must be positive");
    if (options.traced >= config.n) throw std::invalid_argument("traced labeller out of range");
    if (options.em_every < 1) throw std::invalid_argument("EM refit interval must be positive");
    if (options.tol && !(*options.tol > 0.0)) throw std::invalid_argument("tol must be positive");
    if (options.averaging == AveragingMode::Ewma && !(options.beta > 0.0 && options.beta < 1.0)) {
        throw std::invalid_argument("beta must lie in (0, 1)");
    }

    const DriftTrajectory traj = trajectory(config);
    const bool with_em = options.run_em || options.learner == Method::EM;

    std::vector<RunSeries> results(static_cast<std::size_t>(runs));
    const unsigned threads = std::min<unsigned>(
        options.threads ? options.threads : default_thread_count(), static_cast<unsigned>(runs));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int r = next++; r < runs; r = next++) {
            results[static_cast<std::size_t>(r)] = simulate_run(config, traj, options, with_em, r);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    }

    ExperimentMetrics m;
    m.config = config;
    m.options = options;
    m.runs = runs;
    m.linf_error = average(results, &RunSeries::linf);
    m.l1_error = average(results, &RunSeries::l1);
    m.known_truth_l1_error = average(results, &RunSeries::known_l1);
    m.traced_p_true = average(results, &RunSeries::traced_true);
    m.traced_p_hat = average(results, &RunSeries::traced_hat);
    m.traced_abs_error = average(results, &RunSeries::traced_abs);
    m.fallback_rate = average(results, &RunSeries::fallback);
    m.ab_errors = average(results, &RunSeries::ab);
    m.mv_errors = average(results, &RunSeries::mv);
    m.oracle_errors = average(results, &RunSeries::oracle);
    if (with_em) m.em_errors = average(results, &RunSeries::em);

    const std::vector<double>* learner = &m.ab_errors;
    switch (options.learner) {
        case Method::AB: learner = &m.ab_errors; break;
        case Method::MV: learner = &m.mv_errors; break;
        case Method::EM: learner = &m.em_errors; break;
        case Method::Oracle: learner = &m.oracle_errors; break;
    }
    m.regret.resize(m.tasks());
    for (std::size_t k = 0; k < m.tasks(); ++k) m.regret[k] = (*learner)[k] - m.oracle_errors[k];
    return m;
}

}  // namespace crowdstream
