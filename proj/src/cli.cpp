#include "crowdstream/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "crowdstream/agreement.hpp"
#include "crowdstream/baselines.hpp"
#include "crowdstream/datasets.hpp"
#include "crowdstream/simulator.hpp"

namespace crowdstream::cli {

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Writes to --out when given, otherwise to the command's stdout.
int emit(const std::string& path, const std::string& text, std::ostream& out, std::ostream& err) {
    if (path.empty()) {
        out << text;
        return kOk;
    }
    std::ofstream f(path);
    if (!f || !(f << text) || !f.flush()) {
        err << "error: cannot write " << path << "\n";
        return kDataError;
    }
    return kOk;
}

struct SimulateArgs {
    std::size_t n = 10;
    double alpha = 1.0;
    std::string profile = "hammer-spammer";
    double p1 = 0.0;
    std::vector<double> p;
    double omega = 1e-2;
    std::optional<double> beta;
    std::optional<double> sigma;
    long long tasks = 1000;
    int runs = 1;
    std::uint64_t seed = 1;
    std::optional<double> tol;
    std::string methods = "ab,mv,oracle";
    long long em_every = 50;
    std::size_t trace = 1;
    bool strict = false;
    std::string out;
};

int cmd_simulate(const SimulateArgs& a, bool n_given, std::ostream& out, std::ostream& err) {
    if (a.tasks < 1) throw UsageError("--tasks must be positive");
    if (a.runs < 1) throw UsageError("--runs must be positive");
    if (a.em_every < 1) throw UsageError("--em-every must be positive");

    GeneratorConfig config;
    config.n = a.n;
    config.alpha = a.alpha;
    config.seed = a.seed;
    config.tasks = a.tasks;
    std::string profile = a.profile;
    if (!a.p.empty()) {
        if (profile != "explicit" && profile != "hammer-spammer") {
            throw UsageError("--p conflicts with --profile " + profile);
        }
        profile = "explicit";
        if (!n_given) config.n = a.p.size();
    }
    if (profile == "hammer-spammer") {
        config.profile = HammerSpammerProfile{a.p1};
    } else if (profile == "explicit") {
        if (a.p.empty()) throw UsageError("--profile explicit needs --p");
        config.profile = ExplicitProfile{a.p};
    } else if (profile == "sinusoid") {
        config.profile = SinusoidProfile{a.omega};
    } else {
        throw UsageError("unknown profile '" + profile + "'");
    }
    try {
        config.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    ExperimentOptions opt;
    opt.em_every = a.em_every;
    opt.tol = a.tol;
    if (a.tol && !(*a.tol > 0.0)) throw UsageError("--tol must be positive");
    if (a.trace < 1 || a.trace > config.n) throw UsageError("--trace must lie in 1..n");
    opt.traced = a.trace - 1;
    for (const auto& m : split_list(a.methods)) {
        if (m == "em") {
            opt.run_em = true;
        } else if (m != "ab" && m != "mv" && m != "oracle") {
            throw UsageError("unknown method '" + m + "'");
        }
    }
    const double drift = a.sigma ? *a.sigma : trajectory(config).sigma_bound;
    if (a.sigma && !(*a.sigma >= 0.0)) throw UsageError("--sigma must be non-negative");
    if (a.beta) {
        if (!(*a.beta > 0.0 && *a.beta < 1.0)) throw UsageError("--beta must lie in (0, 1)");
        opt.averaging = AveragingMode::Ewma;
        opt.beta = *a.beta;
    } else if (a.sigma || drift > 0.0) {
        opt.averaging = AveragingMode::Ewma;
        opt.beta = beta_heuristic(drift, config.alpha, config.n);
    }

    const ExperimentMetrics m = run_experiment(config, opt, a.runs);

    std::ostringstream os;
    os << "# crowdstream simulate\n";
    os << "# n=" << config.n << " alpha=" << num(config.alpha) << " profile=" << profile;
    if (profile == "hammer-spammer") os << " p1=" << num(a.p1);
    if (profile == "sinusoid") os << " omega=" << num(a.omega);
    os << " tasks=" << config.tasks << " runs=" << a.runs << " seed=" << config.seed;
    os << " averaging=" << (opt.averaging == AveragingMode::Uniform ? "uniform" : "ewma");
    if (opt.averaging == AveragingMode::Ewma) os << " beta=" << num(opt.beta);
    os << " tol=" << (opt.tol ? num(*opt.tol) : std::string("schedule")) << "\n";
    const std::string k = "p" + std::to_string(a.trace);
    os << "# t\tlinf_error\tl1_error\tregret\tab_errors\tmv_errors\toracle_errors";
    if (opt.run_em) os << "\tem_errors";
    os << "\tknown_truth_l1\t" << k << "_true\t" << k << "_hat\t" << k << "_abs_error\tfallback_rate\n";
    for (std::size_t i = 0; i < m.tasks(); ++i) {
        os << i + 1 << '\t' << num(m.linf_error[i]) << '\t' << num(m.l1_error[i]) << '\t'
           << num(m.regret[i]) << '\t' << num(m.ab_errors[i]) << '\t' << num(m.mv_errors[i])
           << '\t' << num(m.oracle_errors[i]);
        if (opt.run_em) os << '\t' << num(m.em_errors[i]);
        os << '\t' << num(m.known_truth_l1_error[i]) << '\t' << num(m.traced_p_true[i]) << '\t'
           << num(m.traced_p_hat[i]) << '\t' << num(m.traced_abs_error[i]) << '\t'
           << num(m.fallback_rate[i]) << '\n';
    }
    if (const int rc = emit(a.out, os.str(), out, err); rc != kOk) return rc;

    const bool all_fallback = std::all_of(m.fallback_rate.begin(), m.fallback_rate.end(),
                                          [](double r) { return r == 1.0; });
    if (all_fallback) {
        err << "warning: the estimator fell back to majority vote on every task\n";
        if (a.strict) return kNumericalFailure;
    }
    return kOk;
}

struct EvalArgs {
    std::string labels;
    std::string truth;
    std::string methods = "mv,em,ab";
    bool prequential = false;
    std::uint64_t seed = 1;
    bool strict = false;
    std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    const auto methods = split_list(a.methods);
    for (const auto& m : methods) {
        if (m != "mv" && m != "em" && m != "ab") throw UsageError("unknown method '" + m + "'");
    }
    Dataset d;
    try {
        d = load_labels(std::filesystem::path(a.labels), std::filesystem::path(a.truth));
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return kDataError;
    }

    std::ostringstream os;
    char alpha_buf[32];
    std::snprintf(alpha_buf, sizeof alpha_buf, "%.6f", d.alpha_hat);
    os << "# crowdstream eval\n";
    os << "# dataset n=" << d.n() << " t=" << d.t() << " labels=" << d.label_count
       << " alpha_hat=" << alpha_buf << " levels=" << d.label_levels
       << " mode=" << (a.prequential ? "prequential" : "batch") << "\n";
    os << "# method\terror_rate\n";
    bool fallback = false;
    for (const auto& m : methods) {
        Rng tie(derive_seed(a.seed, 0));
        std::vector<Label> pred;
        if (m == "mv") {
            pred = predict_mv(d.matrix, tie);
        } else if (m == "em") {
            pred = em_predictions(dawid_skene_em(d.matrix), tie);
        } else {
            AbRun run = predict_ab(d.matrix, d.alpha_hat, a.prequential, tie);
            fallback = run.fallback_tasks == d.t();
            pred = std::move(run.predictions);
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", evaluate(pred, d.truth));
        os << m << '\t' << buf << '\n';
    }
    if (const int rc = emit(a.out, os.str(), out, err); rc != kOk) return rc;
    if (fallback) {
        err << "warning: the estimator fell back to majority vote on every task\n";
        if (a.strict) return kNumericalFailure;
    }
    return kOk;
}

struct PredictArgs {
    std::uint64_t seed = 1;
    std::optional<double> tol;
    bool strict = false;
};

// Parses exactly n labels in {-1, 0, 1} separated by blanks.
bool parse_row(std::string_view line, std::size_t n, std::vector<std::int8_t>& row,
               std::string& why) {
    row.clear();
    const char* p = line.data();
    const char* end = p + line.size();
    while (true) {
        while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
        if (p == end) break;
        int v = 0;
        if (*p == '+') ++p;
        const auto res = std::from_chars(p, end, v);
        if (res.ec != std::errc() || (res.ptr != end && *res.ptr != ' ' && *res.ptr != '\t' &&
                                      *res.ptr != '\r')) {
            why = "unparsable token";
            return false;
        }
        if (v < -1 || v > 1) {
            why = "label " + std::to_string(v) + " not in {-1, 0, 1}";
            return false;
        }
        row.push_back(static_cast<std::int8_t>(v));
        p = res.ptr;
    }
    if (row.size() != n) {
        why = "expected " + std::to_string(n) + " labels, found " + std::to_string(row.size());
        return false;
    }
    return true;
}

int cmd_predict(const PredictArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
    if (a.tol && !(*a.tol > 0.0)) throw UsageError("--tol must be positive");
    std::string line;
    std::size_t line_no = 0;
    std::optional<AgreementState> state;
    while (!state && std::getline(in, line)) {
        ++line_no;
        std::istringstream hs(line);
        std::vector<std::string> tok;
        for (std::string s; hs >> s;) tok.push_back(s);
        if (tok.empty()) continue;
        try {
            if (tok.size() < 2 || tok.size() > 3) throw std::invalid_argument("expected 'n alpha [beta]'");
            std::size_t used = 0;
            const long long n = std::stoll(tok[0], &used);
            if (used != tok[0].size() || n <= 2) throw std::invalid_argument("n must be an integer > 2");
            const double alpha = std::stod(tok[1]);
            if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
            state = tok.size() == 3
                        ? AgreementState::ewma(static_cast<std::size_t>(n), alpha, std::stod(tok[2]))
                        : AgreementState::uniform(static_cast<std::size_t>(n), alpha);
        } catch (const std::exception& e) {
            err << "error: header line " << line_no << ": " << e.what() << "\n";
            return kDataError;
        }
    }
    if (!state) {
        err << "error: missing header 'n alpha [beta]'\n";
        return kDataError;
    }

    const std::size_t n = state->n();
    Rng tie(derive_seed(a.seed, 0));
    ErrorEstimate est{std::vector<double>(n, 0.5), false};
    std::vector<double> w = decoding_weights(est.p);
    std::vector<std::int8_t> row;
    std::string why;
    long long fallback_tasks = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (!parse_row(line, n, row, why)) {
            err << "line " << line_no << ": " << why << "; skipped\n";
            continue;
        }
        const ObservationVector x(row);
        out << (weighted_majority(x, w, tie) == Label::Positive ? "1" : "-1") << '\n';
        fallback_tasks += !est.unique;
        state->observe(x);
        est = estimate_error_probs(*state, a.tol ? *a.tol : solver_tolerance(state->t(), n));
        w = decoding_weights(est.p);
    }
    out << "# tasks " << state->t() << "\n# p_hat";
    for (double p : est.p) out << ' ' << num(p);
    out << "\n";
    if (state->t() > 0 && fallback_tasks == state->t()) {
        err << "warning: the estimator fell back to majority vote on every task\n";
        if (a.strict) return kNumericalFailure;
    }
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Streaming crowdsourced label aggregation"};
    app.name("crowdstream");
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run synthetic experiments and write a metrics table");
    auto* n_opt = simulate->add_option("--n", sim.n, "Number of labellers");
    simulate->add_option("--alpha", sim.alpha, "Answer probability");
    simulate->add_option("--profile", sim.profile, "hammer-spammer | explicit | sinusoid");
    simulate->add_option("--p1", sim.p1, "Error probability of the informative half");
    simulate->add_option("--p", sim.p, "Explicit error probabilities (comma list)")->delimiter(',');
    simulate->add_option("--omega", sim.omega, "Sinusoid angular frequency per task");
    simulate->add_option("--beta", sim.beta, "EWMA averaging parameter");
    simulate->add_option("--sigma", sim.sigma, "Drift speed used to choose beta");
    simulate->add_option("--tasks", sim.tasks, "Tasks per run");
    simulate->add_option("--runs", sim.runs, "Independent runs");
    simulate->add_option("--seed", sim.seed, "Master seed");
    simulate->add_option("--tol", sim.tol, "Fixed solver tolerance");
    simulate->add_option("--methods", sim.methods, "Comma list from ab,mv,em,oracle");
    simulate->add_option("--em-every", sim.em_every, "EM refit interval in tasks");
    simulate->add_option("--trace", sim.trace, "1-based labeller traced in the p_true/p_hat columns");
    simulate->add_flag("--strict", sim.strict, "Exit 3 when every estimate is the fallback");
    simulate->add_option("--out", sim.out, "Output path (default stdout)");

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Error rates of mv/em/ab on a labelled dataset");
    eval->add_option("--labels", ev.labels, "task,worker,label file")->required();
    eval->add_option("--truth", ev.truth, "task,label file")->required();
    eval->add_option("--methods", ev.methods, "Comma list from mv,em,ab");
    eval->add_flag("--prequential", ev.prequential, "Decode each task before learning from it");
    eval->add_option("--seed", ev.seed, "Tie-breaking seed");
    eval->add_flag("--strict", ev.strict, "Exit 3 when the estimator falls back");
    eval->add_option("--out", ev.out, "Output path (default stdout)");

    PredictArgs pr;
    auto* predict = app.add_subcommand("predict", "Stream rows from stdin, print prequential predictions");
    predict->add_option("--seed", pr.seed, "Tie-breaking seed");
    predict->add_option("--tol", pr.tol, "Fixed solver tolerance");
    predict->add_flag("--strict", pr.strict, "Exit 3 when every estimate is the fallback");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*simulate) return cmd_simulate(sim, n_opt->count() > 0, out, err);
        if (*eval) return cmd_eval(ev, out, err);
        return cmd_predict(pr, in, out, err);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return kDataError;
    }
}

}  // namespace crowdstream::cli
