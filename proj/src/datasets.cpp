#include "crowdstream/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string_view>
#include <unordered_map>

namespace crowdstream {

namespace {

enum class Delimiter { Tab, Comma, Whitespace };

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

Delimiter detect(std::string_view line) {
    if (line.find('\t') != std::string_view::npos) return Delimiter::Tab;
    if (line.find(',') != std::string_view::npos) return Delimiter::Comma;
    return Delimiter::Whitespace;
}

std::vector<std::string_view> split(std::string_view line, Delimiter d) {
    std::vector<std::string_view> out;
    if (d == Delimiter::Whitespace) {
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
            const std::size_t start = i;
            while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
            if (i > start) out.push_back(line.substr(start, i - start));
        }
        return out;
    }
    const char sep = d == Delimiter::Tab ? '\t' : ',';
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::optional<long long> parse_integer(std::string_view s) {
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

// Reads delimited records with `fields` columns. The first non-empty line
// fixes the delimiter and is skipped as a header when its last field is not
// an integer.
template <typename OnRecord>
void read_records(std::istream& in, std::size_t fields, const char* what, OnRecord on_record) {
    std::string line;
    std::size_t line_no = 0;
    std::optional<Delimiter> delim;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view view = trim(line);
        if (view.empty()) continue;
        const bool first = !delim;
        if (first) delim = detect(view);
        const auto cols = split(view, *delim);
        const auto label = cols.size() == fields ? parse_integer(cols.back()) : std::nullopt;
        if (first && cols.size() == fields && !label) continue;
        if (cols.size() != fields) {
            throw DataError(std::string(what) + " line " + std::to_string(line_no) + ": expected " +
                                std::to_string(fields) + " fields, found " +
                                std::to_string(cols.size()),
                            line_no);
        }
        if (!label) {
            throw DataError(std::string(what) + " line " + std::to_string(line_no) +
                                ": label is not an integer: '" + std::string(cols.back()) + "'",
                            line_no);
        }
        for (std::size_t c = 0; c + 1 < fields; ++c) {
            if (cols[c].empty()) {
                throw DataError(std::string(what) + " line " + std::to_string(line_no) +
                                    ": empty identifier",
                                line_no);
            }
        }
        on_record(cols, *label, line_no);
    }
}

std::size_t intern(std::unordered_map<std::string, std::size_t>& index,
                   std::vector<std::string>& ids, std::string_view id) {
    auto [it, inserted] = index.try_emplace(std::string(id), ids.size());
    if (inserted) ids.emplace_back(id);
    return it->second;
}

constexpr long long kMissing = std::numeric_limits<long long>::min();

}  // namespace

Label binarize(long long label, int levels) {
    if (levels < 2) throw DataError("label levels must be at least 2");
    if (label < 1 || label > levels) {
        throw DataError("label " + std::to_string(label) + " outside 1.." + std::to_string(levels));
    }
    return 2 * label <= levels ? Label::Positive : Label::Negative;
}

std::vector<Label> binarize(std::span<const long long> labels, int levels) {
    std::vector<Label> out;
    out.reserve(labels.size());
    for (long long l : labels) out.push_back(binarize(l, levels));
    return out;
}

Dataset load_labels(std::istream& labels, std::istream& truth, const LoadOptions& options) {
    Dataset d;
    std::unordered_map<std::string, std::size_t> task_index, worker_index;
    struct Entry {
        std::size_t task, worker;
        long long label;
    };
    std::vector<Entry> entries;
    long long lo = std::numeric_limits<long long>::max();
    long long hi = std::numeric_limits<long long>::min();

    read_records(labels, 3, "labels", [&](const auto& cols, long long label, std::size_t) {
        const std::size_t task = intern(task_index, d.task_ids, cols[0]);
        const std::size_t worker = intern(worker_index, d.worker_ids, cols[1]);
        entries.push_back({task, worker, label});
        lo = std::min(lo, label);
        hi = std::max(hi, label);
    });
    if (entries.empty()) throw DataError("labels file has no records");
    if (d.n() <= 2) throw DataError("need labels from more than 2 workers");

    std::vector<long long> truth_raw(d.t(), kMissing);
    read_records(truth, 2, "truth", [&](const auto& cols, long long label, std::size_t) {
        const auto it = task_index.find(std::string(cols[0]));
        if (it == task_index.end()) {
            ++d.dropped_truth_rows;
            return;
        }
        truth_raw[it->second] = label;
        lo = std::min(lo, label);
        hi = std::max(hi, label);
    });

    std::vector<std::string> missing;
    for (std::size_t t = 0; t < d.t(); ++t) {
        if (truth_raw[t] == kMissing) missing.push_back(d.task_ids[t]);
    }
    if (!missing.empty()) {
        std::string msg = "no truth for " + std::to_string(missing.size()) + " task(s):";
        for (std::size_t k = 0; k < std::min<std::size_t>(missing.size(), 10); ++k) {
            msg += " " + missing[k];
        }
        if (missing.size() > 10) msg += " ...";
        throw DataError(msg);
    }

    const long long min_label = options.min_label.value_or(lo);
    d.label_levels = options.levels.value_or(static_cast<int>(std::max(hi - min_label + 1, 2LL)));

    const std::size_t n = d.n();
    std::vector<long long> raw(d.t() * n, kMissing);
    for (const auto& e : entries) raw[e.task * n + e.worker] = e.label;  // keep last

    d.matrix = LabelMatrix(n);
    for (std::size_t t = 0; t < d.t(); ++t) {
        std::vector<std::int8_t> row(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const long long l = raw[t * n + i];
            if (l == kMissing) continue;
            row[i] = static_cast<std::int8_t>(to_int(binarize(l - min_label + 1, d.label_levels)));
            ++d.label_count;
        }
        d.matrix.push_back(ObservationVector(std::move(row)));
        d.truth.push_back(binarize(truth_raw[t] - min_label + 1, d.label_levels));
    }
    d.alpha_hat = static_cast<double>(d.label_count) / static_cast<double>(n * d.t());
    return d;
}

Dataset load_labels(const std::filesystem::path& labels, const std::filesystem::path& truth,
                    const LoadOptions& options) {
    std::ifstream lf(labels);
    if (!lf) throw DataError("cannot open labels file " + labels.string());
    std::ifstream tf(truth);
    if (!tf) throw DataError("cannot open truth file " + truth.string());
    return load_labels(lf, tf, options);
}

void write_labels(const Dataset& d, std::ostream& labels, std::ostream& truth) {
    auto code = [](int v) { return v > 0 ? 1 : 2; };
    for (std::size_t t = 0; t < d.t(); ++t) {
        const auto& row = d.matrix.row(t);
        for (std::size_t i = 0; i < d.n(); ++i) {
            if (row[i] != 0) labels << d.task_ids[t] << '\t' << d.worker_ids[i] << '\t' << code(row[i]) << '\n';
        }
        truth << d.task_ids[t] << '\t' << code(to_int(d.truth[t])) << '\n';
    }
}

double evaluate(std::span<const Label> predictions, std::span<const Label> truth) {
    if (predictions.size() != truth.size()) {
        throw std::invalid_argument("prediction/truth length mismatch");
    }
    if (truth.empty()) return 0.0;
    std::size_t wrong = 0;
    for (std::size_t t = 0; t < truth.size(); ++t) wrong += predictions[t] != truth[t];
    return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

AbRun predict_ab(const LabelMatrix& m, double alpha, bool prequential, Rng& tie_rng) {
    AbRun run;
    AgreementState state = AgreementState::uniform(m.labellers(), alpha);
    run.final_estimate.p.assign(m.labellers(), 0.5);
    if (prequential) {
        std::vector<double> w = decoding_weights(run.final_estimate.p);
        bool unique = false;
        for (const auto& x : m.rows()) {
            run.predictions.push_back(weighted_majority(x, w, tie_rng));
            run.fallback_tasks += !unique;
            state.observe(x);
            run.final_estimate = estimate_error_probs(state, solver_tolerance(state.t(), m.labellers()));
            unique = run.final_estimate.unique;
            w = decoding_weights(run.final_estimate.p);
        }
        return run;
    }
    for (const auto& x : m.rows()) state.observe(x);
    if (state.t() > 0) run.final_estimate = estimate_error_probs(state, 1e-12);
    const auto w = decoding_weights(run.final_estimate.p);
    for (const auto& x : m.rows()) run.predictions.push_back(weighted_majority(x, w, tie_rng));
    if (!run.final_estimate.unique) run.fallback_tasks = m.tasks();
    return run;
}

std::vector<Label> predict_mv(const LabelMatrix& m, Rng& tie_rng) {
    std::vector<Label> out;
    out.reserve(m.tasks());
    for (const auto& x : m.rows()) out.push_back(majority_vote(x, tie_rng));
    return out;
}

}  // namespace crowdstream
