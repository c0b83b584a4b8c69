#pragma once
// Loading real crowdsourcing datasets: delimited (task, worker, label) records
// plus a (task, label) truth file, binarized to +/-1.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdstream/agreement.hpp"
#include "crowdstream/baselines.hpp"
#include "crowdstream/core.hpp"

namespace crowdstream {

// Malformed or inconsistent input. line is 0 when not tied to a line.
class DataError : public std::runtime_error {
public:
    DataError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct RawLabelRecord {
    std::string task_id;
    std::string worker_id;
    long long label = 0;
};

struct Dataset {
    LabelMatrix matrix;
    std::vector<Label> truth;
    std::vector<std::string> task_ids;    // order of first appearance
    std::vector<std::string> worker_ids;  // order of first appearance
    std::size_t label_count = 0;
    int label_levels = 2;  // L after shifting labels to 1..L
    double alpha_hat = 0.0;
    std::size_t dropped_truth_rows = 0;  // truth rows for tasks with no labels

    std::size_t n() const noexcept { return worker_ids.size(); }
    std::size_t t() const noexcept { return task_ids.size(); }
};

// l <= L/2 -> +1, l > L/2 -> -1; labels must be in 1..L.
Label binarize(long long label, int levels);
std::vector<Label> binarize(std::span<const long long> labels, int levels);

struct LoadOptions {
    // Label range; inferred from the data (min and max seen) when unset.
    std::optional<long long> min_label;
    std::optional<int> levels;
};

Dataset load_labels(std::istream& labels, std::istream& truth, const LoadOptions& options = {});
Dataset load_labels(const std::filesystem::path& labels, const std::filesystem::path& truth,
                    const LoadOptions& options = {});

// Writes the dataset back as two tab-separated files in canonical form
// (ids in first-appearance order, labels as 1 for +1 and 2 for -1).
void write_labels(const Dataset& d, std::ostream& labels, std::ostream& truth);

// Fraction of mismatches; throws std::invalid_argument on length mismatch.
double evaluate(std::span<const Label> predictions, std::span<const Label> truth);

struct AbRun {
    std::vector<Label> predictions;
    ErrorEstimate final_estimate;
    std::size_t fallback_tasks = 0;  // tasks decoded with the fallback estimate
};

// Agreement-based aggregation of a stored matrix. The estimator consumes the
// rows once in order. Batch mode decodes every task with the final estimate;
// prequential mode decodes task t with the estimate from tasks 1..t-1.
AbRun predict_ab(const LabelMatrix& m, double alpha, bool prequential, Rng& tie_rng);

std::vector<Label> predict_mv(const LabelMatrix& m, Rng& tie_rng);

}  // namespace crowdstream
