#pragma once
// Reference aggregators: simple majority vote and a symmetric-error
// Dawid-Skene EM fitted on the full task-labeller matrix.

#include <cstddef>
#include <span>
#include <vector>

#include "crowdstream/core.hpp"

namespace crowdstream {

// Dense task x labeller matrix; 0 marks a missing label.
class LabelMatrix {
public:
    LabelMatrix() = default;
    explicit LabelMatrix(std::size_t n) : n_(n) {}
    explicit LabelMatrix(std::vector<ObservationVector> rows);

    void push_back(ObservationVector row);

    std::size_t labellers() const noexcept { return n_; }
    std::size_t tasks() const noexcept { return rows_.size(); }
    const ObservationVector& row(std::size_t t) const { return rows_[t]; }
    std::span<const ObservationVector> rows() const noexcept { return rows_; }
    LabelMatrix negated() const;

    bool operator==(const LabelMatrix&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<ObservationVector> rows_;
};

Label majority_vote(const ObservationVector& x, Rng& tie_rng);

struct EmOptions {
    int max_iters = 200;
    double ll_tol = 1e-8;
    // p_hat is kept inside [clamp, 1 - clamp] so that weights stay finite.
    double clamp = 1e-6;
};

struct EmResult {
    std::vector<double> p_hat;
    std::vector<double> posteriors;  // P(G = +1 | data) per task
    std::vector<double> log_likelihood_trace;
    int iterations = 0;
    bool converged = false;
};

// Marginal log-likelihood of the matrix under error probabilities p with a
// uniform class prior. The answer-probability factor is omitted (constant).
double marginal_log_likelihood(const LabelMatrix& m, std::span<const double> p);

EmResult dawid_skene_em(const LabelMatrix& m, const EmOptions& options = {});

// Decoded label for each task from the EM posteriors; exact 1/2 is a tie.
std::vector<Label> em_predictions(const EmResult& result, Rng& tie_rng);

}  // namespace crowdstream
