#pragma once
// Domain types shared by every module, plus the weighted-majority decoder and
// the model diagnostics (q, weights, eta, gamma, lambda).

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

#include "crowdstream/random.hpp"

namespace crowdstream {

// Ground truth or a decoded answer.
enum class Label : std::int8_t { Negative = -1, Positive = 1 };

constexpr int to_int(Label l) noexcept { return static_cast<int>(l); }
constexpr Label operator-(Label l) noexcept {
    return l == Label::Positive ? Label::Negative : Label::Positive;
}
// Positive for s > 0, Negative for s < 0. Callers handle s == 0 themselves.
constexpr Label label_of_sign(double s) noexcept {
    return s > 0 ? Label::Positive : Label::Negative;
}

inline constexpr double kDefaultWeightClamp = 1e-6;
// Clamp applied to estimated error probabilities before decoding. Wider than
// kDefaultWeightClamp so a noisy early estimate of 0 cannot hand one labeller
// a dictator weight.
inline constexpr double kDecodingWeightClamp = 1e-2;
inline constexpr std::size_t kDefaultLambdaMaxN = 12;

// Labels given by the n labellers for one task: +1, -1 or 0 (no answer).
class ObservationVector {
public:
    ObservationVector() = default;
    explicit ObservationVector(std::span<const int> entries);
    ObservationVector(std::initializer_list<int> entries);
    explicit ObservationVector(std::vector<std::int8_t> entries);

    std::size_t size() const noexcept { return entries_.size(); }
    int operator[](std::size_t i) const noexcept { return entries_[i]; }
    std::span<const std::int8_t> entries() const noexcept { return entries_; }
    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }

    ObservationVector operator-() const;
    bool operator==(const ObservationVector&) const = default;

private:
    std::vector<std::int8_t> entries_;
};

// S(t) and N(t): sum of labels and number of answers.
struct ObservationSummary {
    int sum = 0;
    int answers = 0;
};

ObservationSummary summarize(const ObservationVector& x) noexcept;

// n labellers answering with probability alpha, wrong with probability p_i.
struct CrowdModel {
    std::vector<double> p;
    double alpha = 1.0;

    CrowdModel(std::vector<double> error_probs, double answer_prob);
    std::size_t n() const noexcept { return p.size(); }
};

struct ErrorProfile {
    std::vector<double> p;
    double q = 0.0;
    std::vector<double> w;
    double gamma = 0.0;
    double eta = 0.0;
    std::optional<double> lambda;
};

// Throws std::invalid_argument unless every entry lies in [0, 1].
void require_probability_vector(std::span<const double> p);

double mean(std::span<const double> v);

// w_i = log(1/p_i - 1) with p_i clamped to [clamp, 1 - clamp].
std::vector<double> weights_from_error_probs(std::span<const double> p,
                                             double clamp = kDefaultWeightClamp);

// Weights used to decode with an estimated p: weights_from_error_probs with
// the decoding clamp, except that an all-zero weight vector (every p_i = 1/2,
// the fallback estimate) becomes the unit vector, so the decoder reduces to
// majority vote instead of a pure coin flip.
std::vector<double> decoding_weights(std::span<const double> p,
                                     double clamp = kDecodingWeightClamp);

double dot(const ObservationVector& x, std::span<const double> w);

// Sign of w.x; an exact tie is broken by a fair coin drawn from tie_rng.
Label weighted_majority(const ObservationVector& x, std::span<const double> w, Rng& tie_rng);

// lambda = min |w.x| over x in {-1,0,1}^n with w.x != 0. Exponential in n.
double min_nonzero_margin(std::span<const double> w);

ErrorProfile model_diagnostics(const CrowdModel& model,
                               std::size_t lambda_max_n = kDefaultLambdaMaxN);

// q < 1/2 - 1/n.
bool check_assumption(std::span<const double> p);

}  // namespace crowdstream
