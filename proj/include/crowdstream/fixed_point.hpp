#pragma once
// Inversion of agreement rates into error probabilities.
//
// For an agreement vector u of length n the error probabilities solve a
// family of quadratics sharing one unknown v = (1 - 2q)^2. With
//
//   delta_i(u, v) = v + 4(n-1)/n^2 (1 - 2 u_i)
//   f(u, v)       = ( sum_i sqrt(delta_i) / (n-2) )^2
//   g_i(u, v)     = 1/2 + n/4 (sqrt(delta_i) - sqrt(v))
//
// v is the root of v = f(u, v) on [v0(u), inf), where v0(u) is the smallest v
// keeping every delta_i non-negative, and p = g(u, v). Since f(u, .) - id is
// strictly increasing there (slope >= n^2/(n-2)^2 - 1), the root exists and is
// unique iff f(u, v0) <= v0, and bisection finds it.

#include <cstddef>
#include <span>
#include <vector>

namespace crowdstream {

// Upper bracket limit; larger values only arise from malformed input.
inline constexpr double kMaxBracket = 1e6;
// Rounding can push delta_i slightly below zero at v = v0.
inline constexpr double kDeltaTruncation = 1e-12;

enum class SolveStatus {
    Converged,
    NoUniqueRoot,     // f(u, v0) > v0
    BracketOverflow,  // h never became non-negative below kMaxBracket
};

struct FixedPointSolution {
    double v = 0.0;
    bool unique = false;
    std::vector<double> p_of_u;
    int iterations = 0;
    SolveStatus status = SolveStatus::NoUniqueRoot;
};

std::vector<double> discriminants(std::span<const double> u, double v);

double v0(std::span<const double> u);
double v1(std::span<const double> u);

// Both throw std::invalid_argument when v < v0(u) or n <= 2.
double f_eval(std::span<const double> u, double v);
std::vector<double> g_eval(std::span<const double> u, double v);

bool has_unique_fixed_point(std::span<const double> u);

// Bisection on h(v) = f(u, v) - v. On success |h(v)| <= tol and the final
// bracket is no wider than tol (or has collapsed to adjacent doubles).
FixedPointSolution solve_fixed_point(std::span<const double> u, double tol);

// g(u, v(u)). Throws std::domain_error when u admits no unique root.
std::vector<double> phi(std::span<const double> u, double tol);

}  // namespace crowdstream
