#include "crowdstream/fixed_point.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace crowdstream {

namespace {

double discriminant_scale(std::size_t n) {
    const double nd = static_cast<double>(n);
    return 4.0 * (nd - 1.0) / (nd * nd);
}

void require_size(std::span<const double> u) {
    if (u.size() <= 2) throw std::invalid_argument("need more than 2 labellers");
}

double sqrt_delta(double delta) {
    if (delta < 0.0 && delta > -kDeltaTruncation) return 0.0;
    return std::sqrt(delta);
}

// f without the v >= v0 check.
double f_unchecked(std::span<const double> u, double v) {
    const double c = discriminant_scale(u.size());
    double s = 0.0;
    for (double ui : u) s += sqrt_delta(v + c * (1.0 - 2.0 * ui));
    s /= static_cast<double>(u.size()) - 2.0;
    return s * s;
}

std::vector<double> g_unchecked(std::span<const double> u, double v) {
    const double c = discriminant_scale(u.size());
    const double quarter_n = static_cast<double>(u.size()) / 4.0;
    const double root_v = std::sqrt(v);
    std::vector<double> g(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        g[i] = 0.5 + quarter_n * (sqrt_delta(v + c * (1.0 - 2.0 * u[i])) - root_v);
    }
    return g;
}

void require_admissible(std::span<const double> u, double v) {
    require_size(u);
    const double lower = v0(u);
    if (!(v >= lower)) {
        throw std::invalid_argument("v = " + std::to_string(v) + " is below v0(u) = " +
                                    std::to_string(lower));
    }
}

}  // namespace

std::vector<double> discriminants(std::span<const double> u, double v) {
    const double c = discriminant_scale(u.size());
    std::vector<double> d(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) d[i] = v + c * (1.0 - 2.0 * u[i]);
    return d;
}

double v0(std::span<const double> u) {
    if (u.empty()) return 0.0;
    const double top = *std::max_element(u.begin(), u.end());
    return std::max(discriminant_scale(u.size()) * (2.0 * top - 1.0), 0.0);
}

double v1(std::span<const double> u) {
    if (u.empty()) return 0.0;
    double s = 0.0;
    for (double ui : u) s += 2.0 * ui - 1.0;
    return 2.0 / static_cast<double>(u.size()) * s;
}

double f_eval(std::span<const double> u, double v) {
    require_admissible(u, v);
    return f_unchecked(u, v);
}

std::vector<double> g_eval(std::span<const double> u, double v) {
    require_admissible(u, v);
    return g_unchecked(u, v);
}

bool has_unique_fixed_point(std::span<const double> u) {
    require_size(u);
    const double lower = v0(u);
    return f_unchecked(u, lower) <= lower;
}

FixedPointSolution solve_fixed_point(std::span<const double> u, double tol) {
    require_size(u);
    if (!(tol > 0.0)) throw std::invalid_argument("solver tolerance must be positive");

    FixedPointSolution sol;
    sol.v = std::numeric_limits<double>::quiet_NaN();
    sol.p_of_u.assign(u.size(), 0.5);

    auto h = [&](double v) { return f_unchecked(u, v) - v; };

    double lo = v0(u);
    double h_lo = h(lo);
    if (h_lo > 0.0) {
        sol.status = SolveStatus::NoUniqueRoot;
        return sol;
    }
    auto finish = [&](double v) {
        sol.v = v;
        sol.unique = true;
        sol.status = SolveStatus::Converged;
        sol.p_of_u = g_unchecked(u, v);
        return sol;
    };
    if (h_lo == 0.0) return finish(lo);

    double hi = std::max(lo + 1.0, 1.0);
    double h_hi = h(hi);
    while (h_hi < 0.0) {
        lo = hi;
        h_lo = h_hi;
        hi *= 2.0;
        ++sol.iterations;
        if (hi > kMaxBracket) {
            sol.status = SolveStatus::BracketOverflow;
            return sol;
        }
        h_hi = h(hi);
    }

    // Invariant: h_lo < 0 <= h_hi.
    auto best_residual = [&] { return std::min(-h_lo, h_hi); };
    while (!(hi - lo <= tol && best_residual() <= tol)) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        const double h_mid = h(mid);
        ++sol.iterations;
        if (h_mid < 0.0) {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
            h_hi = h_mid;
        }
    }
    return finish(-h_lo < h_hi ? lo : hi);
}

std::vector<double> phi(std::span<const double> u, double tol) {
    auto sol = solve_fixed_point(u, tol);
    if (!sol.unique) throw std::domain_error("agreement vector admits no unique fixed point");
    return std::move(sol.p_of_u);
}

}  // namespace crowdstream
