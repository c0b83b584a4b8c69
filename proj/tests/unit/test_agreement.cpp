#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "crowdstream/agreement.hpp"
#include "crowdstream/fixed_point.hpp"
#include "crowdstream/simulator.hpp"
#include "support/oracles.hpp"

using namespace crowdstream;
using doctest::Approx;

namespace {

ObservationVector random_row(std::mt19937_64& gen, std::size_t n, double alpha) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<int> x(n, 0);
    for (auto& v : x) {
        if (u(gen) < alpha) v = u(gen) < 0.5 ? 1 : -1;
    }
    return ObservationVector(x);
}

}  // namespace

TEST_CASE("agreement_rates_exact") {
    const auto a = agreement_rates_exact(std::vector<double>{0, 0, 0, .5, .5, .5});
    for (int i = 0; i < 3; ++i) CHECK(a[i] == Approx(0.7).epsilon(1e-14));
    for (int i = 3; i < 6; ++i) CHECK(a[i] == Approx(0.5).epsilon(1e-14));

    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        std::vector<double> p(3 + k % 17);
        for (auto& x : p) x = d(gen);
        const auto lib = agreement_rates_exact(p);
        const auto ref = oracle::expected_agreement(p);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(lib[i] == Approx(ref[i]).epsilon(1e-13));
    }
    CHECK_THROWS_AS(agreement_rates_exact(std::vector<double>{0.1, 0.2}), std::invalid_argument);
}

TEST_CASE("per-task agreement count") {
    const ObservationVector x{1, 1, -1, 0};
    const auto s = summarize(x);
    CHECK(agreement_count(1, s) == 1);
    CHECK(agreement_count(-1, s) == 0);
    CHECK(agreement_count(0, s) == 0);
}

TEST_CASE("uniform stream update") {
    auto st = AgreementState::uniform(4, 1.0);
    st.observe(ObservationVector{1, 1, -1, 0});
    CHECK(st.t() == 1);
    CHECK(st.a_hat()[0] == Approx(1.0 / 3.0));
    CHECK(st.a_hat()[1] == Approx(1.0 / 3.0));
    CHECK(st.a_hat()[2] == 0.0);
    CHECK(st.a_hat()[3] == 0.0);

    auto by_value = stream_update(AgreementState::uniform(4, 1.0), ObservationVector{1, 1, -1, 0});
    CHECK(by_value == st);
    CHECK_THROWS_AS(st.observe(ObservationVector{1, 1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(stream_update_ewma(st, ObservationVector{1, 1, 1, 1}), std::invalid_argument);
}

TEST_CASE("unanimous answers push every rate to 1") {
    auto st = AgreementState::uniform(5, 1.0);
    for (int k = 0; k < 1000; ++k) st.observe(ObservationVector{1, 1, 1, 1, 1});
    for (double a : st.a_hat()) CHECK(a == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("uniform update equals the pairwise-count oracle") {
    std::mt19937_64 gen(8);
    for (double alpha : {1.0, 0.6, 0.2}) {
        for (std::size_t n : {3u, 7u, 20u}) {
            auto st = AgreementState::uniform(n, alpha);
            oracle::PairwiseAgreement ref(n, alpha);
            for (int t = 0; t < 2000; ++t) {
                const auto x = random_row(gen, n, alpha);
                st.observe(x);
                ref.observe(x);
            }
            const auto r = ref.rates();
            for (std::size_t i = 0; i < n; ++i) CHECK(st.a_hat()[i] == Approx(r[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("EWMA update") {
    SUBCASE("first step from zero") {
        auto st = AgreementState::ewma(3, 1.0, 0.5);
        st.observe(ObservationVector{1, 1, 1});
        for (double a : st.a_hat()) CHECK(a == Approx(0.5));
    }
    SUBCASE("weight mass after t unanimous steps is 1 - (1 - beta)^t") {
        for (double beta : {0.01, 0.1, 0.5}) {
            auto st = AgreementState::ewma(4, 1.0, beta);
            for (int t = 1; t <= 200; ++t) {
                st.observe(ObservationVector{-1, -1, -1, -1});
                const double mass = 1 - std::pow(1 - beta, t);
                for (double a : st.a_hat()) CHECK(a == Approx(mass).epsilon(1e-12));
            }
        }
    }
    SUBCASE("matches the explicit geometric sum") {
        std::mt19937_64 gen(9);
        const double beta = 0.07, alpha = 0.8;
        const std::size_t n = 6;
        auto st = AgreementState::ewma(n, alpha, beta);
        std::vector<ObservationVector> rows;
        for (int t = 0; t < 300; ++t) {
            rows.push_back(random_row(gen, n, alpha));
            st = stream_update_ewma(st, rows.back());
        }
        const long long T = static_cast<long long>(rows.size());
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (long long k = 0; k < T; ++k) {
                int c = 0;
                for (std::size_t j = 0; j < n; ++j) {
                    if (j != i && rows[k][i] * rows[k][j] == 1) ++c;
                }
                s += beta * std::pow(1 - beta, static_cast<double>(T - 1 - k)) * c /
                     ((n - 1) * alpha * alpha);
            }
            CHECK(st.a_hat()[i] == Approx(s).epsilon(1e-11));
        }
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(AgreementState::ewma(4, 1.0, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(AgreementState::ewma(4, 1.0, 1.5), std::invalid_argument);
        CHECK_THROWS_AS(AgreementState::uniform(2, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(AgreementState::uniform(4, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(stream_update(AgreementState::ewma(4, 1.0, 0.1), ObservationVector{1, 1, 1, 1}),
                        std::invalid_argument);
    }
}

TEST_CASE("state checkpoint round-trips exactly") {
    std::mt19937_64 gen(4);
    for (auto st : {AgreementState::uniform(7, 0.7), AgreementState::ewma(7, 0.7, 0.013)}) {
        for (int t = 0; t < 97; ++t) st.observe(random_row(gen, 7, 0.7));
        CHECK(AgreementState::from_record(st.to_record()) == st);
        CHECK(AgreementState::deserialize(st.serialize()) == st);

        // Continuing from a restored checkpoint is indistinguishable.
        auto restored = AgreementState::deserialize(st.serialize());
        for (int t = 0; t < 20; ++t) {
            const auto x = random_row(gen, 7, 0.7);
            st.observe(x);
            restored.observe(x);
        }
        CHECK(restored == st);
    }
    CHECK_THROWS(AgreementState::deserialize("1 0 0"));
    CHECK_THROWS(AgreementState::deserialize("not a record"));
}

TEST_CASE("estimate_error_probs") {
    SUBCASE("unanimous crowd is estimated perfect") {
        auto st = AgreementState::uniform(6, 1.0);
        for (int k = 0; k < 10; ++k) st.observe(ObservationVector{1, 1, 1, 1, 1, 1});
        const auto est = estimate_error_probs(st, 1e-12);
        CHECK(est.unique);
        for (double p : est.p) CHECK(p == Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("all-zero rates fall back to 1/2, deterministically") {
        const std::vector<double> u(5, 0.0);
        CHECK(oracle::residual(u, 0.0) > 0);
        const auto e1 = estimate_from_agreement(u, 1e-12);
        const auto e2 = estimate_from_agreement(u, 1e-12);
        CHECK_FALSE(e1.unique);
        for (double p : e1.p) CHECK(p == 0.5);
        CHECK(e1.p == e2.p);
    }
    SUBCASE("fallback applies on any non-unique input") {
        std::mt19937_64 gen(2);
        std::uniform_real_distribution<double> d(0.0, 1.0);
        int fallbacks = 0;
        for (int k = 0; k < 500; ++k) {
            std::vector<double> u(3 + k % 10);
            for (auto& x : u) x = d(gen);
            const auto e = estimate_from_agreement(u, 1e-10);
            if (!has_unique_fixed_point(u)) {
                ++fallbacks;
                CHECK_FALSE(e.unique);
                for (double p : e.p) CHECK(p == 0.5);
            } else {
                for (double p : e.p) CHECK((p >= 0.0 && p <= 1.0));
            }
        }
        CHECK(fallbacks > 0);
    }
    SUBCASE("requires at least one task") {
        CHECK_THROWS_AS(estimate_error_probs(AgreementState::uniform(4, 1.0), 1e-6),
                        std::invalid_argument);
    }
    SUBCASE("consistency on a large stream") {
        const std::vector<double> p{0.05, 0.1, 0.2, 0.3, 0.45, 0.15, 0.25, 0.35};
        Rng rng(5);
        auto st = AgreementState::uniform(p.size(), 0.9);
        for (int t = 0; t < 200000; ++t) st.observe(draw_task(p, 0.9, rng).labels);
        const auto est = estimate_error_probs(st, 1e-12);
        REQUIRE(est.unique);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(est.p[i] - p[i]) < 0.02);
    }
}

TEST_CASE("solver tolerance and beta heuristic") {
    CHECK(solver_tolerance(1, 10) == Approx(std::sqrt(std::log(10.0))));
    CHECK(solver_tolerance(400, 10) == Approx(std::sqrt(std::log(10.0) / 400)));
    CHECK(solver_tolerance(1LL << 62, 3) >= 1e-12);
    CHECK(solver_tolerance(1LL << 62, 3) < 1e-8);

    const double l = std::log(10.0);
    CHECK(beta_heuristic(0.01, 1.0, 10) == Approx(std::pow(0.01, 2.0 / 3.0) / (l * l * l)));
    CHECK(beta_heuristic(0.01, 1.0, 10) == Approx(0.0038).epsilon(0.01));
    CHECK(beta_heuristic(0.0, 1.0, 10) == kBetaMin);
    CHECK(beta_heuristic(100.0, 1.0, 3) == kBetaMax);
}
