#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "pnreg/bounds.hpp"
#include "pnreg/numkern.hpp"

using namespace pnreg;
using namespace pnreg::bounds;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("covering_subnetwork matches the displayed formula", "[bounds]") {
    double L = 3, w = 2, d = 1, delta = 0.1;
    double expect = w * w * L * std::log(std::pow(2.0, L + 1) * std::pow(w, L - 1) / delta + 1.0) +
                    w * L * std::log(std::pow(2.0, L - 1) * std::pow(w, (L - 1) / 2.0) *
                                         std::sqrt(d) / delta +
                                     1.0);
    REQUIRE(covering_subnetwork(L, w, d, delta) == Catch::Approx(expect).epsilon(1e-14));
}

TEST_CASE("covering_subnetwork is monotone in delta and ~w^2 in leading order", "[bounds]") {
    double prev = covering_subnetwork(4, 3, 2, 0.5);
    for (double delta = 0.25; delta > 1e-9; delta *= 0.5) {
        double cur = covering_subnetwork(4, 3, 2, delta);
        REQUIRE(cur > prev);
        prev = cur;
    }
    double r = covering_subnetwork(5, 8, 1, 1e-12) / covering_subnetwork(5, 4, 1, 1e-12);
    REQUIRE(r == Catch::Approx(4.0).epsilon(0.15));
    REQUIRE_THROWS_AS(covering_subnetwork(3, 2, 1, 0.0), std::domain_error);
    REQUIRE_THROWS_AS(covering_subnetwork(3, 2, 1, 1.0), std::domain_error);
    REQUIRE_THROWS_AS(covering_subnetwork(0, 2, 1, 0.1), std::domain_error);
}

TEST_CASE("covering_lp_combination plug-in and vacuous regime", "[bounds]") {
    double e = std::exp(1.0);
    REQUIRE(covering_lp_combination(1, 1, 0.5, 1.0 / e) == Catch::Approx(e).epsilon(1e-12));
    REQUIRE(covering_lp_combination(1, 1, 0.5, 1.0) == 0.0);
    REQUIRE(covering_lp_combination(1, 1, 0.5, 2.0) == 0.0);
    REQUIRE(covering_lp_combination(2, 1, 0.5, 0.1) >
            covering_lp_combination(1, 1, 0.5, 0.1));
    REQUIRE(covering_lp_combination(1, 2, 0.5, 0.1) >
            covering_lp_combination(1, 1, 0.5, 0.1));
    // delta-exponent p/(1-p) -> 0 as p -> 0: after dividing out the log
    // factor, the bound is nearly delta-insensitive
    double a = covering_lp_combination(1, 1, 1e-4, 0.1) / std::log(10.0);
    double b = covering_lp_combination(1, 1, 1e-4, 0.01) / std::log(100.0);
    REQUIRE(b / a < 1.01);
    REQUIRE_THROWS_AS(covering_lp_combination(1, 1, 1.0, 0.1), std::domain_error);
    REQUIRE_THROWS_AS(covering_lp_combination(1, 1, 0.0, 0.1), std::domain_error);
}

TEST_CASE("covering_pnn plug-in value and limits", "[bounds]") {
    double w = 8, L = 4, d = 1, P = 2, delta = 0.01;
    double r = 1.0 - 2.0 / L;  // 1/2
    double expect = std::pow(w, 2.0 + 2.0 / r) * L * L * std::sqrt(d) * std::pow(P, 1.0 / r) *
                    std::pow(delta, -(2.0 / L) / r) * std::log(w * P / delta);
    REQUIRE(covering_pnn(w, L, d, P, delta) == Catch::Approx(expect).epsilon(1e-14));
    // delta exponent (2/L)/(1-2/L) -> 0 for large L
    double big = covering_pnn(4, 1e6, 1, 1, 1e-3) / covering_pnn(4, 1e6, 1, 1, 1e-6);
    REQUIRE(big == Catch::Approx(std::log(4e3) / std::log(4e6)).epsilon(1e-3));
    REQUIRE_THROWS_AS(covering_pnn(4, 2.5, 1, 1, 0.1), std::domain_error);
}

TEST_CASE("mse_rate_exponent exact rationals and minimax limit", "[bounds]") {
    REQUIRE(mse_rate_exponent({2, 1, 1, 3}) == Catch::Approx(4.0 / 13.0).epsilon(1e-15));
    REQUIRE(mse_rate_exponent({2, 1, 1, kInf}) == Catch::Approx(0.8).epsilon(1e-15));
    // convergence gap is 6.4/(L(5 - 2/L)) ~ 1.28/L: about 2.56e-3 at L=500,
    // first under 1e-3 at L=1281
    REQUIRE(std::fabs(mse_rate_exponent({2, 1, 1, 500}) - 0.8) ==
            Catch::Approx(2.562e-3).epsilon(1e-3));
    REQUIRE(std::fabs(mse_rate_exponent({2, 1, 1, 1281}) - 0.8) < 1e-3);
    REQUIRE(std::fabs(mse_rate_exponent({2, 1, 1, 1280}) - 0.8) >= 1e-3);
    REQUIRE(mse_rate_limit(2, 1) == Catch::Approx(0.8).epsilon(1e-15));
    // BV corollary form (2m+2)(1-2/L)/(2m+3-2/L) at alpha=m+1, d=p=1
    for (int m : {1, 2, 3}) {
        for (double L : {3.0, 7.0, 20.0}) {
            double expect = (2.0 * m + 2.0) * (1.0 - 2.0 / L) / (2.0 * m + 3.0 - 2.0 / L);
            REQUIRE(mse_rate_exponent(bv_params(m, L)) == Catch::Approx(expect).epsilon(1e-14));
        }
    }
}

TEST_CASE("mse_rate_exponent is monotone increasing in depth", "[bounds]") {
    double prev = 0.0;
    for (int L = 3; L <= 50; ++L) {
        double e = mse_rate_exponent({2, 1, 1, static_cast<double>(L)});
        REQUIRE(e > prev);
        prev = e;
    }
    REQUIRE(prev < 0.8);
    REQUIRE_THROWS_AS(mse_rate_exponent({2, 1, 1, 2.5}), std::domain_error);
    REQUIRE_THROWS_AS(mse_rate_exponent({1.2, 1, 2, 5}), std::domain_error);  // alpha - d/p < 1
}

TEST_CASE("mse_bound_extended plug-in and behavior", "[bounds]") {
    RateParams rp{2, 1, 1, 6};
    double w = 8, n = 1024;
    double s = 4.0;
    double expo = s / (s + 1.0 - 2.0 / 6.0);
    double core = std::pow(w, 4.0 - 4.0 / 6.0) * std::pow(6.0, 2.0 - 4.0 / 6.0) /
                  std::pow(n, 1.0 - 2.0 / 6.0);
    REQUIRE(mse_bound_extended(rp, w, n) ==
            Catch::Approx(std::pow(core, expo) + std::exp(-6.0)).epsilon(1e-14));
    REQUIRE(mse_bound_extended(rp, w, 2048) < mse_bound_extended(rp, w, 1024));
    RateParams deep{2, 1, 1, 14};
    REQUIRE(std::exp(-deep.L) < 1e-6);
    REQUIRE_THROWS_AS(mse_bound_extended(rp, 0.5, 100), std::domain_error);
}

TEST_CASE("minimax reference exponents", "[bounds]") {
    REQUIRE(linear_minimax_exponent(0) == Catch::Approx(0.5).epsilon(1e-15));
    REQUIRE(linear_minimax_exponent(1) == Catch::Approx(0.75).epsilon(1e-15));
    for (int m = 0; m <= 5; ++m) {
        REQUIRE(linear_minimax_exponent(m) < minimax_exponent(m));
        REQUIRE(minimax_exponent(m) ==
                Catch::Approx(mse_rate_limit(m + 1.0, 1.0)).epsilon(1e-15));
    }
    REQUIRE_THROWS_AS(linear_minimax_exponent(-1), std::domain_error);
}

TEST_CASE("deep nets cross the linear-estimator exponent at a finite depth", "[bounds]") {
    for (int m = 1; m <= 5; ++m) {
        double lin = linear_minimax_exponent(m);
        int Lx = crossover_level(m + 1.0, 1.0, 1.0, lin);
        REQUIRE(Lx >= 3);
        REQUIRE(mse_rate_exponent(bv_params(m, Lx)) > lin);
        if (Lx > 3) REQUIRE(mse_rate_exponent(bv_params(m, Lx - 1.0)) <= lin);
        for (double L = Lx; L <= 40; ++L)
            REQUIRE(mse_rate_exponent(bv_params(m, L)) > lin);
        REQUIRE(mse_rate_limit(m + 1.0, 1.0) > lin);
    }
    // a target at or above the limit has no finite crossover
    REQUIRE_THROWS_AS(crossover_level(2, 1, 1, 0.8), std::domain_error);
}

TEST_CASE("lp quasi-norm comparison inequality with tightness at equal magnitudes", "[bounds]") {
    Rng rng(17);
    std::vector<std::pair<double, double>> pairs{{0.2, 1.0}, {0.5, 1.0}, {0.3, 0.7},
                                                 {0.1, 0.5}, {0.66, 0.9}};
    for (int rep = 0; rep < 100; ++rep) {
        std::size_t n = 1 + static_cast<std::size_t>(rng.next_u64() % 12);
        Vector a(n);
        for (double& v : a) v = 2.0 * rng.next_double() - 1.0;
        for (auto [pp, p] : pairs) {
            double lhs = lp_norm_p(a, pp);
            double rhs = std::pow(static_cast<double>(n), 1.0 - pp / p) *
                         std::pow(lp_norm_p(a, p), pp / p);
            REQUIRE(lhs <= rhs * (1.0 + 1e-12));
        }
    }
    // equality for constant-magnitude vectors
    Vector c{0.3, -0.3, 0.3, 0.3, -0.3};
    for (auto [pp, p] : pairs) {
        double lhs = lp_norm_p(c, pp);
        double rhs = std::pow(5.0, 1.0 - pp / p) * std::pow(lp_norm_p(c, p), pp / p);
        REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-12));
    }
}
