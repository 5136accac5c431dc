#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "pnreg/harness.hpp"
#include "pnreg/numkern.hpp"
#include "pnreg/splinenet.hpp"

using namespace pnreg;
using namespace pnreg::harness;

namespace {

RegressionProblem constant_problem(std::size_t n, double level, double sigma,
                                   std::uint64_t seed) {
    RegressionProblem p;
    p.name = "constant";
    p.x_grid.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.x_grid[i] = double(i) / double(n - 1);
    p.truth = [level](double) { return level; };
    p.sigma = sigma;
    p.seed = seed;
    return p;
}

}  // namespace

TEST_CASE("doppler generator matches its formula") {
    auto p = gen_doppler();
    REQUIRE(p.n() == 1000);
    REQUIRE(p.sigma == 0.4);
    REQUIRE(p.x_grid.front() == 0.0);
    REQUIRE(p.x_grid.back() == 1.0);

    double x_zero = 4.0 / (2.0 * 3.14159265358979323846) - 0.01;
    REQUIRE(p.truth(x_zero) == Catch::Approx(1.5).margin(1e-12));
    for (double x : p.x_grid) {
        double f = p.truth(x);
        REQUIRE(f >= 0.5);
        REQUIRE(f <= 2.5);
    }
    REQUIRE_THROWS_AS(gen_doppler(1), std::invalid_argument);
}

TEST_CASE("vary generator matches hand-evaluated anchor points") {
    auto p = gen_vary();
    REQUIRE(p.n() == 1000);
    REQUIRE(p.sigma == 0.1);

    // peak of the first hat: M1(0.01/0.01) = 1, every other support inactive
    REQUIRE(p.truth(0.01) == Catch::Approx(1.0).margin(1e-12));
    // peak of the second hat at x = 0.02 + 0.02
    REQUIRE(p.truth(0.04) == Catch::Approx(1.0).margin(1e-12));
    // seams between supports evaluate to zero
    REQUIRE(p.truth(0.02) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(p.truth(0.2) == Catch::Approx(0.0).margin(1e-12));
    // cardinal cubic values at integer offsets: M3(1) = 1/6, M3(2) = 2/3
    REQUIRE(p.truth(0.24) == Catch::Approx(2.0 / 3.0).margin(1e-12));
    REQUIRE(p.truth(0.5) == Catch::Approx(1.0 / 6.0).margin(1e-12));
    // x = 0.99 lies only in the last bump's support
    double expect = splinenet::bspline_eval(3, (0.99 - 0.68) / 0.08);
    REQUIRE(p.truth(0.99) == Catch::Approx(expect).margin(1e-15));
    REQUIRE(expect > 0.0);
}

TEST_CASE("piecewise polynomial generator evaluates per segment") {
    auto p = gen_piecewise_poly(64, {0.5}, {{1.0, 2.0}, {3.0}}, 0.05);
    REQUIRE(p.truth(0.25) == Catch::Approx(1.5).margin(1e-15));
    REQUIRE(p.truth(0.75) == Catch::Approx(3.0).margin(1e-15));
    REQUIRE(p.truth(0.5) == Catch::Approx(3.0).margin(1e-15));  // breaks open on the left

    REQUIRE_THROWS_AS(gen_piecewise_poly(64, {1.5}, {{1.0}, {2.0}}, 0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(gen_piecewise_poly(64, {0.5}, {{1.0}}, 0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(gen_piecewise_poly(64, {0.6, 0.4}, {{1.0}, {1.0}, {1.0}}, 0.1),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(gen_piecewise_poly(64, {0.5}, {{}, {1.0}}, 0.1), std::invalid_argument);
}

TEST_CASE("sampling is deterministic per repeat and exact when noiseless") {
    auto p = gen_vary(128, 0.1, 42);
    Vector a = p.sample(3), b = p.sample(3), c = p.sample(4);
    REQUIRE(a == b);
    REQUIRE(a != c);

    auto clean = gen_vary(128, 0.0, 42);
    REQUIRE(clean.sample(0) == clean.truth_values());
}

TEST_CASE("mse_vs_truth matches hand values and noise level") {
    auto p = gen_vary(1000, 0.1, 5);
    Vector truth = p.truth_values();
    REQUIRE(mse_vs_truth(truth, p) == 0.0);

    Vector shifted = truth;
    for (double& v : shifted) v += 0.3;
    REQUIRE(mse_vs_truth(shifted, p) == Catch::Approx(0.09).epsilon(1e-12));

    double acc = 0.0;
    const std::size_t reps = 20;
    for (std::size_t r = 0; r < reps; ++r) acc += mse_vs_truth(p.sample(r), p);
    REQUIRE(acc / reps == Catch::Approx(0.01).epsilon(0.10));

    REQUIRE_THROWS_AS(mse_vs_truth(Vector(3, 0.0), p), std::invalid_argument);
}

TEST_CASE("dof estimate is exactly zero for the truth-mean predictor") {
    auto p = gen_vary(256, 0.1, 9);
    Vector y0 = p.truth_values();
    double mean = 0.0;
    for (double v : y0) mean += v;
    mean /= double(y0.size());

    auto zero_predictor = [mean](const Vector& y, std::uint64_t) {
        return Vector(y.size(), mean);
    };
    double df = dof_estimate(zero_predictor, p, 8);
    REQUIRE(std::fabs(df) <= 1e-9);
    REQUIRE(std::fabs(df) <= 0.5);
}

TEST_CASE("dof estimate recovers n for interpolation and 1 for the mean smoother") {
    auto p = constant_problem(256, 0.7, 0.1, 17);

    auto identity = [](const Vector& y, std::uint64_t) { return y; };
    double df_id = dof_estimate(identity, p, 20);
    REQUIRE(df_id == Catch::Approx(256.0).epsilon(0.05));

    auto mean_smoother = [](const Vector& y, std::uint64_t) {
        double m = 0.0;
        for (double v : y) m += v;
        return Vector(y.size(), m / double(y.size()));
    };
    double df_mean = dof_estimate(mean_smoother, p, 20);
    REQUIRE(std::fabs(df_mean - 1.0) <= 0.5);
}

TEST_CASE("dof estimate matches the smoothing-spline trace dof") {
    auto p = constant_problem(256, 0.7, 0.1, 23);
    for (double lambda : {1e-6, 1e-5, 1e-4}) {
        double trace = baselines::smoothing_spline(p.sample(0), p.x_grid, lambda).dof_hat;
        auto fitter = [&p, lambda](const Vector& y, std::uint64_t) {
            return baselines::smoothing_spline(y, p.x_grid, lambda).yhat;
        };
        double df = dof_estimate(fitter, p, 20);
        REQUIRE(df == Catch::Approx(trace).epsilon(0.10));
    }
}

TEST_CASE("dof estimate is invariant to a common shift of truth and fits") {
    auto base = gen_vary(128, 0.1, 31);
    const double shift = 10.0;
    RegressionProblem shifted = base;
    auto inner = base.truth;
    shifted.truth = [inner, shift](double x) { return inner(x) + shift; };

    auto fitter = [](const Vector& y, std::uint64_t) {
        Vector out = y;
        for (std::size_t i = 1; i + 1 < out.size(); ++i)
            out[i] = (y[i - 1] + y[i] + y[i + 1]) / 3.0;
        return out;
    };
    auto fitter_shifted = [fitter, shift](const Vector& y, std::uint64_t s) {
        Vector in = y;
        for (double& v : in) v -= shift;
        Vector out = fitter(in, s);
        for (double& v : out) v += shift;
        return out;
    };

    double a = dof_estimate(fitter, base, 6);
    double b = dof_estimate(fitter_shifted, shifted, 6);
    REQUIRE(a == Catch::Approx(b).margin(1e-9));
}

TEST_CASE("dof estimate rejects bad arguments") {
    auto p = gen_vary(64, 0.1, 1);
    auto identity = [](const Vector& y, std::uint64_t) { return y; };
    REQUIRE_THROWS_AS(dof_estimate(identity, p, 1), std::invalid_argument);
    auto noiseless = gen_vary(64, 0.0, 1);
    REQUIRE_THROWS_AS(dof_estimate(identity, noiseless, 4), std::invalid_argument);
    auto wrong_len = [](const Vector&, std::uint64_t) { return Vector(3, 0.0); };
    REQUIRE_THROWS_AS(dof_estimate(wrong_len, p, 4), std::invalid_argument);
}

TEST_CASE("run_experiment row accounting and CSV schema") {
    ExperimentConfig cfg;
    cfg.problem = gen_vary(64, 0.1, 7);
    cfg.methods = {make_ss_method({1e-5, 1e-3, 1e-1})};
    cfg.repeats = 2;
    cfg.seed = 99;

    auto result = run_experiment(cfg);
    REQUIRE(result.rows.size() == 6);
    REQUIRE(result.aggregates.size() == 3);

    std::string rows = result.rows_csv();
    std::string aggs = result.aggregates_csv();
    REQUIRE(rows.rfind("method,tuning,repeat,mse,dof,active,seed\n", 0) == 0);
    REQUIRE(aggs.rfind("method,tuning,mse_mean,mse_lo,mse_hi,dof_mean\n", 0) == 0);
    for (const auto& row : result.rows) {
        REQUIRE(row.method == "ss");
        REQUIRE(row.mse > 0.0);
        REQUIRE(row.dof >= 2.0);
        REQUIRE(row.repeat < 2);
    }
    for (const auto& agg : result.aggregates) {
        REQUIRE(agg.mse_lo <= agg.mse_mean);
        REQUIRE(agg.mse_mean <= agg.mse_hi);
    }

    // identical config reruns bit-identically
    auto again = run_experiment(cfg);
    REQUIRE(again.rows_csv() == rows);
    REQUIRE(again.aggregates_csv() == aggs);
}

TEST_CASE("run_experiment rejects bad configs") {
    ExperimentConfig cfg;
    cfg.problem = gen_vary(32, 0.1, 7);
    cfg.methods = {make_ss_method({1e-3})};
    cfg.repeats = 0;
    REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);
    cfg.repeats = 2;
    cfg.methods.clear();
    REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);
    cfg.methods = {make_ss_method({})};
    REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);
    cfg.methods = {make_ss_method({1e-3})};
    cfg.methods[0].fit = nullptr;
    REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);
    cfg.methods = {make_ss_method({1e-3})};
    cfg.methods[0].name = "bad,name";
    REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);
}

TEST_CASE("trend-filter dof path is nonincreasing in lambda") {
    ExperimentConfig cfg;
    cfg.problem = gen_vary(128, 0.1, 13);
    cfg.methods = {make_tf_method({1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2})};
    cfg.repeats = 3;
    cfg.seed = 5;

    auto result = run_experiment(cfg);
    REQUIRE(result.aggregates.size() == 7);
    for (std::size_t i = 0; i + 1 < result.aggregates.size(); ++i)
        REQUIRE(result.aggregates[i + 1].dof_mean <= result.aggregates[i].dof_mean + 1.0);
    REQUIRE(result.aggregates.front().dof_mean > result.aggregates.back().dof_mean);
}

TEST_CASE("Wald bands shrink with more repeats") {
    auto echo = []() {
        MethodSpec m;
        m.name = "echo";
        m.tuning = {0.0};
        m.fit = [](const Vector& y, const RegressionProblem&, double, std::uint64_t) {
            FitResult f;
            f.yhat = y;
            f.method = "echo";
            return f;
        };
        return m;
    }();

    auto band = [&](std::size_t reps) {
        ExperimentConfig cfg;
        cfg.problem = gen_vary(256, 0.1, 3);
        cfg.methods = {echo};
        cfg.repeats = reps;
        auto agg = run_experiment(cfg).aggregates.at(0);
        return agg.mse_hi - agg.mse_lo;
    };
    double w4 = band(4), w64 = band(64);
    REQUIRE(w64 > 0.0);
    REQUIRE(w64 < 0.5 * w4);  // expected factor 1/4, generous slack for sd re-estimation
}

TEST_CASE("multithreaded sweeps are bit-identical to single-threaded") {
    ExperimentConfig cfg;
    cfg.problem = gen_vary(96, 0.1, 7);
    cfg.methods = {make_ss_method({1e-4, 1e-2}), make_tf_method({1e-3, 1e-1}, 1)};
    cfg.repeats = 3;
    cfg.seed = 21;

    auto serial = run_experiment(cfg);
    cfg.threads = 3;
    auto parallel = run_experiment(cfg);
    REQUIRE(serial.rows_csv() == parallel.rows_csv());
    REQUIRE(serial.aggregates_csv() == parallel.aggregates_csv());
}

TEST_CASE("sym4 method reflects non-power-of-two lengths") {
    auto p = gen_vary(1000, 0.1, 11);
    Vector y = p.sample(0);
    auto method = make_sym4_method({0.0, 0.37});

    FitResult pass_through = method.fit(y, p, 0.0, 0);
    REQUIRE(pass_through.yhat.size() == 1000);
    for (std::size_t i = 0; i < y.size(); ++i)
        REQUIRE(pass_through.yhat[i] == Catch::Approx(y[i]).margin(1e-10));

    FitResult denoised = method.fit(y, p, 0.37, 0);
    REQUIRE(denoised.yhat.size() == 1000);
    REQUIRE(mse_vs_truth(denoised.yhat, p) < mse_vs_truth(y, p));
    REQUIRE(denoised.active < pass_through.active);
}

TEST_CASE("isotonic regression pools adjacent violators exactly") {
    REQUIRE(isotonic_fit({3.0, 1.0}) == Vector{2.0, 2.0});
    REQUIRE(isotonic_fit({1.0, 3.0, 2.0}) == Vector{1.0, 2.5, 2.5});
    REQUIRE(isotonic_fit({1.0, 2.0, 3.0}) == Vector{1.0, 2.0, 3.0});
    REQUIRE(isotonic_fit({}) == Vector{});

    Rng rng(71);
    Vector y(40);
    for (double& v : y) v = rng.next_gaussian();
    Vector theta = isotonic_fit(y);

    for (std::size_t i = 0; i + 1 < theta.size(); ++i) REQUIRE(theta[i] <= theta[i + 1] + 1e-12);
    REQUIRE(isotonic_fit(theta) == theta);  // idempotent

    double my = 0.0, mt = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        my += y[i];
        mt += theta[i];
    }
    REQUIRE(mt == Catch::Approx(my).margin(1e-9));

    // projection certificate: no monotone candidate improves on theta
    for (int trial = 0; trial < 50; ++trial) {
        Vector v(y.size());
        double acc = -2.0;
        for (double& vi : v) {
            acc += 0.2 * rng.next_double();
            vi = acc;
        }
        double inner = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) inner += (y[i] - theta[i]) * (v[i] - theta[i]);
        REQUIRE(inner <= 1e-9);
    }

    // decreasing mode mirrors increasing mode
    Vector dec = isotonic_fit(y, false);
    Vector yr(y.rbegin(), y.rend());
    Vector incr = isotonic_fit(yr);
    Vector mirrored(incr.rbegin(), incr.rend());
    for (std::size_t i = 0; i < y.size(); ++i)
        REQUIRE(dec[i] == Catch::Approx(mirrored[i]).margin(1e-12));
}
