#pragma once

// Experiment harness: synthetic regression problems on a fixed uniform design,
// Monte-Carlo MSE against the truth, the refitting degree-of-freedom
// estimator, and a sweep driver that produces per-repeat and aggregated CSV
// tables. Fitters are passed in as callables; the method constructors at the
// bottom wrap the estimators of this library with their tuning conventions.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pnreg/fit.hpp"
#include "pnreg/numkern.hpp"
#include "pnreg/pnn.hpp"
#include "pnreg/smooth_spline.hpp"
#include "pnreg/splinenet.hpp"
#include "pnreg/trend_filter.hpp"
#include "pnreg/truncpow.hpp"
#include "pnreg/wavelet.hpp"

namespace pnreg::harness {

struct RegressionProblem {
    std::string name;
    Vector x_grid;                        // sorted, strictly increasing
    std::function<double(double)> truth;  // f0
    double sigma = 0.0;
    std::uint64_t seed = 1;

    std::size_t n() const { return x_grid.size(); }

    Vector truth_values() const {
        Vector f(x_grid.size());
        for (std::size_t i = 0; i < x_grid.size(); ++i) f[i] = truth(x_grid[i]);
        return f;
    }

    // Observation vector for one repeat: f0(x) plus fresh gaussian noise from
    // the repeat's derived stream. Deterministic in (seed, repeat).
    Vector sample(std::uint64_t repeat) const {
        Vector y = truth_values();
        Rng rng = rng_derive(seed, repeat);
        for (double& v : y) v += sigma * rng.next_gaussian();
        return y;
    }
};

namespace detail {

inline void validate_problem(const RegressionProblem& p, const char* where) {
    if (p.x_grid.size() < 2) throw std::invalid_argument(std::string(where) + ": need n >= 2");
    if (!p.truth) throw std::invalid_argument(std::string(where) + ": missing truth function");
    if (!(p.sigma >= 0.0)) throw std::invalid_argument(std::string(where) + ": sigma must be >= 0");
    for (std::size_t i = 0; i + 1 < p.x_grid.size(); ++i)
        if (!(p.x_grid[i] < p.x_grid[i + 1]))
            throw std::invalid_argument(std::string(where) + ": x_grid must be strictly increasing");
}

inline Vector uniform01_grid(std::size_t n) {
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    return x;
}

}  // namespace detail

// Doppler target: sin(4 / (x + 0.01)) + 1.5 on [0, 1], noise sd 0.4.
inline RegressionProblem gen_doppler(std::size_t n = 1000, double sigma = 0.4,
                                     std::uint64_t seed = 1) {
    if (n < 2) throw std::invalid_argument("gen_doppler: need n >= 2");
    RegressionProblem p;
    p.name = "doppler";
    p.x_grid = detail::uniform01_grid(n);
    p.truth = [](double x) { return std::sin(4.0 / (x + 0.01)) + 1.5; };
    p.sigma = sigma;
    p.seed = seed;
    return p;
}

// "vary" target: four hat functions of shrinking frequency followed by four
// cubic B-spline bumps of growing width; supports tile [0, 1]. Noise sd 0.1.
inline RegressionProblem gen_vary(std::size_t n = 1000, double sigma = 0.1,
                                  std::uint64_t seed = 1) {
    if (n < 2) throw std::invalid_argument("gen_vary: need n >= 2");
    RegressionProblem p;
    p.name = "vary";
    p.x_grid = detail::uniform01_grid(n);
    p.truth = [](double x) {
        static const struct {
            int m;
            double shift, width;
        } terms[] = {{1, 0.0, 0.01},  {1, 0.02, 0.02}, {1, 0.06, 0.03}, {1, 0.12, 0.04},
                     {3, 0.2, 0.02},  {3, 0.28, 0.04}, {3, 0.44, 0.06}, {3, 0.68, 0.08}};
        double f = 0.0;
        for (const auto& t : terms) f += splinenet::bspline_eval(t.m, (x - t.shift) / t.width);
        return f;
    };
    p.sigma = sigma;
    p.seed = seed;
    return p;
}

// Piecewise polynomial on [0, 1]: breaks are the interior breakpoints, and
// segment_coeffs[s][k] multiplies (x - left_edge_s)^k on segment s.
inline RegressionProblem gen_piecewise_poly(std::size_t n, const Vector& breaks,
                                            const std::vector<Vector>& segment_coeffs,
                                            double sigma, std::uint64_t seed = 1) {
    if (n < 2) throw std::invalid_argument("gen_piecewise_poly: need n >= 2");
    if (segment_coeffs.size() != breaks.size() + 1)
        throw std::invalid_argument("gen_piecewise_poly: need one coefficient set per segment");
    for (std::size_t i = 0; i < breaks.size(); ++i) {
        if (!(breaks[i] > 0.0 && breaks[i] < 1.0))
            throw std::invalid_argument("gen_piecewise_poly: breaks must lie in (0, 1)");
        if (i > 0 && !(breaks[i] > breaks[i - 1]))
            throw std::invalid_argument("gen_piecewise_poly: breaks must be strictly increasing");
    }
    for (const auto& c : segment_coeffs)
        if (c.empty()) throw std::invalid_argument("gen_piecewise_poly: empty coefficient set");

    RegressionProblem p;
    p.name = "piecewise_poly";
    p.x_grid = detail::uniform01_grid(n);
    p.truth = [breaks, segment_coeffs](double x) {
        std::size_t s = 0;
        while (s < breaks.size() && x >= breaks[s]) ++s;
        double left = (s == 0) ? 0.0 : breaks[s - 1];
        double t = x - left, tp = 1.0, f = 0.0;
        for (double c : segment_coeffs[s]) {
            f += c * tp;
            tp *= t;
        }
        return f;
    };
    p.sigma = sigma;
    p.seed = seed;
    return p;
}

inline double mse_vs_truth(const Vector& yhat, const RegressionProblem& p) {
    detail::validate_problem(p, "mse_vs_truth");
    if (yhat.size() != p.n()) throw std::invalid_argument("mse_vs_truth: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < yhat.size(); ++i) {
        double d = yhat[i] - p.truth(p.x_grid[i]);
        s += d * d;
    }
    return s / static_cast<double>(yhat.size());
}

// Refitting degree-of-freedom estimator:
//
//   2 sigma^2 df ~= avg_r[ ||y0 - yhat_r||^2 - ||y_r - yhat_r||^2
//                           + ||y_r - mean(y0)||^2 ] - ||y0 - mean(y0)||^2,
//
// squared norms summed over the n design points, each repeat refitting on
// fresh noise. Exactly zero for the predictor that always answers mean(y0),
// and invariant to shifting truth and fits by a common constant.
inline double dof_estimate(const std::function<Vector(const Vector& y, std::uint64_t seed)>& fitter,
                           const RegressionProblem& problem, std::size_t repeats) {
    detail::validate_problem(problem, "dof_estimate");
    if (!fitter) throw std::invalid_argument("dof_estimate: missing fitter");
    if (repeats < 2) throw std::invalid_argument("dof_estimate: need repeats >= 2");
    if (problem.sigma == 0.0)
        throw std::invalid_argument("dof_estimate: undefined for noiseless problems");

    const std::size_t n = problem.n();
    const Vector y0 = problem.truth_values();
    double y0_mean = 0.0;
    for (double v : y0) y0_mean += v;
    y0_mean /= static_cast<double>(n);
    double ss_y0 = 0.0;
    for (double v : y0) ss_y0 += (v - y0_mean) * (v - y0_mean);

    double acc = 0.0;
    for (std::size_t r = 0; r < repeats; ++r) {
        Vector y = problem.sample(r);
        Vector yhat = fitter(y, rng_derive(problem.seed, (1ull << 32) + r).next_u64());
        if (yhat.size() != n) throw std::invalid_argument("dof_estimate: fitter length mismatch");
        double s1 = 0.0, s2 = 0.0, s3 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s1 += (y0[i] - yhat[i]) * (y0[i] - yhat[i]);
            s2 += (y[i] - yhat[i]) * (y[i] - yhat[i]);
            s3 += (y[i] - y0_mean) * (y[i] - y0_mean);
        }
        acc += s1 - s2 + s3;
    }
    acc = acc / static_cast<double>(repeats) - ss_y0;
    return acc / (2.0 * problem.sigma * problem.sigma);
}

// One estimator plus its tuning grid. The callable sees the observations, the
// problem (for the design grid), one grid value, and a derived seed.
struct MethodSpec {
    std::string name;
    std::vector<double> tuning;
    std::function<FitResult(const Vector& y, const RegressionProblem& p, double tuning,
                            std::uint64_t seed)>
        fit;
};

struct ExperimentConfig {
    RegressionProblem problem;
    std::vector<MethodSpec> methods;
    std::size_t repeats = 10;
    std::uint64_t seed = 0;  // drives fitter stochasticity; data comes from problem.seed
    std::size_t threads = 1;
};

struct ExperimentRow {
    std::string method;
    double tuning = 0.0;
    std::size_t repeat = 0;
    double mse = 0.0;
    double dof = 0.0;
    double active = 0.0;
    std::uint64_t seed = 0;
};

struct ExperimentAggregate {
    std::string method;
    double tuning = 0.0;
    double mse_mean = 0.0;
    double mse_lo = 0.0;  // Wald 95% band: mean -+ 1.96 sd / sqrt(repeats)
    double mse_hi = 0.0;
    double dof_mean = 0.0;
};

inline constexpr const char* kExperimentRowCsvHeader = "method,tuning,repeat,mse,dof,active,seed";
inline constexpr const char* kExperimentAggCsvHeader =
    "method,tuning,mse_mean,mse_lo,mse_hi,dof_mean";

struct ExperimentResult {
    std::vector<ExperimentRow> rows;
    std::vector<ExperimentAggregate> aggregates;

    std::string rows_csv() const {
        std::string out = kExperimentRowCsvHeader;
        out += '\n';
        char buf[256];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), ",%.17g,%zu,%.17g,%.17g,%.17g,%llu\n", r.tuning,
                          r.repeat, r.mse, r.dof, r.active,
                          static_cast<unsigned long long>(r.seed));
            out += r.method;
            out += buf;
        }
        return out;
    }

    std::string aggregates_csv() const {
        std::string out = kExperimentAggCsvHeader;
        out += '\n';
        char buf[256];
        for (const auto& a : aggregates) {
            std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,%.17g,%.17g,%.17g\n", a.tuning,
                          a.mse_mean, a.mse_lo, a.mse_hi, a.dof_mean);
            out += a.method;
            out += buf;
        }
        return out;
    }
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    detail::validate_problem(cfg.problem, "run_experiment");
    if (cfg.repeats == 0) throw std::invalid_argument("run_experiment: need repeats >= 1");
    if (cfg.methods.empty()) throw std::invalid_argument("run_experiment: no methods");
    for (const auto& m : cfg.methods) {
        if (!m.fit)
            throw std::invalid_argument("run_experiment: method '" + m.name + "' has no fitter");
        if (m.tuning.empty())
            throw std::invalid_argument("run_experiment: method '" + m.name +
                                        "' has an empty tuning grid");
        if (m.name.empty() || m.name.find_first_of(",\n") != std::string::npos)
            throw std::invalid_argument("run_experiment: invalid method name");
    }

    // One observation vector per repeat, shared by every method and tuning
    // value so comparisons are paired.
    std::vector<Vector> ys(cfg.repeats);
    for (std::size_t r = 0; r < cfg.repeats; ++r) ys[r] = cfg.problem.sample(r);

    struct Cell {
        std::size_t method, grid, repeat;
    };
    std::vector<Cell> cells;
    for (std::size_t m = 0; m < cfg.methods.size(); ++m)
        for (std::size_t g = 0; g < cfg.methods[m].tuning.size(); ++g)
            for (std::size_t r = 0; r < cfg.repeats; ++r) cells.push_back({m, g, r});

    ExperimentResult result;
    result.rows.resize(cells.size());
    auto run_cell = [&](std::size_t c) {
        const Cell& cell = cells[c];
        const MethodSpec& method = cfg.methods[cell.method];
        std::uint64_t fit_seed = rng_derive(cfg.seed, c).next_u64();
        FitResult fit = method.fit(ys[cell.repeat], cfg.problem, method.tuning[cell.grid], fit_seed);
        ExperimentRow& row = result.rows[c];
        row.method = method.name;
        row.tuning = method.tuning[cell.grid];
        row.repeat = cell.repeat;
        row.mse = mse_vs_truth(fit.yhat, cfg.problem);
        row.dof = fit.dof_hat;
        row.active = fit.active;
        row.seed = fit_seed;
    };

    std::size_t threads = std::max<std::size_t>(1, cfg.threads);
    if (threads == 1) {
        for (std::size_t c = 0; c < cells.size(); ++c) run_cell(c);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t c = t; c < cells.size(); c += threads) run_cell(c);
            });
        for (auto& th : pool) th.join();
    }

    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
        for (std::size_t g = 0; g < cfg.methods[m].tuning.size(); ++g) {
            ExperimentAggregate agg;
            agg.method = cfg.methods[m].name;
            agg.tuning = cfg.methods[m].tuning[g];
            double mean = 0.0, dof = 0.0;
            std::vector<double> mses;
            for (std::size_t c = 0; c < cells.size(); ++c) {
                if (cells[c].method != m || cells[c].grid != g) continue;
                mses.push_back(result.rows[c].mse);
                mean += result.rows[c].mse;
                dof += result.rows[c].dof;
            }
            mean /= static_cast<double>(mses.size());
            dof /= static_cast<double>(mses.size());
            double sd = 0.0;
            if (mses.size() > 1) {
                for (double v : mses) sd += (v - mean) * (v - mean);
                sd = std::sqrt(sd / static_cast<double>(mses.size() - 1));
            }
            double half = 1.96 * sd / std::sqrt(static_cast<double>(mses.size()));
            agg.mse_mean = mean;
            agg.mse_lo = mean - half;
            agg.mse_hi = mean + half;
            agg.dof_mean = dof;
            result.aggregates.push_back(agg);
        }
    }
    return result;
}

// Isotonic least squares by pool-adjacent-violators; used to denoise reported
// dof-vs-lambda curves, never inside a fitting procedure.
inline Vector isotonic_fit(const Vector& y, bool increasing = true) {
    if (y.empty()) return {};
    struct Block {
        double sum;
        std::size_t count;
    };
    const double sign = increasing ? 1.0 : -1.0;
    std::vector<Block> blocks;
    blocks.reserve(y.size());
    for (double v : y) {
        blocks.push_back({sign * v, 1});
        while (blocks.size() > 1) {
            const Block& a = blocks[blocks.size() - 2];
            const Block& b = blocks.back();
            if (a.sum * static_cast<double>(b.count) <= b.sum * static_cast<double>(a.count))
                break;
            Block merged{a.sum + b.sum, a.count + b.count};
            blocks.pop_back();
            blocks.back() = merged;
        }
    }
    Vector out;
    out.reserve(y.size());
    for (const Block& b : blocks) {
        double v = sign * b.sum / static_cast<double>(b.count);
        out.insert(out.end(), b.count, v);
    }
    return out;
}

// ---- method constructors -------------------------------------------------

inline MethodSpec make_tf_method(std::vector<double> lambdas, int order = 3) {
    MethodSpec m;
    m.name = "tf";
    m.tuning = std::move(lambdas);
    m.fit = [order](const Vector& y, const RegressionProblem&, double lambda, std::uint64_t) {
        baselines::TrendFilterSpec spec;
        spec.m = order;
        spec.lambda = lambda;
        return baselines::trend_filter(y, spec);
    };
    return m;
}

inline MethodSpec make_ss_method(std::vector<double> lambdas) {
    MethodSpec m;
    m.name = "ss";
    m.tuning = std::move(lambdas);
    m.fit = [](const Vector& y, const RegressionProblem& p, double lambda, std::uint64_t) {
        return baselines::smoothing_spline(y, p.x_grid, lambda);
    };
    return m;
}

// Periodic sym4 denoising needs a power-of-two length; other lengths are
// reflected at the right edge up to the next power of two, denoised, and cut
// back. The dof/active counts then refer to the padded transform.
inline MethodSpec make_sym4_method(std::vector<double> thresholds, int depth = -1) {
    MethodSpec m;
    m.name = "sym4";
    m.tuning = std::move(thresholds);
    m.fit = [depth](const Vector& y, const RegressionProblem&, double thr, std::uint64_t) {
        std::size_t n = y.size(), N = 1;
        while (N < n) N *= 2;
        if (N == n) return baselines::wavelet_denoise(y, thr, depth);
        if (N - n > n - 1)
            throw std::invalid_argument("sym4 method: length too far from a power of two");
        Vector padded(y);
        padded.resize(N);
        for (std::size_t i = n; i < N; ++i) padded[i] = y[2 * n - 2 - i];
        FitResult fit = baselines::wavelet_denoise(padded, thr, depth);
        fit.yhat.resize(n);
        return fit;
    };
    return m;
}

inline MethodSpec make_truncpow_method(std::vector<double> lambdas, int order, std::size_t units,
                                       baselines::TruncPowConfig cfg = {}) {
    MethodSpec m;
    m.name = "truncpow";
    m.tuning = std::move(lambdas);
    m.fit = [order, units, cfg](const Vector& y, const RegressionProblem& p, double lambda,
                                std::uint64_t seed) {
        baselines::TruncPowConfig c = cfg;
        c.seed = seed;
        return baselines::fit_two_layer_truncpow(y, p.x_grid, order, lambda, units, c).fit;
    };
    return m;
}

struct PnnMethodConfig {
    std::size_t M = 200;
    std::size_t w = 10;
    std::size_t L = 10;
    pnn::TrainConfig train;  // weight_decay is overwritten by the grid value
};

inline MethodSpec make_pnn_method(std::vector<double> lambdas, PnnMethodConfig cfg = {}) {
    MethodSpec m;
    m.name = "pnn";
    m.tuning = std::move(lambdas);
    m.fit = [cfg](const Vector& y, const RegressionProblem& p, double lambda, std::uint64_t seed) {
        Matrix X(p.n(), 1);
        for (std::size_t i = 0; i < p.n(); ++i) X(i, 0) = p.x_grid[i];
        pnn::ParallelNet net = pnn::make_parallel_net(cfg.M, 1, cfg.w, cfg.L);
        Rng rng(seed);
        pnn::init_he(net, rng);
        pnn::TrainConfig tc = cfg.train;
        tc.weight_decay = lambda;
        pnn::train(net, X, y, tc);
        FitResult fit;
        fit.yhat = pnn::predict_batch(net, X);
        fit.tuning = lambda;
        fit.dof_hat = std::numeric_limits<double>::quiet_NaN();
        fit.active = std::numeric_limits<double>::quiet_NaN();
        fit.method = "pnn";
        return fit;
    };
    return m;
}

}  // namespace pnreg::harness
