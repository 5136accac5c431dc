#pragma once

// Two-layer network with truncated-power activation sigma^m(x) = max(x,0)^m:
//
//   f(x) = sum_j v_j sigma^m(w_j x + b_j) + poly(x),   deg(poly) <= m
//
// trained by full-batch Adam on
//
//   (1/n) sum_i (f(x_i) - y_i)^2 + (lambda/2) sum_j (|v_j|^2 + |w_j|^{2m}).
//
// The penalty is minimized over the function-preserving rescalings
// (w, b, v) -> (alpha w, alpha b, v / alpha^m) at |v_j| = |w_j|^m (AM-GM), so
// training interleaves exact rebalancing steps; the reported balance gap
// max_j | |v_j| - |w_j|^m | and the implied total variation sum_j |v_j||w_j|^m
// are diagnostics of that optimality condition. The j-th basis coefficient is
// c_j = v_j |w_j|^m, and the knot count is the number of |c_j| above a
// data-scaled tolerance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pnreg/fit.hpp"
#include "pnreg/numkern.hpp"

namespace pnreg::baselines {

struct TwoLayerTruncPowNet {
    int m = 1;
    Vector w, b, v;  // first-layer weight, bias, second-layer weight per unit
    Vector poly;     // poly[k] multiplies x^k, size m + 1

    double eval(double x) const {
        double s = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            double z = w[j] * x + b[j];
            if (z > 0.0) s += v[j] * std::pow(z, m);
        }
        double xp = 1.0;
        for (double c : poly) {
            s += c * xp;
            xp *= x;
        }
        return s;
    }
};

struct TruncPowConfig {
    std::size_t epochs = 4000;
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 1234;
    std::size_t rebalance_every = 100;
    double knot_tol = 1e-4;  // relative to max(1, ||y||_inf)
};

struct TruncPowFit {
    TwoLayerTruncPowNet net;
    FitResult fit;
    double balance_gap = 0.0;
    double tv = 0.0;
    Vector loss_history;
};

namespace detail {

// A unit active on the whole data range is a degree-m polynomial there; its
// expansion moves to the polynomial part and the unit's output weight is
// cleared. The squared error is unchanged on the range and the penalty drops
// by v^2, so this is a descent step. It also removes the penalty-free offset
// v * b^m that an unpenalized bias can otherwise carry for a dying unit.
inline void truncpow_absorb_affine(TwoLayerTruncPowNet& net, double x_lo, double x_hi) {
    const int m = net.m;
    for (std::size_t j = 0; j < net.w.size(); ++j) {
        if (net.v[j] == 0.0) continue;
        if (!(net.w[j] * x_lo + net.b[j] > 0.0)) continue;
        if (!(net.w[j] * x_hi + net.b[j] > 0.0)) continue;
        double binom = 1.0;
        for (int k = 0; k <= m; ++k) {
            net.poly[k] += net.v[j] * binom * std::pow(net.w[j], k) * std::pow(net.b[j], m - k);
            binom *= static_cast<double>(m - k) / static_cast<double>(k + 1);
        }
        net.v[j] = 0.0;
    }
}

// Mid-training rescalings are clamped: for units dying under the penalty the
// unclamped factor can inflate the (unpenalized) bias by orders of magnitude
// per application, after which the optimizer's fixed-size steps on the
// rescaled second-layer weight swing the function by |b| per step.
inline void truncpow_rebalance(TwoLayerTruncPowNet& net, bool exact) {
    const double mm = static_cast<double>(net.m);
    for (std::size_t j = 0; j < net.w.size(); ++j) {
        double aw = std::fabs(net.w[j]);
        double av = std::fabs(net.v[j]);
        if (av == 0.0) {
            // a cleared unit contributes nothing whatever (w, b) are; the
            // final pass frees its remaining penalty |w|^{2m} as well
            if (exact) {
                net.w[j] = 0.0;
                net.b[j] = 0.0;
            }
            continue;
        }
        if (aw == 0.0) continue;
        double alpha = std::pow(av / std::pow(aw, mm), 1.0 / (2.0 * mm));
        if (!exact) alpha = std::clamp(alpha, 0.1, 10.0);
        net.w[j] *= alpha;
        net.b[j] *= alpha;
        net.v[j] /= std::pow(alpha, mm);
    }
}

inline double truncpow_objective(const TwoLayerTruncPowNet& net, const Vector& x, const Vector& y,
                                 double lambda) {
    double loss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = net.eval(x[i]) - y[i];
        loss += r * r;
    }
    loss /= static_cast<double>(x.size());
    double pen = 0.0;
    for (std::size_t j = 0; j < net.w.size(); ++j)
        pen += net.v[j] * net.v[j] + std::pow(std::fabs(net.w[j]), 2.0 * net.m);
    return loss + 0.5 * lambda * pen;
}

}  // namespace detail

inline TruncPowFit fit_two_layer_truncpow(const Vector& y, const Vector& x_grid, int m,
                                          double lambda, std::size_t M,
                                          const TruncPowConfig& cfg = {}) {
    const std::size_t n = y.size();
    if (n == 0 || x_grid.size() != n)
        throw std::invalid_argument("fit_two_layer_truncpow: length mismatch");
    if (m < 1) throw std::invalid_argument("fit_two_layer_truncpow: m must be >= 1");
    if (M < 1) throw std::invalid_argument("fit_two_layer_truncpow: M must be >= 1");
    if (!(lambda >= 0.0)) throw std::invalid_argument("fit_two_layer_truncpow: lambda must be >= 0");

    double x_lo = x_grid[0], x_hi = x_grid[0], y_scale = 0.0, y_mean = 0.0;
    for (double t : x_grid) {
        x_lo = std::min(x_lo, t);
        x_hi = std::max(x_hi, t);
    }
    for (double t : y) {
        y_scale = std::max(y_scale, std::fabs(t));
        y_mean += t;
    }
    y_mean /= static_cast<double>(n);

    TwoLayerTruncPowNet net;
    net.m = m;
    net.w.assign(M, 0.0);
    net.b.assign(M, 0.0);
    net.v.assign(M, 0.0);
    net.poly.assign(static_cast<std::size_t>(m) + 1, 0.0);
    net.poly[0] = y_mean;

    // Units start as +-1-slope hinges with knots spread over the data range,
    // jittered so no two runs of the grid coincide; small random v lets the
    // gradient pick which hinges matter.
    Rng rng(cfg.seed);
    double span = (x_hi > x_lo) ? x_hi - x_lo : 1.0;
    for (std::size_t j = 0; j < M; ++j) {
        double t = x_lo + span * (static_cast<double>(j) + 0.5 + 0.25 * (rng.next_double() - 0.5)) /
                              static_cast<double>(M);
        double sgn = (j % 2 == 0) ? 1.0 : -1.0;
        net.w[j] = sgn;
        net.b[j] = -sgn * t;
        net.v[j] = 0.01 * rng.next_gaussian();
    }

    const std::size_t P = 3 * M + net.poly.size();
    Vector am(P, 0.0), av(P, 0.0), grad(P, 0.0);
    const double mm = static_cast<double>(m);
    Vector history;
    history.reserve(cfg.epochs);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double x = x_grid[i];
            double f = 0.0;
            for (std::size_t j = 0; j < M; ++j) {
                double z = net.w[j] * x + net.b[j];
                if (z > 0.0) f += net.v[j] * std::pow(z, mm);
            }
            double xp = 1.0;
            for (double c : net.poly) {
                f += c * xp;
                xp *= x;
            }
            double r = f - y[i];
            loss += r * r;
            double s = 2.0 * r / static_cast<double>(n);
            for (std::size_t j = 0; j < M; ++j) {
                double z = net.w[j] * x + net.b[j];
                if (z <= 0.0) continue;
                double zm1 = (m == 1) ? 1.0 : std::pow(z, mm - 1.0);
                grad[j] += s * zm1 * z;  // d f / d v_j = z^m
                double common = s * net.v[j] * mm * zm1;
                grad[M + j] += common * x;
                grad[2 * M + j] += common;
            }
            xp = 1.0;
            for (std::size_t k = 0; k < net.poly.size(); ++k) {
                grad[3 * M + k] += s * xp;
                xp *= x;
            }
        }
        loss /= static_cast<double>(n);
        double pen = 0.0;
        for (std::size_t j = 0; j < M; ++j) {
            grad[j] += lambda * net.v[j];
            grad[M + j] += lambda * mm * std::pow(std::fabs(net.w[j]), 2.0 * mm - 1.0) *
                           ((net.w[j] >= 0.0) ? 1.0 : -1.0);
            pen += net.v[j] * net.v[j] + std::pow(std::fabs(net.w[j]), 2.0 * mm);
        }
        double objective = loss + 0.5 * lambda * pen;
        if (!std::isfinite(objective))
            throw numerical_error("fit_two_layer_truncpow: training diverged at epoch " +
                                  std::to_string(epoch));
        history.push_back(objective);

        double t = static_cast<double>(epoch + 1);
        double bc1 = 1.0 - std::pow(cfg.beta1, t);
        double bc2 = 1.0 - std::pow(cfg.beta2, t);
        auto step = [&](std::size_t idx, double* param) {
            am[idx] = cfg.beta1 * am[idx] + (1.0 - cfg.beta1) * grad[idx];
            av[idx] = cfg.beta2 * av[idx] + (1.0 - cfg.beta2) * grad[idx] * grad[idx];
            *param -= cfg.lr * (am[idx] / bc1) / (std::sqrt(av[idx] / bc2) + cfg.adam_eps);
        };
        for (std::size_t j = 0; j < M; ++j) {
            step(j, &net.v[j]);
            step(M + j, &net.w[j]);
            step(2 * M + j, &net.b[j]);
        }
        for (std::size_t k = 0; k < net.poly.size(); ++k) step(3 * M + k, &net.poly[k]);

        if (lambda > 0.0 && cfg.rebalance_every > 0 && (epoch + 1) % cfg.rebalance_every == 0) {
            detail::truncpow_absorb_affine(net, x_lo, x_hi);
            detail::truncpow_rebalance(net, false);
        }
    }
    if (lambda > 0.0) {
        detail::truncpow_absorb_affine(net, x_lo, x_hi);
        detail::truncpow_rebalance(net, true);
    }

    TruncPowFit out;
    out.net = std::move(net);
    out.loss_history = std::move(history);

    double gap = 0.0, tv = 0.0;
    double tol = cfg.knot_tol * std::max(1.0, y_scale);
    std::size_t knots = 0;
    for (std::size_t j = 0; j < M; ++j) {
        double aw = std::pow(std::fabs(out.net.w[j]), mm);
        double av_ = std::fabs(out.net.v[j]);
        gap = std::max(gap, std::fabs(av_ - aw));
        double c = av_ * aw;
        tv += c;
        if (c > tol) ++knots;
    }
    out.balance_gap = gap;
    out.tv = tv;

    out.fit.yhat.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) out.fit.yhat[i] = out.net.eval(x_grid[i]);
    out.fit.tuning = lambda;
    out.fit.dof_hat = static_cast<double>(knots);
    out.fit.active = static_cast<double>(knots);
    out.fit.method = "truncpow";
    return out;
}

}  // namespace pnreg::baselines
