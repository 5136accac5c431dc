#pragma once

// Natural cubic smoothing spline at the design points:
//
//   minimize   (1/n) sum_i (y_i - g(x_i))^2  +  lambda * integral g''(t)^2 dt
//
// solved by the Reinsch two-step: with Q the second-divided-difference map
// and R the tridiagonal Gram matrix of the natural spline second derivatives,
// the fitted values are g = y - mu Q gamma where (R + mu Q'Q) gamma = Q'y and
// mu = n * lambda absorbs the 1/n in the data term. The smoother is linear,
// so its degrees of freedom are the exact trace
//
//   dof = n - mu * tr((R + mu Q'Q)^{-1} Q'Q),
//
// computed from the in-band entries of the inverse (Takahashi recurrences),
// never by sampling. Lines are in the penalty's null space: linear data is
// reproduced exactly at every lambda, and lambda -> infinity collapses to the
// least-squares line (dof -> 2) while lambda -> 0 interpolates (dof -> n).

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pnreg/fit.hpp"
#include "pnreg/numkern.hpp"

namespace pnreg::baselines {

namespace detail {

struct ReinschSystem {
    std::size_t n = 0;
    Vector h;          // spacings, size n-1
    BandedMatrix r;    // (n-2) x (n-2), bandwidth 1
    BandedMatrix qtq;  // (n-2) x (n-2), bandwidth min(2, n-3)
};

inline ReinschSystem reinsch_system(const Vector& x) {
    const std::size_t n = x.size();
    if (n < 3) throw std::invalid_argument("smoothing_spline: need n >= 3");
    ReinschSystem s;
    s.n = n;
    s.h.assign(n - 1, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        s.h[i] = x[i + 1] - x[i];
        if (!(s.h[i] > 0.0))
            throw std::invalid_argument("smoothing_spline: x_grid must be strictly increasing");
    }
    const std::size_t k = n - 2;
    s.r = BandedMatrix(k, k > 1 ? 1 : 0);
    for (std::size_t j = 0; j < k; ++j) {
        s.r.band(0, j) = (s.h[j] + s.h[j + 1]) / 3.0;
        if (j + 1 < k) s.r.band(1, j) = s.h[j + 1] / 6.0;
    }
    // columns of Q: rows j, j+1, j+2 carry 1/h_j, -(1/h_j + 1/h_{j+1}), 1/h_{j+1}
    s.qtq = BandedMatrix(k, std::min<std::size_t>(2, k - 1));
    for (std::size_t j = 0; j < k; ++j) {
        double a = 1.0 / s.h[j];
        double c = 1.0 / s.h[j + 1];
        double col[3] = {a, -(a + c), c};
        for (std::size_t dj = 0; dj <= std::min<std::size_t>(2, k - 1 - j); ++dj) {
            // overlap of column j and column j+dj: rows j+dj .. j+2
            double colj[3] = {1.0 / s.h[j + dj], -(1.0 / s.h[j + dj] + 1.0 / s.h[j + dj + 1]),
                              1.0 / s.h[j + dj + 1]};
            double acc = 0.0;
            for (std::size_t t = dj; t < 3; ++t) acc += col[t] * colj[t - dj];
            s.qtq.band(dj, j) += acc;
        }
    }
    return s;
}

inline Vector apply_qt(const ReinschSystem& s, const Vector& y) {
    const std::size_t k = s.n - 2;
    Vector out(k, 0.0);
    for (std::size_t j = 0; j < k; ++j)
        out[j] = y[j] / s.h[j] - y[j + 1] * (1.0 / s.h[j] + 1.0 / s.h[j + 1]) + y[j + 2] / s.h[j + 1];
    return out;
}

inline Vector apply_q(const ReinschSystem& s, const Vector& gamma) {
    Vector out(s.n, 0.0);
    for (std::size_t j = 0; j + 2 < s.n; ++j) {
        out[j] += gamma[j] / s.h[j];
        out[j + 1] -= gamma[j] * (1.0 / s.h[j] + 1.0 / s.h[j + 1]);
        out[j + 2] += gamma[j] / s.h[j + 1];
    }
    return out;
}

}  // namespace detail

inline FitResult smoothing_spline(const Vector& y, const Vector& x_grid, double lambda) {
    if (y.size() != x_grid.size()) throw std::invalid_argument("smoothing_spline: length mismatch");
    if (!(lambda >= 0.0)) throw std::invalid_argument("smoothing_spline: lambda must be >= 0");
    auto s = detail::reinsch_system(x_grid);
    const std::size_t n = s.n;
    const double mu = static_cast<double>(n) * lambda;

    FitResult res;
    res.tuning = lambda;
    res.method = "ss";

    if (mu == 0.0) {
        res.yhat = y;
        res.dof_hat = static_cast<double>(n);
        return res;
    }

    const std::size_t k = n - 2;
    BandedMatrix a(k, s.qtq.bandwidth);
    for (std::size_t d = 0; d <= a.bandwidth; ++d)
        for (std::size_t j = 0; j + d < k; ++j)
            a.band(d, j) = (d <= s.r.bandwidth ? s.r.band(d, j) : 0.0) + mu * s.qtq.band(d, j);

    BandedMatrix L = banded_cholesky(a);
    Vector gamma = banded_cholesky_solve_factored(L, detail::apply_qt(s, y));
    Vector qg = detail::apply_q(s, gamma);
    res.yhat.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) res.yhat[i] = y[i] - mu * qg[i];

    // dof = n - mu tr(A^{-1} Q'Q): only in-band entries of A^{-1} meet Q'Q
    BandedMatrix inv = banded_selected_inverse(L);
    double tr = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        tr += inv.band(0, j) * s.qtq.band(0, j);
        for (std::size_t d = 1; d <= a.bandwidth && j + d < k; ++d)
            tr += 2.0 * inv.band(d, j) * s.qtq.band(d, j);
    }
    res.dof_hat = static_cast<double>(n) - mu * tr;
    return res;
}

}  // namespace pnreg::baselines
