#include "pnreg/smooth_spline.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "pnreg/numkern.hpp"

using pnreg::Vector;
using namespace pnreg::baselines;

namespace {

using Dense = std::vector<std::vector<double>>;

Vector dense_solve(Dense a, Vector rhs) {
    const std::size_t q = rhs.size();
    for (std::size_t col = 0; col < q; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < q; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        std::swap(a[piv], a[col]);
        std::swap(rhs[piv], rhs[col]);
        for (std::size_t r = col + 1; r < q; ++r) {
            double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < q; ++c) a[r][c] -= f * a[col][c];
            rhs[r] -= f * rhs[col];
        }
    }
    Vector x(q, 0.0);
    for (std::size_t r = q; r-- > 0;) {
        double s = rhs[r];
        for (std::size_t c = r + 1; c < q; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return x;
}

struct DenseSystem {
    Dense q;  // n x (n-2)
    Dense r;  // (n-2) x (n-2)
};

DenseSystem dense_system(const Vector& x) {
    const std::size_t n = x.size();
    const std::size_t k = n - 2;
    DenseSystem s;
    s.q.assign(n, std::vector<double>(k, 0.0));
    s.r.assign(k, std::vector<double>(k, 0.0));
    Vector h(n - 1, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) h[i] = x[i + 1] - x[i];
    for (std::size_t j = 0; j < k; ++j) {
        s.q[j][j] = 1.0 / h[j];
        s.q[j + 1][j] = -(1.0 / h[j] + 1.0 / h[j + 1]);
        s.q[j + 2][j] = 1.0 / h[j + 1];
        s.r[j][j] = (h[j] + h[j + 1]) / 3.0;
        if (j + 1 < k) {
            s.r[j][j + 1] = h[j + 1] / 6.0;
            s.r[j + 1][j] = h[j + 1] / 6.0;
        }
    }
    return s;
}

// Reference fit built densely: g = y - mu Q (R + mu Q'Q)^{-1} Q'y.
Vector dense_fit(const Vector& y, const Vector& x, double lambda, double* dof = nullptr) {
    const std::size_t n = y.size();
    const std::size_t k = n - 2;
    const double mu = static_cast<double>(n) * lambda;
    auto s = dense_system(x);
    Dense a(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            double qq = 0.0;
            for (std::size_t t = 0; t < n; ++t) qq += s.q[t][i] * s.q[t][j];
            a[i][j] = s.r[i][j] + mu * qq;
        }
    Vector qty(k, 0.0);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t t = 0; t < n; ++t) qty[j] += s.q[t][j] * y[t];
    Vector gamma = dense_solve(a, qty);
    Vector g(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) acc += s.q[t][j] * gamma[j];
        g[t] = y[t] - mu * acc;
    }
    if (dof) {
        // trace of A^{-1} Q'Q column by column, all dense
        double tr = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            Vector col(k, 0.0);
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t t = 0; t < n; ++t) col[i] += s.q[t][i] * s.q[t][j];
            Vector sol = dense_solve(a, col);
            tr += sol[j];
        }
        *dof = static_cast<double>(n) - mu * tr;
    }
    return g;
}

Vector noisy(std::size_t n, std::uint64_t seed, double sigma = 0.15) {
    pnreg::Rng rng(seed);
    Vector y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double x = static_cast<double>(i) / static_cast<double>(n - 1);
        y[i] = std::sin(5.0 * x) + 0.4 * x + sigma * rng.next_gaussian();
    }
    return y;
}

Vector uniform_grid(std::size_t n) {
    Vector x(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    return x;
}

Vector stretched_grid(std::size_t n) {
    Vector x = uniform_grid(n);
    for (double& t : x) t = t * t * 0.7 + 0.3 * t;  // strictly increasing, nonuniform
    return x;
}

}  // namespace

TEST_CASE("no perturbation in natural-spline space improves the objective") {
    // A natural cubic spline is determined by its knot values g; its bending
    // energy is (Q'g)' R^{-1} (Q'g). The returned fit must therefore minimize
    //   F(g) = (1/n)||y - g||^2 + lambda (Q'g)' R^{-1} (Q'g)
    // over all of R^n. This variational certificate stays well conditioned
    // where the residual form (I + mu Q R^{-1} Q') g = y amplifies rounding
    // by mu * ||K||.
    const std::size_t n = 40;
    Vector x = stretched_grid(n);
    Vector y = noisy(n, 9);
    auto s = dense_system(x);
    const std::size_t k = n - 2;
    pnreg::Rng rng(77);
    for (double lambda : {1e-6, 1e-3, 1.0, 100.0}) {
        auto res = smoothing_spline(y, x, lambda);
        auto full = [&](const Vector& g) {
            double fit = 0.0;
            for (std::size_t i = 0; i < n; ++i) fit += (y[i] - g[i]) * (y[i] - g[i]);
            fit /= static_cast<double>(n);
            Vector qtg(k, 0.0);
            for (std::size_t j = 0; j < k; ++j)
                for (std::size_t t = 0; t < n; ++t) qtg[j] += s.q[t][j] * g[t];
            Vector gamma = dense_solve(s.r, qtg);
            double pen = 0.0;
            for (std::size_t j = 0; j < k; ++j) pen += qtg[j] * gamma[j];
            return fit + lambda * pen;
        };
        double base = full(res.yhat);
        INFO("lambda=" << lambda);
        for (int t = 0; t < 40; ++t) {
            Vector g = res.yhat;
            double norm = 0.0;
            Vector v(n, 0.0);
            for (auto& c : v) {
                c = rng.next_gaussian();
                norm += c * c;
            }
            norm = std::sqrt(norm);
            double delta = (t % 2 == 0) ? 1e-3 : 1e-2;
            for (std::size_t i = 0; i < n; ++i) g[i] += delta * v[i] / norm;
            REQUIRE(full(g) >= base - 1e-10 * (1.0 + std::fabs(base)));
        }
    }
}

TEST_CASE("matches the dense-matrix implementation including the exact dof") {
    const std::size_t n = 12;
    for (bool uniform : {true, false}) {
        Vector x = uniform ? uniform_grid(n) : stretched_grid(n);
        Vector y = noisy(n, 21);
        for (double lambda : {1e-5, 1e-2, 0.5, 30.0}) {
            double dof_dense = 0.0;
            Vector ref = dense_fit(y, x, lambda, &dof_dense);
            auto res = smoothing_spline(y, x, lambda);
            for (std::size_t i = 0; i < n; ++i) REQUIRE(std::fabs(res.yhat[i] - ref[i]) < 1e-9);
            REQUIRE(res.dof_hat == Catch::Approx(dof_dense).margin(1e-9));
        }
    }
}

TEST_CASE("linear data is reproduced exactly at every lambda") {
    const std::size_t n = 50;
    Vector x = stretched_grid(n);
    Vector y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) y[i] = 2.5 * x[i] - 0.7;
    for (double lambda : {1e-8, 1e-3, 1.0, 1e6}) {
        auto res = smoothing_spline(y, x, lambda);
        for (std::size_t i = 0; i < n; ++i) REQUIRE(std::fabs(res.yhat[i] - y[i]) < 1e-9);
    }
}

TEST_CASE("infinite-smoothing limit is the least-squares line with dof 2") {
    const std::size_t n = 60;
    Vector x = uniform_grid(n);
    Vector y = noisy(n, 33);
    auto res = smoothing_spline(y, x, 1e10);
    REQUIRE(res.dof_hat == Catch::Approx(2.0).margin(0.01));

    // LS line via closed form
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double nb = static_cast<double>(n);
    double slope = (nb * sxy - sx * sy) / (nb * sxx - sx * sx);
    double icept = (sy - slope * sx) / nb;
    for (std::size_t i = 0; i < n; ++i)
        REQUIRE(std::fabs(res.yhat[i] - (icept + slope * x[i])) < 1e-6);
}

TEST_CASE("interpolation limit: residuals vanish and dof approaches n") {
    const std::size_t n = 30;
    Vector x = uniform_grid(n);
    Vector y = noisy(n, 41);
    auto exact = smoothing_spline(y, x, 0.0);
    REQUIRE(exact.dof_hat == static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) REQUIRE(exact.yhat[i] == y[i]);

    auto res = smoothing_spline(y, x, 1e-12);
    REQUIRE(res.dof_hat > static_cast<double>(n) - 0.5);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(std::fabs(res.yhat[i] - y[i]) < 1e-5);
}

TEST_CASE("smoother matrix is symmetric with eigenvalues in [0,1], dof in [2,n]") {
    const std::size_t n = 40;
    Vector x = stretched_grid(n);
    for (double lambda : {1e-6, 1e-2, 10.0}) {
        std::vector<Vector> scol(n);
        for (std::size_t i = 0; i < n; ++i) {
            Vector e(n, 0.0);
            e[i] = 1.0;
            scol[i] = smoothing_spline(e, x, lambda).yhat;
        }
        double asym = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) asym = std::max(asym, std::fabs(scol[i][j] - scol[j][i]));
        REQUIRE(asym < 1e-9);

        pnreg::Rng rng(55);
        for (int t = 0; t < 50; ++t) {
            Vector v(n, 0.0);
            double vv = 0.0;
            for (auto& c : v) {
                c = rng.next_gaussian();
            }
            Vector sv(n, 0.0);
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t i = 0; i < n; ++i) sv[i] += scol[j][i] * v[j];
            double quad = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                quad += v[i] * sv[i];
                vv += v[i] * v[i];
            }
            REQUIRE(quad >= -1e-10);
            REQUIRE(quad <= vv * (1.0 + 1e-10));
        }

        auto res = smoothing_spline(noisy(n, 5), x, lambda);
        REQUIRE(res.dof_hat >= 2.0 - 1e-8);
        REQUIRE(res.dof_hat <= static_cast<double>(n) + 1e-8);
    }
}

TEST_CASE("dof decreases as lambda grows") {
    const std::size_t n = 80;
    Vector x = uniform_grid(n);
    Vector y = noisy(n, 61);
    double prev = 1e300;
    for (double lambda : {1e-8, 1e-6, 1e-4, 1e-2, 1.0, 100.0}) {
        auto res = smoothing_spline(y, x, lambda);
        REQUIRE(res.dof_hat < prev + 1e-9);
        prev = res.dof_hat;
    }
}

TEST_CASE("input validation") {
    Vector ok = {0.0, 0.5, 1.0, 1.5};
    Vector y = {1.0, 2.0, 3.0, 4.0};
    CHECK_THROWS_AS(smoothing_spline(y, Vector{0.0, 0.5, 0.5, 1.0}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(smoothing_spline(y, Vector{0.0, 0.5, 0.4, 1.0}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(smoothing_spline(Vector{1.0, 2.0}, Vector{0.0, 1.0}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(smoothing_spline(y, ok, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(smoothing_spline(Vector{1.0, 2.0, 3.0}, ok, 1.0), std::invalid_argument);
}
