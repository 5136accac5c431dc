#pragma once

// Minimal deterministic numeric kernel: dense vector/matrix types, a packed
// symmetric banded matrix with Cholesky solve, and a seeded RNG with gaussian
// sampling. Everything downstream builds on these types.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnreg {

// Thrown when a numeric routine fails for data reasons (loss of positive
// definiteness, divergence, ...) as opposed to caller errors, which raise
// std::invalid_argument / std::domain_error.
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

using Vector = std::vector<double>;

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

inline double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data) s += v * v;
    return std::sqrt(s);
}

// Sum_i |v_i|^p, the p-th power of the l_p (quasi-)norm. Accepts any p > 0,
// including p < 1 where this is the natural subadditive quantity.
inline double lp_norm_p(const Vector& v, double p) {
    if (!(p > 0.0)) throw std::domain_error("lp_norm_p: p must be > 0");
    double s = 0.0;
    for (double x : v) s += std::pow(std::fabs(x), p);
    return s;
}

// Symmetric positive definite banded matrix, lower triangle packed by
// diagonals: band(d, j) holds A(j + d, j) for d = 0..bandwidth.
struct BandedMatrix {
    std::size_t n = 0;
    std::size_t bandwidth = 0;
    std::vector<double> data;

    BandedMatrix() = default;
    BandedMatrix(std::size_t n_, std::size_t bw) : n(n_), bandwidth(bw), data((bw + 1) * n_, 0.0) {}

    double& band(std::size_t d, std::size_t j) { return data[d * n + j]; }
    double band(std::size_t d, std::size_t j) const { return data[d * n + j]; }

    // Full-index access for |i - j| <= bandwidth (symmetric).
    double at(std::size_t i, std::size_t j) const {
        if (j > i) std::swap(i, j);
        std::size_t d = i - j;
        if (d > bandwidth) return 0.0;
        return band(d, j);
    }
    void set(std::size_t i, std::size_t j, double v) {
        if (j > i) std::swap(i, j);
        std::size_t d = i - j;
        if (d > bandwidth) throw std::invalid_argument("BandedMatrix::set outside band");
        band(d, j) = v;
    }
};

// Cholesky factor of an SPD banded matrix, same packed layout (L lower).
inline BandedMatrix banded_cholesky(const BandedMatrix& a) {
    const std::size_t n = a.n, bw = a.bandwidth;
    BandedMatrix L(n, bw);
    for (std::size_t j = 0; j < n; ++j) {
        double s = a.band(0, j);
        std::size_t k0 = (j > bw) ? j - bw : 0;
        for (std::size_t k = k0; k < j; ++k) {
            double ljk = L.band(j - k, k);
            s -= ljk * ljk;
        }
        if (!(s > 0.0)) throw numerical_error("banded_cholesky: matrix not positive definite at column " + std::to_string(j));
        double ljj = std::sqrt(s);
        L.band(0, j) = ljj;
        std::size_t imax = std::min(j + bw, n - 1);
        for (std::size_t i = j + 1; i <= imax; ++i) {
            double t = a.at(i, j);
            std::size_t kk0 = (i > bw) ? i - bw : 0;
            if (kk0 < k0) kk0 = k0;
            for (std::size_t k = kk0; k < j; ++k) t -= L.band(i - k, k) * L.band(j - k, k);
            L.band(i - j, j) = t / ljj;
        }
    }
    return L;
}

inline Vector banded_cholesky_solve_factored(const BandedMatrix& L, const Vector& rhs) {
    const std::size_t n = L.n, bw = L.bandwidth;
    if (rhs.size() != n) throw std::invalid_argument("banded solve: rhs size mismatch");
    Vector x = rhs;
    for (std::size_t i = 0; i < n; ++i) {  // forward: L y = rhs
        double s = x[i];
        std::size_t k0 = (i > bw) ? i - bw : 0;
        for (std::size_t k = k0; k < i; ++k) s -= L.band(i - k, k) * x[k];
        x[i] = s / L.band(0, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {  // backward: L^T x = y
        double s = x[ii];
        std::size_t imax = std::min(ii + bw, n - 1);
        for (std::size_t k = ii + 1; k <= imax; ++k) s -= L.band(k - ii, ii) * x[k];
        x[ii] = s / L.band(0, ii);
    }
    return x;
}

// Solve A x = rhs for SPD banded A. Throws numerical_error if A is not
// positive definite.
inline Vector banded_cholesky_solve(const BandedMatrix& a, const Vector& rhs) {
    return banded_cholesky_solve_factored(banded_cholesky(a), rhs);
}

// Entries of A^{-1} within the band of A, from the Cholesky factor
// (Takahashi recurrences). Returned in the same packed layout; A^{-1} itself
// is dense, only the in-band entries are produced. Used for exact smoother
// traces without forming dense inverses.
inline BandedMatrix banded_selected_inverse(const BandedMatrix& L) {
    const std::size_t n = L.n, bw = L.bandwidth;
    // Unit lower factor and diagonal: A = L1 D L1^T with L1(i,j) = L(i,j)/L(j,j).
    BandedMatrix Z(n, bw);
    auto zref = [&](std::size_t i, std::size_t j) -> double& {  // i <= j, j - i <= bw
        return Z.band(j - i, i);
    };
    for (std::size_t ii = n; ii-- > 0;) {
        std::size_t jmax = std::min(ii + bw, n - 1);
        for (std::size_t j = jmax + 1; j-- > ii;) {
            double s = (ii == j) ? 1.0 / (L.band(0, ii) * L.band(0, ii)) : 0.0;
            std::size_t kmax = std::min(ii + bw, n - 1);
            for (std::size_t k = ii + 1; k <= kmax; ++k) {
                double l1 = L.band(k - ii, ii) / L.band(0, ii);
                double zkj = (k <= j) ? zref(k, j) : zref(j, k);
                s -= l1 * zkj;
            }
            zref(ii, j) = s;
        }
    }
    return Z;
}

// Deterministic splitmix64 stream with Box-Muller gaussians. Same seed gives
// the same stream on every platform; derived streams use rng_derive.
struct Rng {
    std::uint64_t state;
    bool has_spare = false;
    double spare = 0.0;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller, one spare cached.
    double next_gaussian() {
        if (has_spare) {
            has_spare = false;
            return spare;
        }
        double u1 = 0.0;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double th = 6.283185307179586476925286766559 * u2;
        spare = r * std::sin(th);
        has_spare = true;
        return r * std::cos(th);
    }
};

// Independent stream for parallel task `index` under a master seed.
inline Rng rng_derive(std::uint64_t seed, std::uint64_t index) {
    // xor then one scramble round so adjacent indices decorrelate
    Rng r(seed ^ (0x9E3779B97F4A7C15ull * (index + 1)));
    r.next_u64();
    return r;
}

inline Vector gaussian_sample(Rng& rng, std::size_t n, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("gaussian_sample: sigma must be >= 0");
    Vector v(n, 0.0);
    if (sigma == 0.0) return v;
    for (std::size_t i = 0; i < n; ++i) v[i] = sigma * rng.next_gaussian();
    return v;
}

}  // namespace pnreg
