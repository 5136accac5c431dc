#pragma once

// Closed-form theoretical calculators: covering-number bounds for deep ReLU
// subnetworks and their sparse combinations, MSE rate exponents, and minimax
// reference exponents. Every suppressed constant is evaluated as 1 and all
// logarithms are natural, so outputs are bound shapes for comparison, not
// certified numerical bounds.

#include <cmath>
#include <stdexcept>
#include <string>

namespace pnreg::bounds {

// Parameters of the rate theory: smoothness alpha, input dimension d,
// integrability p, network depth L (may be +infinity for the limit).
struct RateParams {
    double alpha = 1.0;
    double d = 1.0;
    double p = 1.0;
    double L = 3.0;

    void validate() const {
        if (!(alpha > 0.0)) throw std::domain_error("RateParams: alpha must be positive");
        if (!(d >= 1.0)) throw std::domain_error("RateParams: d must be >= 1");
        if (!(p > 0.0)) throw std::domain_error("RateParams: p must be positive");
        if (!(L >= 3.0)) throw std::domain_error("RateParams: depth must be >= 3");
        // alpha - d/p > 1 is the theorem regime; equality is the
        // bounded-variation corollary boundary.
        if (!(alpha - d / p >= 1.0))
            throw std::domain_error("RateParams: alpha - d/p must be >= 1");
    }
};

// For bounded-variation order m: alpha = m+1, d = p = 1.
inline RateParams bv_params(int m, double L) {
    if (m < 1) throw std::domain_error("bv_params: order must be >= 1");
    return RateParams{static_cast<double>(m) + 1.0, 1.0, 1.0, L};
}

// Sup-norm delta-covering bound (log cardinality) of one constrained-form
// subnetwork of depth L and width w on [0,1]^d.
inline double covering_subnetwork(double L, double w, double d, double delta) {
    if (!(L >= 1.0) || !(w >= 1.0) || !(d >= 1.0))
        throw std::domain_error("covering_subnetwork: L, w, d must be >= 1");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::domain_error("covering_subnetwork: delta must be in (0,1)");
    double t1 = w * w * L * std::log(std::exp2(L + 1.0) * std::pow(w, L - 1.0) / delta + 1.0);
    double t2 = w * L *
                std::log(std::exp2(L - 1.0) * std::pow(w, (L - 1.0) / 2.0) * std::sqrt(d) / delta + 1.0);
    return t1 + t2;
}

// Covering bound for l_p-constrained linear combinations (0 < p < 1) of a
// dictionary whose members each need k parameters, with combination norm
// budget P. Returns 0 in the vacuous regime delta >= c3 * P, where the zero
// function already covers the class.
inline double covering_lp_combination(double k, double P, double p, double delta, double c3 = 1.0) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("covering_lp_combination: p must be in (0,1)");
    if (!(P > 0.0) || !(delta > 0.0) || !(c3 > 0.0) || !(k > 0.0))
        throw std::domain_error("covering_lp_combination: k, P, delta, c3 must be positive");
    if (delta >= c3 * P) return 0.0;
    double q = p / (1.0 - p);
    return k * std::pow(P, 1.0 / (1.0 - p)) * std::pow(delta / c3, -q) * std::log(c3 * P / delta);
}

// Covering bound for the full parallel network class of depth L and width w
// with l_{2/L} coefficient budget P'.
inline double covering_pnn(double w, double L, double d, double P_prime, double delta) {
    if (!(L >= 3.0)) throw std::domain_error("covering_pnn: depth must be >= 3");
    if (!(w >= 1.0) || !(d >= 1.0)) throw std::domain_error("covering_pnn: w, d must be >= 1");
    if (!(P_prime > 0.0) || !(delta > 0.0))
        throw std::domain_error("covering_pnn: P_prime and delta must be positive");
    double r = 1.0 - 2.0 / L;
    return std::pow(w, 2.0 + 2.0 / r) * L * L * std::sqrt(d) * std::pow(P_prime, 1.0 / r) *
           std::pow(delta, -(2.0 / L) / r) * std::log(w * P_prime / delta);
}

// MSE rate exponent: MSE = O(n^{-exponent}), with
// exponent = (2a/d)(1 - 2/L) / (2a/d + 1 - 2/(pL)). Monotone increasing in L
// with limit 2a/(2a + d), the minimax exponent. L may be +infinity.
inline double mse_rate_exponent(const RateParams& rp) {
    rp.validate();
    double s = 2.0 * rp.alpha / rp.d;
    return s * (1.0 - 2.0 / rp.L) / (s + 1.0 - 2.0 / (rp.p * rp.L));
}

inline double mse_rate_limit(double alpha, double d) {
    if (!(alpha > 0.0) || !(d >= 1.0)) throw std::domain_error("mse_rate_limit: bad parameters");
    return 2.0 * alpha / (2.0 * alpha + d);
}

// Extended MSE bound shape with explicit width and sample size; c6 controls
// the depth-truncation term.
inline double mse_bound_extended(const RateParams& rp, double w, double n, double c6 = 1.0) {
    rp.validate();
    if (!(w >= 1.0)) throw std::domain_error("mse_bound_extended: width must be >= 1");
    if (!(n >= 1.0)) throw std::domain_error("mse_bound_extended: n must be >= 1");
    if (!(c6 > 0.0)) throw std::domain_error("mse_bound_extended: c6 must be positive");
    double s = 2.0 * rp.alpha / rp.d;
    double expo = s / (s + 1.0 - 2.0 / (rp.p * rp.L));
    double core = std::pow(w, 4.0 - 4.0 / rp.L) * std::pow(rp.L, 2.0 - 4.0 / rp.L) /
                  std::pow(n, 1.0 - 2.0 / rp.L);
    return std::pow(core, expo) + std::exp(-c6 * rp.L);
}

// Minimax exponent over linear estimators for m-th order bounded variation.
inline double linear_minimax_exponent(int m) {
    if (m < 0) throw std::domain_error("linear_minimax_exponent: order must be >= 0");
    return (2.0 * m + 1.0) / (2.0 * m + 2.0);
}

// Unrestricted minimax exponent for m-th order bounded variation; equals
// mse_rate_limit(m+1, 1).
inline double minimax_exponent(int m) {
    if (m < 0) throw std::domain_error("minimax_exponent: order must be >= 0");
    return (2.0 * m + 2.0) / (2.0 * m + 3.0);
}

// Smallest depth L >= 3 whose rate exponent exceeds `target`. Finite exactly
// when the L -> infinity limit exceeds the target; throws otherwise.
inline int crossover_level(double alpha, double d, double p, double target) {
    RateParams rp{alpha, d, p, 3.0};
    rp.validate();
    if (!(mse_rate_limit(alpha, d) > target))
        throw std::domain_error("crossover_level: limit exponent does not exceed the target");
    for (int L = 3;; ++L) {
        rp.L = static_cast<double>(L);
        if (mse_rate_exponent(rp) > target) return L;
        if (L > 1000000) throw std::domain_error("crossover_level: no crossover below 1e6");
    }
}

}  // namespace pnreg::bounds
