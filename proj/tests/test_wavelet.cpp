#include "pnreg/wavelet.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "pnreg/numkern.hpp"

using pnreg::Vector;
using namespace pnreg::baselines;

namespace {

Vector random_signal(std::size_t n, std::uint64_t seed) {
    pnreg::Rng rng(seed);
    Vector y(n, 0.0);
    for (auto& v : y) v = rng.next_gaussian();
    return y;
}

double l2(const Vector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double coeff_l2(const WaveletCoeffs& c) {
    double s = 0.0;
    for (double x : c.approx) s += x * x;
    for (const auto& band : c.details)
        for (double x : band) s += x * x;
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("embedded filter bank satisfies the orthonormal wavelet identities") {
    const Vector& h = sym4_dec_lo();
    const Vector& g = sym4_dec_hi();
    REQUIRE(h.size() == 8);

    double sum_h = 0.0, sum_g = 0.0;
    for (std::size_t k = 0; k < 8; ++k) {
        sum_h += h[k];
        sum_g += g[k];
    }
    REQUIRE(sum_h == Catch::Approx(std::sqrt(2.0)).margin(1e-10));
    REQUIRE(sum_g == Catch::Approx(0.0).margin(1e-10));

    // double-shift orthonormality within and across the two filters
    for (int m = -3; m <= 3; ++m) {
        double hh = 0.0, gg = 0.0, hg = 0.0;
        for (int k = 0; k < 8; ++k) {
            int k2 = k + 2 * m;
            if (k2 < 0 || k2 >= 8) continue;
            hh += h[static_cast<std::size_t>(k)] * h[static_cast<std::size_t>(k2)];
            gg += g[static_cast<std::size_t>(k)] * g[static_cast<std::size_t>(k2)];
            hg += h[static_cast<std::size_t>(k)] * g[static_cast<std::size_t>(k2)];
        }
        double want = (m == 0) ? 1.0 : 0.0;
        REQUIRE(hh == Catch::Approx(want).margin(1e-10));
        REQUIRE(gg == Catch::Approx(want).margin(1e-10));
        REQUIRE(hg == Catch::Approx(0.0).margin(1e-10));
    }
}

TEST_CASE("perfect reconstruction and Parseval at every depth") {
    Vector y = random_signal(64, 17);
    for (int depth = 1; depth <= 5; ++depth) {
        WaveletCoeffs c = dwt_forward(y, depth);
        REQUIRE(c.signal_length() == y.size());
        REQUIRE(coeff_l2(c) == Catch::Approx(l2(y)).margin(1e-10));
        Vector back = dwt_inverse(c);
        for (std::size_t i = 0; i < y.size(); ++i)
            REQUIRE(back[i] == Catch::Approx(y[i]).margin(1e-10));
    }
}

TEST_CASE("transform is linear") {
    Vector a = random_signal(32, 3);
    Vector b = random_signal(32, 5);
    Vector combo(32, 0.0);
    for (std::size_t i = 0; i < 32; ++i) combo[i] = 2.5 * a[i] - 0.75 * b[i];
    auto ca = dwt_forward(a, 3), cb = dwt_forward(b, 3), cc = dwt_forward(combo, 3);
    for (std::size_t i = 0; i < ca.approx.size(); ++i)
        REQUIRE(cc.approx[i] == Catch::Approx(2.5 * ca.approx[i] - 0.75 * cb.approx[i]).margin(1e-12));
    for (std::size_t l = 0; l < ca.details.size(); ++l)
        for (std::size_t i = 0; i < ca.details[l].size(); ++i)
            REQUIRE(cc.details[l][i] ==
                    Catch::Approx(2.5 * ca.details[l][i] - 0.75 * cb.details[l][i]).margin(1e-12));
}

TEST_CASE("threshold zero is the identity") {
    Vector y = random_signal(1024, 29);
    auto res = wavelet_denoise(y, 0.0);
    REQUIRE(res.method == "sym4:depth=8");
    REQUIRE(res.dof_hat == 1024.0);
    for (std::size_t i = 0; i < y.size(); ++i) REQUIRE(res.yhat[i] == Catch::Approx(y[i]).margin(1e-10));
}

TEST_CASE("huge threshold keeps only the coarse approximation") {
    Vector y = random_signal(256, 31);
    for (auto& v : y) v += 3.0;  // give the approximation something to hold
    auto res = wavelet_denoise(y, 1e6);
    REQUIRE(res.dof_hat == 4.0);  // depth 6 leaves a 4-entry approx band

    auto before = dwt_forward(y, 6);
    auto after = dwt_forward(res.yhat, 6);
    for (std::size_t i = 0; i < before.approx.size(); ++i)
        REQUIRE(after.approx[i] == Catch::Approx(before.approx[i]).margin(1e-9));
    for (const auto& band : after.details)
        for (double x : band) REQUIRE(std::fabs(x) < 1e-9);
}

TEST_CASE("universal threshold crushes white noise energy") {
    const std::size_t n = 1024;
    const double threshold = std::sqrt(2.0 * std::log(static_cast<double>(n)));
    for (std::uint64_t seed : {111u, 222u, 333u}) {
        Vector y = random_signal(n, seed);
        auto res = wavelet_denoise(y, threshold);
        double in = 0.0, out = 0.0;
        for (double v : y) in += v * v;
        for (double v : res.yhat) out += v * v;
        INFO("seed=" << seed);
        REQUIRE(out <= 0.2 * in);
    }
}

TEST_CASE("surviving-coefficient count tracks the threshold") {
    Vector y = random_signal(512, 47);
    double prev = 1e300;
    for (double t : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        auto res = wavelet_denoise(y, t);
        REQUIRE(res.dof_hat <= prev);
        prev = res.dof_hat;
    }
}

TEST_CASE("input validation") {
    Vector bad = random_signal(100, 1);  // not a power of two
    CHECK_THROWS_AS(wavelet_denoise(bad, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(dwt_forward(bad, 2), std::invalid_argument);
    Vector ok = random_signal(64, 1);
    CHECK_THROWS_AS(dwt_forward(ok, 0), std::invalid_argument);
    CHECK_THROWS_AS(dwt_forward(ok, 6), std::invalid_argument);  // 64 -> max depth 5
    CHECK_THROWS_AS(wavelet_denoise(ok, -1.0), std::invalid_argument);
    REQUIRE(wavelet_default_depth(1024) == 8);
    REQUIRE(wavelet_default_depth(8) == 1);
}
