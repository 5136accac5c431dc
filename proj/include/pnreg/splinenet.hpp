#pragma once

// Constructive ReLU approximation machinery: cardinal B-spline evaluation,
// sawtooth-based multiplication and squaring gadgets, truncated-power chains
// via binary exponentiation, and B-spline atom networks assembled from them.
//
// All constructions come with a declared sup-error bound on their reference
// domain; tests validate the declared bound against dense-grid measurements.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pnreg/numkern.hpp"
#include "pnreg/pnn.hpp"

namespace pnreg::splinenet {

using pnreg::Matrix;
using pnreg::Vector;

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

inline double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= static_cast<double>(i);
    return r;
}

// Cardinal B-spline of order m (degree m, support [0, m+1]) through the
// symmetric truncated-power form
//   M_m(x) = (1/m!) sum_{j=0}^{ceil((m+1)/2)-1} (-1)^j C(m+1,j) (min(x, m+1-x) - j)_+^m.
// Exactly zero outside (0, m+1).
inline double bspline_eval(int m, double x) {
    if (m <= 0) throw std::domain_error("bspline_eval: order must be >= 1");
    double u = std::min(x, static_cast<double>(m + 1) - x);
    if (u <= 0.0) return 0.0;
    int terms = (m + 2) / 2;  // ceil((m+1)/2)
    double s = 0.0, sign = 1.0;
    for (int j = 0; j < terms; ++j) {
        double t = u - static_cast<double>(j);
        if (t > 0.0) s += sign * binomial(m + 1, j) * std::pow(t, m);
        sign = -sign;
    }
    return s / factorial(m);
}

// Tensor product over coordinates.
inline double bspline_eval_multi(int m, const Vector& x) {
    if (x.empty()) throw std::invalid_argument("bspline_eval_multi: empty input");
    double p = 1.0;
    for (double xi : x) p *= bspline_eval(m, xi);
    return p;
}

// ---------------------------------------------------------------------------
// Gadget algebra. A Gadget is a chain of affine maps with ReLU between
// consecutive maps (and none after the last):
//   g(x) = A_k s(A_{k-1} s( ... s(A_1 x + b_1) ... ) + b_{k-1}) + b_k.
// Composition merges the boundary affine pair, so gadgets chain without
// spurious ReLUs; parallel composition is block diagonal.

namespace detail {

struct Gadget {
    std::vector<Matrix> W;
    std::vector<Vector> b;

    std::size_t in_dim() const { return W.front().cols; }
    std::size_t out_dim() const { return W.back().rows; }
    std::size_t affines() const { return W.size(); }
};

inline Gadget affine_gadget(Matrix W, Vector b) {
    Gadget g;
    g.W.push_back(std::move(W));
    g.b.push_back(std::move(b));
    return g;
}

// g2 after g1. The first affine of g2 multiplies into the last affine of g1.
inline Gadget compose(const Gadget& g2, const Gadget& g1) {
    if (g2.in_dim() != g1.out_dim()) throw std::invalid_argument("gadget compose: dimension mismatch");
    Gadget r = g1;
    const Matrix& B = g2.W.front();
    const Matrix& A = r.W.back();
    Matrix M(B.rows, A.cols);
    Vector nb(B.rows, 0.0);
    for (std::size_t i = 0; i < B.rows; ++i) {
        nb[i] = g2.b.front()[i];
        for (std::size_t t = 0; t < B.cols; ++t) {
            nb[i] += B(i, t) * r.b.back()[t];
            for (std::size_t j = 0; j < A.cols; ++j) M(i, j) += B(i, t) * A(t, j);
        }
    }
    r.W.back() = std::move(M);
    r.b.back() = std::move(nb);
    for (std::size_t l = 1; l < g2.W.size(); ++l) {
        r.W.push_back(g2.W[l]);
        r.b.push_back(g2.b[l]);
    }
    return r;
}

inline Gadget parallel(const std::vector<Gadget>& gs) {
    if (gs.empty()) throw std::invalid_argument("gadget parallel: empty");
    std::size_t k = gs[0].affines();
    for (const auto& g : gs)
        if (g.affines() != k) throw std::invalid_argument("gadget parallel: affine counts differ");
    Gadget r;
    for (std::size_t l = 0; l < k; ++l) {
        std::size_t rows = 0, cols = 0;
        for (const auto& g : gs) {
            rows += g.W[l].rows;
            cols += g.W[l].cols;
        }
        Matrix W(rows, cols);
        Vector b(rows, 0.0);
        std::size_t ro = 0, co = 0;
        for (const auto& g : gs) {
            for (std::size_t i = 0; i < g.W[l].rows; ++i) {
                b[ro + i] = g.b[l][i];
                for (std::size_t j = 0; j < g.W[l].cols; ++j) W(ro + i, co + j) = g.W[l](i, j);
            }
            ro += g.W[l].rows;
            co += g.W[l].cols;
        }
        r.W.push_back(std::move(W));
        r.b.push_back(std::move(b));
    }
    return r;
}

// Identity chain with the given number of affine maps. Exact for nonnegative
// inputs (each intermediate passes through a ReLU unchanged).
inline Gadget identity_chain(std::size_t dim, std::size_t n_affines) {
    Gadget g;
    for (std::size_t l = 0; l < n_affines; ++l) {
        Matrix I(dim, dim);
        for (std::size_t i = 0; i < dim; ++i) I(i, i) = 1.0;
        g.W.push_back(std::move(I));
        g.b.emplace_back(dim, 0.0);
    }
    return g;
}

inline double eval_gadget(const Gadget& g, Vector x) {
    Vector next;
    for (std::size_t l = 0; l < g.affines(); ++l) {
        const Matrix& W = g.W[l];
        next.assign(W.rows, 0.0);
        for (std::size_t i = 0; i < W.rows; ++i) {
            double z = g.b[l][i];
            for (std::size_t j = 0; j < W.cols; ++j) z += W(i, j) * x[j];
            next[i] = (l + 1 == g.affines()) ? z : std::max(z, 0.0);
        }
        x = next;
    }
    return x[0];
}

// Piecewise-linear interpolant of t^2 on [0,1] with 2^teeth cells, realized
// by composing the tent map. Output is exactly 0 for t <= 0 and the sup error
// on [0,1] is 4^{-teeth}/4 (the interpolant lies above t^2).
//   state after stage l: (relu(y), relu(y - 1/2), relu(acc))
// with y the l-fold tent iterate and acc the partial interpolant.
inline Gadget square_gadget(int teeth) {
    if (teeth < 1) throw std::invalid_argument("square_gadget: teeth must be >= 1");
    Gadget g;
    {
        Matrix A(2, 1);
        A(0, 0) = 1.0;
        A(1, 0) = 1.0;
        g.W.push_back(std::move(A));
        g.b.push_back(Vector{0.0, -0.5});
    }
    // after stage 1 the channels are (h1, h2) = (relu(t), relu(t - 1/2));
    // y_1 = 2 h1 - 4 h2 and acc_1 = h1 - y_1 / 4 = h1/2 + h2
    for (int i = 2; i <= teeth; ++i) {
        std::size_t in = (i == 2) ? 2 : 3;
        Matrix A(3, in);
        Vector b(3, 0.0);
        double inv4 = std::pow(4.0, -static_cast<double>(i - 1));
        if (i == 2) {
            A(0, 0) = 2.0; A(0, 1) = -4.0;                       // y_1
            A(1, 0) = 2.0; A(1, 1) = -4.0; b[1] = -0.5;          // y_1 - 1/2
            A(2, 0) = 0.5; A(2, 1) = 1.0;                        // acc_1
        } else {
            A(0, 0) = 2.0; A(0, 1) = -4.0;                       // y_{i-1}
            A(1, 0) = 2.0; A(1, 1) = -4.0; b[1] = -0.5;
            A(2, 0) = -2.0 * inv4; A(2, 1) = 4.0 * inv4; A(2, 2) = 1.0;  // acc_{i-1}
        }
        g.W.push_back(std::move(A));
        g.b.push_back(std::move(b));
    }
    {
        std::size_t in = (teeth == 1) ? 2 : 3;
        Matrix A(1, in);
        Vector b(1, 0.0);
        double inv4 = std::pow(4.0, -static_cast<double>(teeth));
        if (teeth == 1) {
            A(0, 0) = 0.5;
            A(0, 1) = 1.0;
        } else {
            A(0, 0) = -2.0 * inv4;
            A(0, 1) = 4.0 * inv4;
            A(0, 2) = 1.0;
        }
        g.W.push_back(std::move(A));
        g.b.push_back(std::move(b));
    }
    return g;
}

inline double square_gadget_error(int teeth) { return std::pow(4.0, -static_cast<double>(teeth)) / 4.0; }

// Approximate product on [0,1]^2 from the polarization identity
//   xy = 2 [ ((x+y)/2)^2 - (x/2)^2 - (y/2)^2 ]
// with each square replaced by the same interpolant. Exactly zero whenever
// x = 0 or y = 0 (the two remaining squares cancel); sup error 6 * square err.
inline Gadget mul_gadget(int teeth) {
    Matrix pre(3, 2);
    pre(0, 0) = 0.5; pre(0, 1) = 0.5;
    pre(1, 0) = 0.5;
    pre(2, 1) = 0.5;
    Gadget sq = square_gadget(teeth);
    Gadget body = parallel({sq, sq, sq});
    body = compose(body, affine_gadget(std::move(pre), Vector(3, 0.0)));
    Matrix post(1, 3);
    post(0, 0) = 2.0; post(0, 1) = -2.0; post(0, 2) = -2.0;
    // The post map stays its own layer rather than merging into the squares'
    // output affines: the square values are nonnegative, so the interposed
    // ReLU is exact, and the identical-channel cancellation at x = 0 or y = 0
    // then happens term by term instead of across a merged 9-entry row.
    body.W.push_back(std::move(post));
    body.b.emplace_back(1, 0.0);
    return body;
}

inline double mul_gadget_error(int teeth) { return 6.0 * square_gadget_error(teeth); }

inline int teeth_for(double per_gadget_eps) {
    for (int s = 1; s <= 26; ++s)
        if (mul_gadget_error(s) <= per_gadget_eps) return s;
    throw std::invalid_argument("constructive net: requested epsilon too small (teeth budget exceeded)");
}

// Truncated power x_+^m on [0,1] by binary exponentiation. Returns the gadget
// plus the number of multiplication stages (squarings and combines) and a
// first-order bound on the sup error given the per-gadget errors.
struct PowerPlan {
    Gadget g;
    std::size_t mul_stages = 0;
    double err_bound = 0.0;
};

inline PowerPlan power_gadget(int m, int teeth) {
    if (m < 1) throw std::domain_error("power_gadget: exponent must be >= 1");
    PowerPlan plan;
    if (m == 1) {
        Matrix a(1, 1), c(1, 1);
        a(0, 0) = 1.0;
        c(0, 0) = 1.0;
        plan.g = affine_gadget(std::move(a), Vector(1, 0.0));
        plan.g.W.push_back(std::move(c));
        plan.g.b.emplace_back(1, 0.0);
        return plan;  // exactly relu(x)
    }
    const double esq = square_gadget_error(teeth);
    const double emul = mul_gadget_error(teeth);
    int gamma = 0;
    while ((m >> (gamma + 1)) != 0) ++gamma;
    int b0 = 0;
    while (((m >> b0) & 1) == 0) ++b0;

    bool have_p = (b0 == 0);
    double errP = 0.0, errQ = 0.0;
    Gadget chain;  // starts empty; first stage consumes the raw input
    bool chain_started = false;
    auto push = [&](const Gadget& stage) {
        chain = chain_started ? compose(stage, chain) : stage;
        chain_started = true;
    };

    for (int level = 1; level <= gamma; ++level) {
        // square the running power q -> q^2
        Gadget sq = square_gadget(teeth);
        if (have_p) {
            Gadget stage = parallel({identity_chain(1, sq.affines()), sq});
            if (!chain_started) {
                Matrix dup(2, 1);
                dup(0, 0) = 1.0;
                dup(1, 0) = 1.0;
                stage = compose(stage, affine_gadget(std::move(dup), Vector(2, 0.0)));
            }
            push(stage);
        } else {
            push(sq);
        }
        errQ = 2.0 * errQ + esq;
        ++plan.mul_stages;
        if (((m >> level) & 1) == 0) continue;
        if (!have_p) {
            if (level == gamma) break;  // m is a power of two: q is the answer
            have_p = true;              // p := q, duplicate the channel
            errP = errQ;
            Matrix dup(2, 1);
            dup(0, 0) = 1.0;
            dup(1, 0) = 1.0;
            push(affine_gadget(std::move(dup), Vector(2, 0.0)));
            continue;
        }
        // p := p * q
        Gadget mg = mul_gadget(teeth);
        if (level < gamma) {
            Matrix wire(3, 2);
            wire(0, 0) = 1.0;
            wire(1, 1) = 1.0;
            wire(2, 1) = 1.0;
            Gadget stage = parallel({mg, identity_chain(1, mg.affines())});
            push(compose(stage, affine_gadget(std::move(wire), Vector(3, 0.0))));
        } else {
            push(mg);
        }
        errP = errP + errQ + emul;
        ++plan.mul_stages;
    }
    plan.g = chain;
    plan.err_bound = have_p ? errP : errQ;
    return plan;
}

inline pnn::Subnetwork to_subnetwork(const Gadget& g, std::size_t d) {
    pnn::Subnetwork s;
    s.d = d;
    s.W = g.W;
    s.b = g.b;
    s.validate();
    return s;
}

}  // namespace detail

// A constructed subnetwork with its certificate: target kind, guaranteed sup
// error on the reference domain, depth, and how many multiplication gadgets
// the construction composed.
struct ConstructedNet {
    pnn::Subnetwork net;
    std::string target;        // "mul" | "power" | "bspline"
    double epsilon = 0.0;      // declared sup-error bound
    std::size_t depth = 0;     // affine layer count
    std::size_t mul_stages = 0;
};

// Product approximator on [0,1]^2: |net(x, y) - x*y| <= eps, and
// net(x, y) == 0 exactly when x == 0 or y == 0. Depth grows by a bounded
// number of layers each time eps halves.
inline ConstructedNet build_mul_net(double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("build_mul_net: eps must be > 0");
    int teeth = detail::teeth_for(eps);
    detail::Gadget g = detail::mul_gadget(teeth);
    ConstructedNet c;
    c.net = detail::to_subnetwork(g, 2);
    c.target = "mul";
    c.epsilon = eps;
    c.depth = c.net.depth();
    c.mul_stages = 1;
    return c;
}

// Truncated power x_+^m on [0,1]: |net(x) - x_+^m| <= eps there, exact zero
// for x <= 0. m = 1 is an exact two-layer ReLU.
inline ConstructedNet build_power_net(int m, double eps) {
    if (m < 1) throw std::domain_error("build_power_net: m must be >= 1");
    if (!(eps > 0.0)) throw std::invalid_argument("build_power_net: eps must be > 0");
    ConstructedNet c;
    c.target = "power";
    if (m == 1) {
        auto plan = detail::power_gadget(1, 1);
        c.net = detail::to_subnetwork(plan.g, 1);
        c.epsilon = 0.0;
        c.depth = c.net.depth();
        return c;
    }
    detail::PowerPlan plan;
    int teeth = 1;
    for (; teeth <= 26; ++teeth) {
        plan = detail::power_gadget(m, teeth);
        if (plan.err_bound <= eps) break;
    }
    if (plan.err_bound > eps) throw std::invalid_argument("build_power_net: requested epsilon too small");
    c.net = detail::to_subnetwork(plan.g, 1);
    c.epsilon = eps;
    c.depth = c.net.depth();
    c.mul_stages = plan.mul_stages;
    return c;
}

// One scaled/shifted B-spline atom M_m(2^k (x - s)) on R^d as a sum of
// ceil((m+1)/2)^d subnetworks: result.parts[i] approximates a normalized
// product of truncated powers and result.a[i] carries the signed coefficient,
// so that sum_i a_i * parts[i](x) tracks the atom within eps on its support
// and is exactly zero off-support.
struct BsplineNetResult {
    std::vector<ConstructedNet> parts;
    Vector a;
    double epsilon = 0.0;  // atom-level bound for the coefficient-weighted sum
    int m = 0;
    int k = 0;
    Vector shift;
};

inline BsplineNetResult build_bspline_net(int m, int k, const Vector& s, std::size_t d, double eps) {
    if (m < 1) throw std::domain_error("build_bspline_net: m must be >= 1");
    if (d < 1) throw std::invalid_argument("build_bspline_net: d must be >= 1");
    if (s.size() != d) throw std::invalid_argument("build_bspline_net: shift dimension mismatch");
    if (!(eps > 0.0)) throw std::invalid_argument("build_bspline_net: eps must be > 0");

    const int terms = (m + 2) / 2;           // per-dimension truncated-power terms
    const double c = 0.5 * (m + 1);          // normalization so power inputs live in [0,1]
    const double scale = std::pow(2.0, k);

    // per-dimension coefficients of the symmetric truncated-power expansion
    Vector coeff1(terms);
    double csum = 0.0;
    for (int j = 0; j < terms; ++j) {
        coeff1[j] = ((j % 2) ? -1.0 : 1.0) * binomial(m + 1, j) * std::pow(c, m) / factorial(m);
        csum += std::fabs(coeff1[j]);
    }
    double coeff_sum_abs = std::pow(csum, static_cast<double>(d));

    // error budget: each part carries d power factors and d-1 product gadgets
    double eps_term = eps / coeff_sum_abs;
    double eps_power = (d == 1) ? eps_term : eps_term / (2.0 * static_cast<double>(d));
    double eps_mul = (d == 1) ? 0.0 : eps_term / (2.0 * static_cast<double>(d - 1));

    int power_teeth = 1;
    detail::PowerPlan pp;
    if (m == 1) {
        pp = detail::power_gadget(1, 1);
    } else {
        for (; power_teeth <= 26; ++power_teeth) {
            pp = detail::power_gadget(m, power_teeth);
            if (pp.err_bound <= eps_power) break;
        }
        if (pp.err_bound > eps_power) throw std::invalid_argument("build_bspline_net: epsilon too small");
    }
    int mul_teeth = (d > 1) ? detail::teeth_for(eps_mul) : 1;

    BsplineNetResult out;
    out.m = m;
    out.k = k;
    out.shift = s;
    out.epsilon = eps;

    std::vector<int> jvec(d, 0);
    const std::size_t total = [&] {
        std::size_t t = 1;
        for (std::size_t i = 0; i < d; ++i) t *= static_cast<std::size_t>(terms);
        return t;
    }();

    for (std::size_t idx = 0; idx < total; ++idx) {
        // decode lexicographic index (last dimension fastest)
        std::size_t rem = idx;
        for (std::size_t i = d; i-- > 0;) {
            jvec[i] = static_cast<int>(rem % terms);
            rem /= terms;
        }
        // prefix affine: per dimension the pair ((x'_i - j)/c, (2x'_i - (m+1))/c)
        // with x'_i = 2^k (x_i - s_i); relu of those two combines to the
        // clipped symmetric argument (min(x', m+1-x') - j)/c.
        Matrix pre(2 * d, d);
        Vector preb(2 * d, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
            double j = static_cast<double>(jvec[i]);
            pre(2 * i, i) = scale / c;
            preb[2 * i] = -(scale * s[i] + j) / c;
            pre(2 * i + 1, i) = 2.0 * scale / c;
            preb[2 * i + 1] = -(2.0 * scale * s[i] + static_cast<double>(m + 1)) / c;
        }
        Matrix comb(d, 2 * d);
        for (std::size_t i = 0; i < d; ++i) {
            comb(i, 2 * i) = 1.0;
            comb(i, 2 * i + 1) = -1.0;
        }
        detail::Gadget g = detail::affine_gadget(std::move(pre), std::move(preb));
        g.W.push_back(std::move(comb));
        g.b.emplace_back(d, 0.0);

        std::vector<detail::Gadget> powers(d, pp.g);
        g = detail::compose(detail::parallel(powers), g);

        std::size_t muls = d * pp.mul_stages;
        std::size_t ch = d;
        while (ch > 1) {
            std::vector<detail::Gadget> stage;
            std::size_t pairs = ch / 2;
            for (std::size_t p = 0; p < pairs; ++p) stage.push_back(detail::mul_gadget(mul_teeth));
            if (ch % 2) stage.push_back(detail::identity_chain(1, stage.front().affines()));
            g = detail::compose(detail::parallel(stage), g);
            muls += pairs;
            ch = pairs + (ch % 2);
        }

        ConstructedNet part;
        part.net = detail::to_subnetwork(g, d);
        part.target = "bspline";
        part.epsilon = eps_term;
        part.depth = part.net.depth();
        part.mul_stages = muls;
        out.parts.push_back(std::move(part));

        double a = 1.0;
        for (std::size_t i = 0; i < d; ++i) a *= coeff1[jvec[i]];
        out.a.push_back(a);
    }
    return out;
}

inline BsplineNetResult build_bspline_net(int m, int k, double s, double eps) {
    return build_bspline_net(m, k, Vector{s}, 1, eps);
}

// Evaluate the coefficient-weighted sum of constructed parts.
inline double eval_bspline_net(const BsplineNetResult& r, const Vector& x) {
    double f = 0.0;
    for (std::size_t i = 0; i < r.parts.size(); ++i) f += r.a[i] * pnn::subnet_forward(r.parts[i].net, x);
    return f;
}

}  // namespace pnreg::splinenet
