#pragma once

// Multilevel B-spline decompositions on [0,1]: local quasi-interpolation,
// Besov-type sequence norms, greedy sparse approximation under an atom
// budget, and assembly of a sparse approximant into a parallel ReLU network.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pnreg/numkern.hpp"
#include "pnreg/pnn.hpp"
#include "pnreg/splinenet.hpp"

namespace pnreg::besov {

// One scaled B-spline atom x -> coeff * M_m(2^k x - s).
struct SplineAtom {
    int m = 1;
    int k = 0;
    long s = 0;
    double coeff = 0.0;
};

// Level-0 base coefficients plus per-level detail coefficients for levels
// 1..max_level. Level k holds shifts -m..2^k-1 (all atoms whose support
// meets (0,1)); the atoms sum to the finest-level quasi-interpolant on [0,1].
struct SplineDecomposition {
    std::vector<SplineAtom> atoms;
    int max_level = 0;
};

struct SparseApprox {
    std::vector<SplineAtom> atoms;
    double target_error = 0.0;  // RMS grid distance to the source decomposition
};

namespace detail {

// Gaussian elimination with partial pivoting; only used for the (m+1)-sized
// dual-weight and reflection systems.
inline Vector solve_dense(Matrix a, Vector b) {
    std::size_t n = a.rows;
    if (a.cols != n || b.size() != n) throw std::invalid_argument("solve_dense: shape mismatch");
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::fabs(a(r, c)) > std::fabs(a(piv, c))) piv = r;
        if (a(piv, c) == 0.0) throw numerical_error("solve_dense: singular system");
        if (piv != c) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(c, j), a(piv, j));
            std::swap(b[c], b[piv]);
        }
        for (std::size_t r = c + 1; r < n; ++r) {
            double f = a(r, c) / a(c, c);
            if (f == 0.0) continue;
            for (std::size_t j = c; j < n; ++j) a(r, j) -= f * a(c, j);
            b[r] -= f * b[c];
        }
    }
    Vector x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
        x[i] = s / a(i, i);
    }
    return x;
}

// Sampling weights lambda_0..lambda_m at offsets tau_j = j+1 making the local
// functional c_i(f) = sum_j lambda_j f((i + j + 1) 2^{-k}) reproduce every
// polynomial of degree <= m: sum_i c_i(g) M_m(2^k x - i) = g(x). The moment
// targets come from psi(y) = prod_{l=1..m}(l - y), whose power expansion
// carries the exact basis coefficients of the monomials. For m = 1 this is
// the nodal rule lambda = (1, 0).
inline Vector dual_weights(int m) {
    if (m < 1) throw std::domain_error("dual_weights: order must be >= 1");
    std::size_t n = static_cast<std::size_t>(m) + 1;
    Vector psi{1.0};  // ascending powers of y
    for (int l = 1; l <= m; ++l) {
        Vector next(psi.size() + 1, 0.0);
        for (std::size_t r = 0; r < psi.size(); ++r) {
            next[r] += static_cast<double>(l) * psi[r];
            next[r + 1] -= psi[r];
        }
        psi = std::move(next);
    }
    Vector mu(n);  // mu[r] = required moment sum_j lambda_j tau_j^r
    for (int r = 0; r <= m; ++r) {
        double sign = (r % 2 == 0) ? 1.0 : -1.0;
        mu[static_cast<std::size_t>(m - r)] =
            sign * psi[static_cast<std::size_t>(r)] / splinenet::binomial(m, r);
    }
    Matrix v(n, n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < n; ++j)
            v(r, j) = std::pow(static_cast<double>(j + 1), static_cast<double>(r));
    return solve_dense(std::move(v), std::move(mu));
}

// Quasi-interpolant coefficients at one level, shift indices -m..2^k-1.
inline Vector level_coefficients(const std::function<double(double)>& f, int m, int k,
                                 const Vector& lambda) {
    long lo = -static_cast<long>(m), hi = (1L << k) - 1;
    double h = std::ldexp(1.0, -k);
    Vector c(static_cast<std::size_t>(hi - lo + 1));
    for (long i = lo; i <= hi; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < lambda.size(); ++j)
            acc += lambda[j] * f(static_cast<double>(i + static_cast<long>(j) + 1) * h);
        c[static_cast<std::size_t>(i - lo)] = acc;
    }
    return c;
}

// Two-scale refinement M_m(t) = 2^{-m} sum_r C(m+1,r) M_m(2t - r): a level
// k-1 coefficient at shift i feeds level-k shifts 2i+r. Output is clipped to
// the level-k index window; the dropped shifts vanish identically on [0,1].
inline Vector refine(const Vector& coarse, int m, int k) {
    long lo = -static_cast<long>(m), hi = (1L << k) - 1;
    Vector fine(static_cast<std::size_t>(hi - lo + 1), 0.0);
    double scale = std::ldexp(1.0, -m);
    for (long i = lo; i < (1L << (k - 1)); ++i) {
        double ci = coarse[static_cast<std::size_t>(i - lo)];
        if (ci == 0.0) continue;
        for (int r = 0; r <= m + 1; ++r) {
            long j = 2 * i + r;
            if (j < lo || j > hi) continue;
            fine[static_cast<std::size_t>(j - lo)] += scale * splinenet::binomial(m + 1, r) * ci;
        }
    }
    return fine;
}

}  // namespace detail

// Degree-m polynomial extension of a function native to [0,1]. Outside the
// interval the value is Lagrange extrapolation through m+1 interior samples
// placed proportionally to the overshoot (capped so they stay inside [0,1]),
// which reproduces polynomials of degree <= m exactly on all of R and keeps
// the extension local for small overshoots.
inline std::function<double(double)> extend_reflect(std::function<double(double)> f, int m) {
    if (m < 1) throw std::domain_error("extend_reflect: order must be >= 1");
    int n = m + 1;
    return [f = std::move(f), n](double x) -> double {
        if (x >= 0.0 && x <= 1.0) return f(x);
        double t = (x < 0.0) ? -x : x - 1.0;
        double h = std::min(t, 1.0 / static_cast<double>(n));
        double acc = 0.0;
        for (int j = 1; j <= n; ++j) {
            double w = 1.0;
            for (int l = 1; l <= n; ++l) {
                if (l == j) continue;
                w *= (-t - static_cast<double>(l) * h) /
                     (static_cast<double>(j - l) * h);
            }
            double sample = (x < 0.0) ? static_cast<double>(j) * h
                                      : 1.0 - static_cast<double>(j) * h;
            acc += w * f(sample);
        }
        return acc;
    };
}

// Multilevel quasi-interpolant: level-0 coefficients plus detail coefficients
// (finer-level coefficients minus the refinement of the coarser level) up to
// k_bar. f must be evaluable on [-m, 1+m]; wrap functions native to [0,1]
// with extend_reflect. Coefficientwise linear in f.
inline SplineDecomposition quasi_interpolant(const std::function<double(double)>& f, int m,
                                             int k_bar) {
    if (m < 1) throw std::domain_error("quasi_interpolant: order must be >= 1");
    if (k_bar < 0 || k_bar > 24) throw std::invalid_argument("quasi_interpolant: level out of range");
    Vector lambda = detail::dual_weights(m);
    SplineDecomposition dec;
    dec.max_level = k_bar;
    Vector prev = detail::level_coefficients(f, m, 0, lambda);
    for (long i = 0; i < static_cast<long>(prev.size()); ++i)
        dec.atoms.push_back({m, 0, i - static_cast<long>(m), prev[static_cast<std::size_t>(i)]});
    for (int k = 1; k <= k_bar; ++k) {
        Vector cur = detail::level_coefficients(f, m, k, lambda);
        Vector up = detail::refine(prev, m, k);
        for (std::size_t i = 0; i < cur.size(); ++i)
            dec.atoms.push_back({m, k, static_cast<long>(i) - static_cast<long>(m), cur[i] - up[i]});
        prev = std::move(cur);
    }
    return dec;
}

inline double eval_atoms(const std::vector<SplineAtom>& atoms, double x) {
    double acc = 0.0;
    for (const auto& a : atoms) {
        if (a.coeff == 0.0) continue;
        acc += a.coeff * splinenet::bspline_eval(a.m, std::ldexp(x, a.k) - static_cast<double>(a.s));
    }
    return acc;
}

// Batch evaluation with per-level support windowing: only the <= m+1 atoms
// covering x are touched at each level.
inline Vector eval_atoms_grid(const std::vector<SplineAtom>& atoms, const Vector& xs) {
    Vector out(xs.size(), 0.0);
    if (atoms.empty()) return out;
    int m = atoms.front().m;
    struct Slice {
        long lo = 0;
        Vector c;
    };
    std::map<int, Slice> levels;
    for (const auto& a : atoms) {
        if (a.m != m) throw std::invalid_argument("eval_atoms_grid: mixed spline orders");
        auto [it, fresh] = levels.try_emplace(a.k);
        Slice& sl = it->second;
        if (fresh) {
            sl.lo = a.s;
            sl.c.assign(1, a.coeff);
        } else if (a.s < sl.lo) {
            sl.c.insert(sl.c.begin(), static_cast<std::size_t>(sl.lo - a.s), 0.0);
            sl.lo = a.s;
            sl.c[0] += a.coeff;
        } else {
            std::size_t idx = static_cast<std::size_t>(a.s - sl.lo);
            if (idx >= sl.c.size()) sl.c.resize(idx + 1, 0.0);
            sl.c[idx] += a.coeff;
        }
    }
    for (std::size_t t = 0; t < xs.size(); ++t) {
        double acc = 0.0;
        for (const auto& [k, sl] : levels) {
            double u = std::ldexp(xs[t], k);
            long jmax = static_cast<long>(std::floor(u));
            long jmin = jmax - static_cast<long>(m);
            long hi = sl.lo + static_cast<long>(sl.c.size()) - 1;
            for (long j = std::max(jmin, sl.lo); j <= std::min(jmax, hi); ++j) {
                double cj = sl.c[static_cast<std::size_t>(j - sl.lo)];
                if (cj != 0.0) acc += cj * splinenet::bspline_eval(m, u - static_cast<double>(j));
            }
        }
        out[t] = acc;
    }
    return out;
}

// Uniform midpoint grid used for all empirical error measurements.
inline Vector reference_grid(std::size_t n = 2048) {
    Vector xs(n);
    for (std::size_t t = 0; t < n; ++t)
        xs[t] = (static_cast<double>(t) + 0.5) / static_cast<double>(n);
    return xs;
}

// Sequence norm over levels: 2^{(alpha - d/p)k} ||{c_{k,.}}||_p combined with
// a sup over k (q = infinity, the default) or an l_q average.
inline double sequence_norm(const SplineDecomposition& dec, double alpha, double p,
                            double q = std::numeric_limits<double>::infinity(), int d = 1) {
    if (!(p > 0.0)) throw std::domain_error("sequence_norm: p must be positive");
    bool qinf = std::isinf(q);
    if (!qinf && !(q >= 1.0)) throw std::domain_error("sequence_norm: q must be >= 1 or infinity");
    if (d < 1) throw std::domain_error("sequence_norm: dimension must be >= 1");
    if (dec.atoms.empty()) return 0.0;
    std::map<int, double> lvl;  // k -> sum |c|^p
    for (const auto& a : dec.atoms) lvl[a.k] += std::pow(std::fabs(a.coeff), p);
    double expo = alpha - static_cast<double>(d) / p;
    double best = 0.0, accq = 0.0;
    for (const auto& [k, sp] : lvl) {
        double a_k = std::exp2(expo * static_cast<double>(k)) * std::pow(sp, 1.0 / p);
        if (qinf)
            best = std::max(best, a_k);
        else
            accq += std::pow(a_k, q);
    }
    return qinf ? best : std::pow(accq, 1.0 / q);
}

// Keeps every atom of the coarsest levels that fit the budget in full, then
// fills the remainder greedily by |coefficient| (ties: lower level, then
// smaller shift). target_error is the RMS distance to the full decomposition
// on the reference grid.
inline SparseApprox greedy_sparse_approx(const SplineDecomposition& dec, std::size_t budget) {
    if (budget == 0) throw std::invalid_argument("greedy_sparse_approx: budget must be >= 1");
    std::map<int, std::vector<SplineAtom>> by_level;
    for (const auto& a : dec.atoms) by_level[a.k].push_back(a);

    SparseApprox out;
    int k_base = std::numeric_limits<int>::min();
    for (const auto& [k, v] : by_level) {
        if (out.atoms.size() + v.size() > budget) break;
        out.atoms.insert(out.atoms.end(), v.begin(), v.end());
        k_base = k;
    }
    std::vector<SplineAtom> rest;
    for (const auto& [k, v] : by_level)
        if (k > k_base) rest.insert(rest.end(), v.begin(), v.end());
    std::sort(rest.begin(), rest.end(), [](const SplineAtom& a, const SplineAtom& b) {
        double fa = std::fabs(a.coeff), fb = std::fabs(b.coeff);
        if (fa != fb) return fa > fb;
        if (a.k != b.k) return a.k < b.k;
        return a.s < b.s;
    });
    for (const auto& a : rest) {
        if (out.atoms.size() == budget) break;
        out.atoms.push_back(a);
    }

    Vector xs = reference_grid();
    Vector full = eval_atoms_grid(dec.atoms, xs);
    Vector sparse = eval_atoms_grid(out.atoms, xs);
    double ss = 0.0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        double diff = full[t] - sparse[t];
        ss += diff * diff;
    }
    out.target_error = std::sqrt(ss / static_cast<double>(xs.size()));
    return out;
}

// l_p norm of the level-weighted coefficients {2^{k_i} coeff_i}.
inline double weighted_lp_coefficient_norm(const SparseApprox& approx, double p) {
    if (!(p > 0.0)) throw std::domain_error("weighted_lp_coefficient_norm: p must be positive");
    double acc = 0.0;
    for (const auto& a : approx.atoms)
        acc += std::pow(std::fabs(std::ldexp(a.coeff, a.k)), p);
    return std::pow(acc, 1.0 / p);
}

struct AssembledNet {
    pnn::ParallelNet net;
    double coeff_norm = 0.0;  // measured sum_j |a_j|^{2/L} over the subnetworks
};

// Builds one spline network per atom (each accurate to epsilon_net on its
// atom), folds coefficient * part-weight into the output layer of every part,
// and concatenates the parts into one parallel net, so the net matches the
// atom sum within epsilon_net * sum |coeff|. Zero-coefficient atoms are
// dropped. All atoms must share the spline order so the subnetwork shapes
// agree.
inline AssembledNet assemble_approx_net(const SparseApprox& approx, double epsilon_net) {
    if (approx.atoms.empty()) throw std::invalid_argument("assemble_approx_net: empty approximation");
    if (!(epsilon_net > 0.0)) throw std::invalid_argument("assemble_approx_net: epsilon must be positive");
    int m = approx.atoms.front().m;
    AssembledNet out;
    for (const auto& atom : approx.atoms) {
        if (atom.m != m) throw std::invalid_argument("assemble_approx_net: mixed spline orders");
        if (atom.coeff == 0.0) continue;
        double shift = std::ldexp(static_cast<double>(atom.s), -atom.k);
        splinenet::BsplineNetResult r = splinenet::build_bspline_net(m, atom.k, shift, epsilon_net);
        for (std::size_t t = 0; t < r.parts.size(); ++t) {
            pnn::Subnetwork sub = r.parts[t].net;
            double g = atom.coeff * r.a[t];
            for (double& v : sub.W.back().data) v *= g;
            for (double& v : sub.b.back()) v *= g;
            out.net.subnets.push_back(std::move(sub));
        }
    }
    if (out.net.subnets.empty())
        throw std::invalid_argument("assemble_approx_net: all coefficients are zero");
    out.net.validate();
    out.coeff_norm = pnn::to_constrained_form(out.net).budget;
    return out;
}

}  // namespace pnreg::besov
