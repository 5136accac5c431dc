#pragma once

// Parallel ReLU networks trained with weight decay, and their exact
// reformulation as a sparse linear combination of norm-capped subnetworks.
//
// A ParallelNet is a sum of M independent MLPs ("subnetworks") sharing input
// dimension d, hidden width w and depth L. Training minimizes
//     (1/n) sum_i (f(x_i) - y_i)^2 + lambda * sum_j sum_l ||W_j^(l)||_F^2
// with biases excluded from the penalty. Because ReLU is 1-homogeneous, the
// per-layer norms of each subnetwork can be rebalanced without changing the
// function; at a balanced optimum the penalty equals an l_{2/L} quasi-norm on
// per-subnetwork path coefficients, which to_constrained_form extracts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnreg/numkern.hpp"

namespace pnreg::pnn {

using pnreg::Matrix;
using pnreg::Vector;

// One MLP: f(x) = W[L-1] s(W[L-2] s(... s(W[0] x + b[0]) ...) + b[L-2]) + b[L-1]
// with s = ReLU applied between layers but not after the last one. Layer
// shapes only need to chain: rows(W[l]) == cols(W[l+1]). Trained nets use
// uniform hidden width; constructed nets may vary width per layer.
struct Subnetwork {
    std::size_t d = 0;               // input dimension == cols(W[0])
    std::vector<Matrix> W;           // W[l] maps layer l input to output
    std::vector<Vector> b;           // b[l].size() == rows(W[l])

    std::size_t depth() const { return W.size(); }

    void validate() const {
        if (W.size() < 2) throw std::invalid_argument("Subnetwork: depth must be >= 2");
        if (W.size() != b.size()) throw std::invalid_argument("Subnetwork: W/b length mismatch");
        if (W[0].cols != d) throw std::invalid_argument("Subnetwork: W[0] cols != d");
        for (std::size_t l = 0; l < W.size(); ++l) {
            if (b[l].size() != W[l].rows) throw std::invalid_argument("Subnetwork: bias shape mismatch at layer " + std::to_string(l));
            if (l + 1 < W.size() && W[l + 1].cols != W[l].rows)
                throw std::invalid_argument("Subnetwork: shape chain broken at layer " + std::to_string(l));
        }
        if (W.back().rows != 1) throw std::invalid_argument("Subnetwork: output layer must have one row");
    }
};

struct ParallelNet {
    std::vector<Subnetwork> subnets;
    double weight_decay = 0.0;

    std::size_t M() const { return subnets.size(); }
    std::size_t d() const { return subnets.empty() ? 0 : subnets[0].d; }
    std::size_t depth() const { return subnets.empty() ? 0 : subnets[0].depth(); }

    void validate() const {
        if (subnets.empty()) throw std::invalid_argument("ParallelNet: no subnetworks");
        for (const auto& s : subnets) s.validate();
        const auto& ref = subnets[0];
        for (const auto& s : subnets) {
            if (s.d != ref.d || s.depth() != ref.depth())
                throw std::invalid_argument("ParallelNet: subnetworks disagree on (d, L)");
            for (std::size_t l = 0; l < ref.depth(); ++l)
                if (s.W[l].rows != ref.W[l].rows || s.W[l].cols != ref.W[l].cols)
                    throw std::invalid_argument("ParallelNet: subnetworks disagree on layer shapes");
        }
    }
};

// Uniform-width trained-net constructor: W[0] is w x d, middle layers w x w,
// output 1 x w. Weights zero until init_he is called.
inline ParallelNet make_parallel_net(std::size_t M, std::size_t d, std::size_t w, std::size_t L) {
    if (L < 2) throw std::invalid_argument("make_parallel_net: L must be >= 2");
    if (M == 0 || d == 0 || w == 0) throw std::invalid_argument("make_parallel_net: M, d, w must be positive");
    ParallelNet net;
    net.subnets.resize(M);
    for (auto& s : net.subnets) {
        s.d = d;
        s.W.reserve(L);
        s.b.reserve(L);
        for (std::size_t l = 0; l < L; ++l) {
            std::size_t rows = (l + 1 == L) ? 1 : w;
            std::size_t cols = (l == 0) ? d : w;
            s.W.emplace_back(rows, cols);
            s.b.emplace_back(rows, 0.0);
        }
    }
    return net;
}

// He initialization: W ~ N(0, 2/fan_in), biases zero, final layer scaled by
// 1/M so the initial sum over subnetworks stays O(1).
inline void init_he(ParallelNet& net, Rng& rng) {
    const double minv = 1.0 / static_cast<double>(net.M());
    for (auto& s : net.subnets) {
        for (std::size_t l = 0; l < s.depth(); ++l) {
            double sd = std::sqrt(2.0 / static_cast<double>(s.W[l].cols));
            if (l + 1 == s.depth()) sd *= minv;
            for (auto& v : s.W[l].data) v = sd * rng.next_gaussian();
            std::fill(s.b[l].begin(), s.b[l].end(), 0.0);
        }
    }
}

inline double subnet_forward(const Subnetwork& s, const Vector& x) {
    if (x.size() != s.d) throw std::invalid_argument("subnet_forward: input dimension mismatch");
    Vector cur(x), next;
    for (std::size_t l = 0; l < s.depth(); ++l) {
        const Matrix& W = s.W[l];
        next.assign(W.rows, 0.0);
        for (std::size_t i = 0; i < W.rows; ++i) {
            double z = s.b[l][i];
            for (std::size_t k = 0; k < W.cols; ++k) z += W(i, k) * cur[k];
            next[i] = (l + 1 == s.depth()) ? z : std::max(z, 0.0);
        }
        cur.swap(next);
    }
    return cur[0];
}

inline double forward(const ParallelNet& net, const Vector& x) {
    double f = 0.0;
    for (const auto& s : net.subnets) f += subnet_forward(s, x);
    return f;
}

// ---------------------------------------------------------------------------
// Batched forward/backward. Activations are stored unit-major (h x n,
// row-major) so inner loops run over contiguous sample indices; the sample
// axis is processed in chunks small enough that every output row of a layer
// stays cache-hot across the whole fan-in loop. The input matrix is
// transposed once per batch so the first layer uses the same kernel.

namespace detail {

inline constexpr std::size_t kSampleChunk = 128;

// ReLU activations of the hidden layers, h_l x n each. Pre-activations are
// not stored: the backward mask only needs the sign, and A > 0 iff Z > 0.
struct SubnetTape {
    std::vector<Vector> A;
};

// out = W * A + b with optional ReLU; A is (cols(W) x n) row-major.
inline void layer_forward_batch(const Matrix& W, const Vector& b, const double* A, std::size_t n,
                                double* out, bool relu) {
    const std::size_t h = W.rows, w = W.cols;
    for (std::size_t t0 = 0; t0 < n; t0 += kSampleChunk) {
        const std::size_t c = std::min(kSampleChunk, n - t0);
        for (std::size_t i = 0; i < h; ++i) {
            double* __restrict orow = out + i * n + t0;
            const double bi = b[i];
            for (std::size_t t = 0; t < c; ++t) orow[t] = bi;
            for (std::size_t k = 0; k < w; ++k) {
                const double wik = W(i, k);
                if (wik == 0.0) continue;
                const double* __restrict arow = A + k * n + t0;
                for (std::size_t t = 0; t < c; ++t) orow[t] += wik * arow[t];
            }
            if (relu)
                for (std::size_t t = 0; t < c; ++t) orow[t] = orow[t] > 0.0 ? orow[t] : 0.0;
        }
    }
}

// Forward pass over the transposed input Xt (d x n); hidden activations land
// in the tape, the subnetwork's scalar output row in out_row.
inline void forward_subnet_batch(const Subnetwork& s, const double* Xt, std::size_t n,
                                 SubnetTape& tape, Vector& out_row) {
    const std::size_t L = s.depth();
    tape.A.resize(L - 1);
    for (std::size_t l = 0; l + 1 < L; ++l) {
        tape.A[l].resize(s.W[l].rows * n);
        const double* in = l == 0 ? Xt : tape.A[l - 1].data();
        layer_forward_batch(s.W[l], s.b[l], in, n, tape.A[l].data(), true);
    }
    out_row.resize(n);
    layer_forward_batch(s.W[L - 1], s.b[L - 1], tape.A[L - 2].data(), n, out_row.data(), false);
}

inline void transpose_input(const Matrix& X, Vector& Xt) {
    Xt.resize(X.cols * X.rows);
    for (std::size_t k = 0; k < X.cols; ++k)
        for (std::size_t t = 0; t < X.rows; ++t) Xt[k * X.rows + t] = X(t, k);
}

// Dot products and row sums with eight-way split accumulators; a single
// running sum defeats vectorization because FP addition cannot be
// reassociated by the compiler.
inline double dot8(const double* __restrict a, const double* __restrict b, std::size_t n) {
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t t = 0;
    for (; t + 8 <= n; t += 8)
        for (std::size_t j = 0; j < 8; ++j) acc[j] += a[t + j] * b[t + j];
    double s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (; t < n; ++t) s += a[t] * b[t];
    return s;
}

inline double sum8(const double* __restrict a, std::size_t n) {
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t t = 0;
    for (; t + 8 <= n; t += 8)
        for (std::size_t j = 0; j < 8; ++j) acc[j] += a[t + j];
    double s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (; t < n; ++t) s += a[t];
    return s;
}

}  // namespace detail

inline Vector predict_batch(const ParallelNet& net, const Matrix& X) {
    net.validate();
    if (X.cols != net.d()) throw std::invalid_argument("predict_batch: X dimension mismatch");
    Vector out(X.rows, 0.0);
    Vector xt, row;
    detail::transpose_input(X, xt);
    detail::SubnetTape tape;
    for (const auto& s : net.subnets) {
        detail::forward_subnet_batch(s, xt.data(), X.rows, tape, row);
        for (std::size_t t = 0; t < X.rows; ++t) out[t] += row[t];
    }
    return out;
}

// (1/n) sum_i (f(x_i) - y_i)^2 + lambda * sum over all weight matrices of
// squared Frobenius norm. Biases are not penalized.
inline double loss_weight_decay(const ParallelNet& net, const Matrix& X, const Vector& y, double lambda) {
    if (X.rows != y.size()) throw std::invalid_argument("loss_weight_decay: X/y size mismatch");
    if (X.rows == 0) throw std::invalid_argument("loss_weight_decay: empty data");
    Vector f = predict_batch(net, X);
    double mse = 0.0;
    for (std::size_t t = 0; t < f.size(); ++t) {
        double e = f[t] - y[t];
        mse += e * e;
    }
    mse /= static_cast<double>(X.rows);
    double pen = 0.0;
    for (const auto& s : net.subnets)
        for (const auto& W : s.W)
            for (double v : W.data) pen += v * v;
    return mse + lambda * pen;
}

struct SubnetGrad {
    std::vector<Matrix> dW;
    std::vector<Vector> db;
};

struct NetGrad {
    std::vector<SubnetGrad> subnets;
};

namespace detail {

// Backward through one subnetwork given dL/df_j = r (length n). Adds weight
// decay 2*lambda*W. ReLU subgradient at exactly zero is taken as zero.
// Gcur/Gprev are caller-owned scratch so sweeps over many subnetworks reuse
// one allocation.
inline void backward_subnet_batch(const Subnetwork& s, const double* Xt, std::size_t n,
                                  const SubnetTape& tape, const Vector& r, double lambda,
                                  SubnetGrad& g, Vector& Gcur, Vector& Gprev) {
    const std::size_t L = s.depth();
    g.dW.resize(L);
    g.db.resize(L);
    Gcur = r;  // gradient wrt pre-activation of current layer, h x n
    for (std::size_t l = L; l-- > 0;) {
        const Matrix& W = s.W[l];
        const std::size_t h = W.rows;
        Matrix& dW = g.dW[l];
        if (dW.rows != W.rows || dW.cols != W.cols) dW = Matrix(W.rows, W.cols);
        Vector& db = g.db[l];
        db.resize(h);  // every entry is assigned below
        const double* Ain = l == 0 ? Xt : tape.A[l - 1].data();
        for (std::size_t i = 0; i < h; ++i) {
            const double* grow = Gcur.data() + i * n;
            db[i] = sum8(grow, n);
            for (std::size_t k = 0; k < W.cols; ++k)
                dW(i, k) = dot8(grow, Ain + k * n, n) + 2.0 * lambda * W(i, k);
        }
        if (l == 0) break;
        // propagate to previous layer through W and the ReLU mask
        const std::size_t hp = s.W[l - 1].rows;
        Gprev.resize(hp * n);
        for (std::size_t t0 = 0; t0 < n; t0 += kSampleChunk) {
            const std::size_t c = std::min(kSampleChunk, n - t0);
            for (std::size_t k = 0; k < hp; ++k) {
                double* __restrict gp = Gprev.data() + k * n + t0;
                for (std::size_t t = 0; t < c; ++t) gp[t] = 0.0;
                for (std::size_t i = 0; i < h; ++i) {
                    const double wik = W(i, k);
                    if (wik == 0.0) continue;
                    const double* __restrict grow = Gcur.data() + i * n + t0;
                    for (std::size_t t = 0; t < c; ++t) gp[t] += wik * grow[t];
                }
                const double* __restrict arow = tape.A[l - 1].data() + k * n + t0;
                for (std::size_t t = 0; t < c; ++t)
                    if (!(arow[t] > 0.0)) gp[t] = 0.0;
            }
        }
        Gcur.swap(Gprev);
    }
}

// Reusable buffers for repeated full-batch backward passes over one net.
// Only one subnetwork's activations are held at a time: the backward pass
// recomputes each subnetwork's forward right before differentiating it,
// which keeps the working set cache-sized at any M.
struct BackwardWorkspace {
    SubnetTape tape;
    Vector xt, f, r, frow, Gcur, Gprev;
};

}  // namespace detail

namespace detail {

// Full-batch gradient computed into caller-owned buffers; `ws` and `g` keep
// their allocations across calls so a training loop allocates once.
inline void backward_into(const ParallelNet& net, const Matrix& X, const Vector& y, double lambda,
                          BackwardWorkspace& ws, NetGrad& g, double* loss_out) {
    net.validate();
    if (X.rows != y.size() || X.rows == 0) throw std::invalid_argument("backward: X/y size mismatch");
    const std::size_t n = X.rows;
    transpose_input(X, ws.xt);
    ws.f.assign(n, 0.0);
    for (std::size_t j = 0; j < net.M(); ++j) {
        forward_subnet_batch(net.subnets[j], ws.xt.data(), n, ws.tape, ws.frow);
        for (std::size_t t = 0; t < n; ++t) ws.f[t] += ws.frow[t];
    }
    ws.r.resize(n);
    double mse = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        double e = ws.f[t] - y[t];
        mse += e * e;
        ws.r[t] = 2.0 * e / static_cast<double>(n);
    }
    if (loss_out) {
        double pen = 0.0;
        for (const auto& s : net.subnets)
            for (const auto& W : s.W)
                for (double v : W.data) pen += v * v;
        *loss_out = mse / static_cast<double>(n) + lambda * pen;
    }
    g.subnets.resize(net.M());
    for (std::size_t j = 0; j < net.M(); ++j) {
        // Recompute this subnetwork's activations, then differentiate.
        forward_subnet_batch(net.subnets[j], ws.xt.data(), n, ws.tape, ws.frow);
        backward_subnet_batch(net.subnets[j], ws.xt.data(), n, ws.tape, ws.r, lambda,
                              g.subnets[j], ws.Gcur, ws.Gprev);
    }
}

}  // namespace detail

// Full-batch gradient of loss_weight_decay with respect to every weight and
// bias. Also reports the loss so training evaluates each epoch once.
inline NetGrad backward(const ParallelNet& net, const Matrix& X, const Vector& y, double lambda,
                        double* loss_out = nullptr) {
    detail::BackwardWorkspace ws;
    NetGrad g;
    detail::backward_into(net, X, y, lambda, ws, g, loss_out);
    return g;
}

struct TrainConfig {
    std::size_t epochs = 1000;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;
    // Layerwise pretraining: start from a two-layer net built from the given
    // net's first and last layers, grow one identity-initialized hidden layer
    // at a time (weight decay off), then train the full-depth net with
    // weight_decay enabled for `epochs`.
    bool grow_layerwise = false;
    std::size_t grow_epochs = 200;
};

namespace detail {

struct AdamState {
    std::vector<SubnetGrad> m, v;
    std::size_t t = 0;

    void init_like(const ParallelNet& net) {
        m.resize(net.M());
        v.resize(net.M());
        for (std::size_t j = 0; j < net.M(); ++j) {
            const auto& s = net.subnets[j];
            m[j].dW.clear();
            m[j].db.clear();
            v[j].dW.clear();
            v[j].db.clear();
            for (std::size_t l = 0; l < s.depth(); ++l) {
                m[j].dW.emplace_back(s.W[l].rows, s.W[l].cols);
                m[j].db.emplace_back(s.b[l].size(), 0.0);
                v[j].dW.emplace_back(s.W[l].rows, s.W[l].cols);
                v[j].db.emplace_back(s.b[l].size(), 0.0);
            }
        }
    }
};

inline void adam_update(double& p, double g, double& m, double& v, double lr, double b1, double b2,
                        double eps, double bc1, double bc2) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    p -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
}

inline void adam_step(ParallelNet& net, const NetGrad& g, AdamState& st, const TrainConfig& cfg) {
    ++st.t;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
    for (std::size_t j = 0; j < net.M(); ++j) {
        auto& s = net.subnets[j];
        for (std::size_t l = 0; l < s.depth(); ++l) {
            auto& W = s.W[l].data;
            const auto& dW = g.subnets[j].dW[l].data;
            auto& mW = st.m[j].dW[l].data;
            auto& vW = st.v[j].dW[l].data;
            for (std::size_t i = 0; i < W.size(); ++i)
                adam_update(W[i], dW[i], mW[i], vW[i], cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, bc1, bc2);
            auto& B = s.b[l];
            const auto& dB = g.subnets[j].db[l];
            auto& mB = st.m[j].db[l];
            auto& vB = st.v[j].db[l];
            for (std::size_t i = 0; i < B.size(); ++i)
                adam_update(B[i], dB[i], mB[i], vB[i], cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, bc1, bc2);
        }
    }
}

// Runs `epochs` Adam steps on `net`, appending the loss measured before each
// step to history. Throws on non-finite loss.
inline void train_phase(ParallelNet& net, const Matrix& X, const Vector& y, const TrainConfig& cfg,
                        double lambda, std::size_t epochs, Vector& history,
                        std::vector<Subnetwork>* best_subnets = nullptr, double* best_loss = nullptr) {
    AdamState st;
    st.init_like(net);
    BackwardWorkspace ws;
    NetGrad g;
    for (std::size_t e = 0; e < epochs; ++e) {
        double loss = 0.0;
        backward_into(net, X, y, lambda, ws, g, &loss);
        if (!std::isfinite(loss)) throw numerical_error("train: diverged (non-finite loss) at epoch " + std::to_string(history.size()));
        history.push_back(loss);
        if (best_loss != nullptr && loss < *best_loss) {
            *best_loss = loss;
            *best_subnets = net.subnets;
        }
        adam_step(net, g, st, cfg);
    }
}

// Insert an identity hidden layer just before the output layer. Its input is
// post-ReLU and therefore nonnegative, so ReLU(I x) = x and the function is
// unchanged.
inline void grow_one_layer(ParallelNet& net) {
    for (auto& s : net.subnets) {
        std::size_t w = s.W[s.depth() - 1].cols;
        Matrix id(w, w);
        for (std::size_t i = 0; i < w; ++i) id(i, i) = 1.0;
        s.W.insert(s.W.end() - 1, id);
        s.b.insert(s.b.end() - 1, Vector(w, 0.0));
    }
}

}  // namespace detail

// Full-batch Adam training. Returns the loss history: one entry per epoch
// (measured before that epoch's step) plus the final loss. If the final loss
// exceeds the best one seen during the last phase, those best parameters are
// restored, so the final entry never exceeds any entry of that phase.
inline Vector train(ParallelNet& net, const Matrix& X, const Vector& y, const TrainConfig& cfg) {
    net.validate();
    if (X.rows != y.size() || X.rows == 0) throw std::invalid_argument("train: X/y size mismatch");
    Vector history;
    const std::size_t target_depth = net.depth();
    if (cfg.grow_layerwise && target_depth > 2) {
        ParallelNet shallow;
        shallow.weight_decay = net.weight_decay;
        shallow.subnets.resize(net.M());
        for (std::size_t j = 0; j < net.M(); ++j) {
            auto& s = shallow.subnets[j];
            const auto& full = net.subnets[j];
            s.d = full.d;
            s.W = {full.W.front(), full.W.back()};
            s.b = {full.b.front(), full.b.back()};
        }
        detail::train_phase(shallow, X, y, cfg, 0.0, cfg.grow_epochs, history);
        while (shallow.depth() < target_depth) {
            detail::grow_one_layer(shallow);
            detail::train_phase(shallow, X, y, cfg, 0.0, cfg.grow_epochs, history);
        }
        net.subnets = std::move(shallow.subnets);
    }
    std::vector<Subnetwork> best;
    double best_loss = std::numeric_limits<double>::infinity();
    detail::train_phase(net, X, y, cfg, cfg.weight_decay, cfg.epochs, history, &best, &best_loss);

    double final_loss = loss_weight_decay(net, X, y, cfg.weight_decay);
    if (!best.empty() && best_loss < final_loss) {
        net.subnets = std::move(best);
        final_loss = best_loss;
    }
    history.push_back(final_loss);
    return history;
}

// ---------------------------------------------------------------------------
// Homogeneity rebalancing and the constrained form.

namespace detail {

inline std::vector<double> layer_norms(const Subnetwork& s) {
    std::vector<double> g(s.depth());
    for (std::size_t l = 0; l < s.depth(); ++l) g[l] = frobenius_norm(s.W[l]);
    return g;
}

// Scale layer l weights by gamma[l]; bias l picks up the cumulative product
// so every pre-activation scales uniformly and ReLU commutes with it. When
// prod(gamma) == 1 the function is preserved exactly.
inline void scale_layers(Subnetwork& s, const std::vector<double>& gamma) {
    double cum = 1.0;
    for (std::size_t l = 0; l < s.depth(); ++l) {
        cum *= gamma[l];
        for (auto& v : s.W[l].data) v *= gamma[l];
        for (auto& v : s.b[l]) v *= cum;
    }
}

}  // namespace detail

// Rescale every subnetwork so its layers share one Frobenius norm (the
// geometric mean of the originals). The computed function is unchanged and
// the weight-decay penalty never increases (AM-GM). Fully dead subnetworks
// (all weights zero) are left untouched; a zero-norm layer alongside nonzero
// ones cannot be rebalanced and raises numerical_error.
inline ParallelNet rebalance(const ParallelNet& net) {
    net.validate();
    ParallelNet out = net;
    for (std::size_t j = 0; j < out.M(); ++j) {
        auto& s = out.subnets[j];
        auto g = detail::layer_norms(s);
        std::size_t zeros = 0;
        for (double v : g) zeros += (v == 0.0);
        if (zeros == g.size()) continue;
        if (zeros > 0)
            throw numerical_error("rebalance: subnetwork " + std::to_string(j) +
                                  " has a zero-norm layer on a nonzero output path");
        double logmean = 0.0;
        for (double v : g) logmean += std::log(v);
        double gm = std::exp(logmean / static_cast<double>(g.size()));
        std::vector<double> gamma(g.size());
        for (std::size_t l = 0; l < g.size(); ++l) gamma[l] = gm / g[l];
        detail::scale_layers(s, gamma);
    }
    return out;
}

// Equivalent constrained model: f(x) = sum_j a_j fbar_j(x) + intercept, where
// fbar_j has per-layer Frobenius norms pinned to c1*sqrt(d) (first layer) and
// c1*sqrt(w) (later layers), and a_j is the product of the original layer
// norms divided by those caps. Subnetworks with a zero-norm layer compute a
// constant; they get a_j = 0 and their constant joins the intercept. The
// budget field reports sum_j |a_j|^(2/L).
struct ConstrainedForm {
    std::vector<Subnetwork> normalized_subnets;
    Vector a;
    double budget = 0.0;
    double intercept = 0.0;
    double c1 = 1.0;
};

inline ConstrainedForm to_constrained_form(const ParallelNet& net, double c1 = 1.0) {
    net.validate();
    if (!(c1 > 0.0)) throw std::invalid_argument("to_constrained_form: c1 must be > 0");
    ConstrainedForm cf;
    cf.c1 = c1;
    cf.a.resize(net.M());
    cf.normalized_subnets.resize(net.M());
    for (std::size_t j = 0; j < net.M(); ++j) {
        const auto& s = net.subnets[j];
        const std::size_t L = s.depth();
        auto g = detail::layer_norms(s);
        bool dead = false;
        for (double v : g) dead = dead || (v == 0.0);
        if (dead) {
            // constant function: only bias paths contribute
            cf.a[j] = 0.0;
            cf.normalized_subnets[j] = s;
            cf.intercept += subnet_forward(s, Vector(s.d, 0.0));
            continue;
        }
        Subnetwork ns = s;
        std::vector<double> beta(L), gamma(L);
        double aj = 1.0;
        for (std::size_t l = 0; l < L; ++l) {
            double fan = (l == 0) ? static_cast<double>(s.d) : static_cast<double>(s.W[l].cols);
            beta[l] = c1 * std::sqrt(fan);
            gamma[l] = beta[l] / g[l];
            aj *= g[l] / beta[l];
        }
        detail::scale_layers(ns, gamma);
        cf.a[j] = aj;
        cf.normalized_subnets[j] = std::move(ns);
    }
    double p = 2.0 / static_cast<double>(net.depth());
    cf.budget = lp_norm_p(cf.a, p);
    return cf;
}

inline double constrained_forward(const ConstrainedForm& cf, const Vector& x) {
    double f = cf.intercept;
    for (std::size_t j = 0; j < cf.normalized_subnets.size(); ++j)
        if (cf.a[j] != 0.0) f += cf.a[j] * subnet_forward(cf.normalized_subnets[j], x);
    return f;
}

// Indices of subnetworks whose output varies by more than tol over the grid.
// Constant subnetworks (dead or bias-only) are inactive.
inline std::vector<std::size_t> active_subnetworks(const ParallelNet& net, const Matrix& X_grid, double tol) {
    net.validate();
    if (X_grid.cols != net.d()) throw std::invalid_argument("active_subnetworks: grid dimension mismatch");
    if (!(tol >= 0.0)) throw std::invalid_argument("active_subnetworks: tol must be >= 0");
    std::vector<std::size_t> idx;
    Vector x(net.d());
    for (std::size_t j = 0; j < net.M(); ++j) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t t = 0; t < X_grid.rows; ++t) {
            for (std::size_t k = 0; k < X_grid.cols; ++k) x[k] = X_grid(t, k);
            double v = subnet_forward(net.subnets[j], x);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo > tol) idx.push_back(j);
    }
    return idx;
}

}  // namespace pnreg::pnn
