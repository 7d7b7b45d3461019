#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dif/field.hpp"
#include "dif/rng.hpp"

namespace dif {

enum class Activation { Relu, Tanh, Identity };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        default: return "identity";
    }
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation: " + s);
}

struct Layer {
    int in = 0, out = 0;
    std::vector<double> w; // out x in, row-major
    std::vector<double> b; // out
    Activation act = Activation::Identity;
};

struct Mlp {
    std::vector<Layer> layers;

    int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
    int output_dim() const { return layers.empty() ? 0 : layers.back().out; }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.w.size() + l.b.size();
        return n;
    }

    // Uniform fan-in init: U[-1/sqrt(in), 1/sqrt(in)] for weights and biases.
    static Mlp make(const std::vector<int>& dims, const std::vector<Activation>& acts, Rng& rng) {
        if (dims.size() < 2) throw std::invalid_argument("mlp: need at least input and output dims");
        if (acts.size() != dims.size() - 1)
            throw std::invalid_argument("mlp: one activation per layer required");
        Mlp m;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            Layer layer;
            layer.in = dims[l];
            layer.out = dims[l + 1];
            layer.act = acts[l];
            double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
            layer.w.resize(static_cast<std::size_t>(layer.in) * layer.out);
            layer.b.resize(layer.out);
            for (auto& x : layer.w) x = rng.uniform(-bound, bound);
            for (auto& x : layer.b) x = rng.uniform(-bound, bound);
            m.layers.push_back(std::move(layer));
        }
        return m;
    }

    std::vector<int> dims() const {
        std::vector<int> d;
        if (layers.empty()) return d;
        d.push_back(layers.front().in);
        for (const auto& l : layers) d.push_back(l.out);
        return d;
    }

    void zero_final_layer() {
        if (layers.empty()) return;
        std::fill(layers.back().w.begin(), layers.back().w.end(), 0.0);
        std::fill(layers.back().b.begin(), layers.back().b.end(), 0.0);
    }
};

// Layer-order flattening: weights row-major then bias, per layer.
inline std::vector<double> flatten_params(const Mlp& m) {
    std::vector<double> flat;
    flat.reserve(m.param_count());
    for (const auto& l : m.layers) {
        flat.insert(flat.end(), l.w.begin(), l.w.end());
        flat.insert(flat.end(), l.b.begin(), l.b.end());
    }
    return flat;
}

inline void assign_params(Mlp& m, const std::vector<double>& flat) {
    if (flat.size() != m.param_count())
        throw std::invalid_argument("assign_params: flat size mismatch");
    std::size_t k = 0;
    for (auto& l : m.layers) {
        std::copy(flat.begin() + k, flat.begin() + k + l.w.size(), l.w.begin());
        k += l.w.size();
        std::copy(flat.begin() + k, flat.begin() + k + l.b.size(), l.b.begin());
        k += l.b.size();
    }
}

struct ForwardCache {
    std::vector<double> input;
    std::vector<std::vector<double>> pre;  // pre-activation per layer
    std::vector<std::vector<double>> post; // activation output per layer

    void resize_for(const Mlp& m) {
        pre.resize(m.layers.size());
        post.resize(m.layers.size());
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            pre[l].resize(m.layers[l].out);
            post[l].resize(m.layers[l].out);
        }
    }
};

inline double apply_activation(Activation a, double z) {
    switch (a) {
        case Activation::Relu: return z > 0 ? z : 0.0;
        case Activation::Tanh: return std::tanh(z);
        default: return z;
    }
}

// Derivative in terms of pre-activation z and activation output a.
inline double activation_grad(Activation act, double z, double a) {
    switch (act) {
        case Activation::Relu: return z > 0 ? 1.0 : 0.0;
        case Activation::Tanh: return 1.0 - a * a;
        default: return 1.0;
    }
}

// Workspace-style forward; returns the output activations held by the cache.
inline const std::vector<double>& mlp_forward(const Mlp& m, std::span<const double> x,
                                              ForwardCache& cache) {
    if (static_cast<int>(x.size()) != m.input_dim())
        throw std::invalid_argument("mlp_forward: input dimension mismatch");
    cache.resize_for(m);
    cache.input.assign(x.begin(), x.end());
    const std::vector<double>* a = &cache.input;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const Layer& layer = m.layers[l];
        std::vector<double>& z = cache.pre[l];
        std::vector<double>& out = cache.post[l];
        for (int o = 0; o < layer.out; ++o) {
            const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
            double acc = layer.b[o];
            for (int i = 0; i < layer.in; ++i) acc += wrow[i] * (*a)[i];
            z[o] = acc;
            out[o] = apply_activation(layer.act, acc);
        }
        a = &out;
    }
    return *a;
}

inline std::pair<std::vector<double>, ForwardCache> mlp_forward(const Mlp& m,
                                                                const std::vector<double>& x) {
    ForwardCache cache;
    std::vector<double> y = mlp_forward(m, std::span<const double>(x), cache);
    return {std::move(y), std::move(cache)};
}

struct MlpGrads {
    std::vector<std::vector<double>> dw, db;

    static MlpGrads zeros_like(const Mlp& m) {
        MlpGrads g;
        g.dw.resize(m.layers.size());
        g.db.resize(m.layers.size());
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            g.dw[l].assign(m.layers[l].w.size(), 0.0);
            g.db[l].assign(m.layers[l].b.size(), 0.0);
        }
        return g;
    }

    void zero() {
        for (auto& v : dw) std::fill(v.begin(), v.end(), 0.0);
        for (auto& v : db) std::fill(v.begin(), v.end(), 0.0);
    }

    void add(const MlpGrads& o) {
        for (std::size_t l = 0; l < dw.size(); ++l) {
            for (std::size_t i = 0; i < dw[l].size(); ++i) dw[l][i] += o.dw[l][i];
            for (std::size_t i = 0; i < db[l].size(); ++i) db[l][i] += o.db[l][i];
        }
    }

    void scale(double s) {
        for (auto& v : dw)
            for (auto& x : v) x *= s;
        for (auto& v : db)
            for (auto& x : v) x *= s;
    }
};

// Accumulates exact reverse-mode gradients of dot(y, dy) into grads; writes
// the input gradient into dx when non-null.
inline void mlp_backward_accumulate(const Mlp& m, const ForwardCache& cache,
                                    std::span<const double> dy, MlpGrads& grads,
                                    std::vector<double>* dx) {
    if (m.layers.empty()) throw std::invalid_argument("mlp_backward: empty network");
    if (static_cast<int>(dy.size()) != m.output_dim())
        throw std::invalid_argument("mlp_backward: output gradient dimension mismatch");
    if (cache.pre.size() != m.layers.size() || cache.input.size() != static_cast<std::size_t>(m.input_dim()))
        throw std::invalid_argument("mlp_backward: cache does not match network");

    std::vector<double> delta(dy.begin(), dy.end());
    std::vector<double> next;
    for (std::size_t li = m.layers.size(); li-- > 0;) {
        const Layer& layer = m.layers[li];
        const std::vector<double>& z = cache.pre[li];
        const std::vector<double>& a_out = cache.post[li];
        const std::vector<double>& a_in = li == 0 ? cache.input : cache.post[li - 1];
        for (int o = 0; o < layer.out; ++o) delta[o] *= activation_grad(layer.act, z[o], a_out[o]);

        double* dwrow = grads.dw[li].data();
        for (int o = 0; o < layer.out; ++o) {
            double d = delta[o];
            grads.db[li][o] += d;
            double* dst = dwrow + static_cast<std::size_t>(o) * layer.in;
            for (int i = 0; i < layer.in; ++i) dst[i] += d * a_in[i];
        }

        if (li > 0 || dx) {
            next.assign(layer.in, 0.0);
            for (int o = 0; o < layer.out; ++o) {
                double d = delta[o];
                const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
                for (int i = 0; i < layer.in; ++i) next[i] += d * wrow[i];
            }
            delta.swap(next);
        }
    }
    if (dx) *dx = delta;
}

inline std::pair<MlpGrads, std::vector<double>> mlp_backward(const Mlp& m, const ForwardCache& cache,
                                                             const std::vector<double>& dy) {
    MlpGrads g = MlpGrads::zeros_like(m);
    std::vector<double> dx;
    mlp_backward_accumulate(m, cache, std::span<const double>(dy), g, &dx);
    return {std::move(g), std::move(dx)};
}

// ---------------------------------------------------------------------------
// Adaptive-moment optimizer

struct AdamHyper {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamHyper hp;
    std::int64_t step = 0;
    MlpGrads m, v;

    static AdamState init(const Mlp& net, AdamHyper hp = {}) {
        AdamState s;
        s.hp = hp;
        s.m = MlpGrads::zeros_like(net);
        s.v = MlpGrads::zeros_like(net);
        return s;
    }
};

inline void adam_step_inplace(AdamState& s, Mlp& net, const MlpGrads& g) {
    if (g.dw.size() != net.layers.size())
        throw std::invalid_argument("adam_step: gradient shape mismatch");
    s.step += 1;
    double c1 = 1.0 - std::pow(s.hp.beta1, static_cast<double>(s.step));
    double c2 = 1.0 - std::pow(s.hp.beta2, static_cast<double>(s.step));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (g.dw[l].size() != net.layers[l].w.size() || g.db[l].size() != net.layers[l].b.size())
            throw std::invalid_argument("adam_step: gradient shape mismatch");
        auto update = [&](std::vector<double>& p, std::vector<double>& m1, std::vector<double>& v2,
                          const std::vector<double>& grad) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                double gi = grad[i];
                m1[i] = s.hp.beta1 * m1[i] + (1.0 - s.hp.beta1) * gi;
                v2[i] = s.hp.beta2 * v2[i] + (1.0 - s.hp.beta2) * gi * gi;
                double mhat = m1[i] / c1;
                double vhat = v2[i] / c2;
                p[i] -= s.hp.lr * mhat / (std::sqrt(vhat) + s.hp.eps);
            }
        };
        update(net.layers[l].w, s.m.dw[l], s.v.dw[l], g.dw[l]);
        update(net.layers[l].b, s.m.db[l], s.v.db[l], g.db[l]);
    }
}

// Pure-function variant returning the updated copies.
inline std::pair<Mlp, AdamState> adam_step(AdamState state, Mlp params, const MlpGrads& grads) {
    adam_step_inplace(state, params, grads);
    return {std::move(params), std::move(state)};
}

// ---------------------------------------------------------------------------
// Reparameterized Gaussian sampling: sample = mu + sigma * eps, so
// d(sample)/d(mu) = 1 and d(sample)/d(sigma) = eps.

inline double reparam_sample(const OccDistribution& dist, double epsilon) {
    return dist.mu + dist.sigma * epsilon;
}

// Numerically stable softplus and its derivative, used for the sigma head.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double softplus_grad(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// Finite-difference oracle and gradient check

// Central differences of L(params) = dot(y(params, x), dy).
inline MlpGrads fd_gradients(Mlp m, const std::vector<double>& x, const std::vector<double>& dy,
                             double h = 1e-4) {
    MlpGrads g = MlpGrads::zeros_like(m);
    ForwardCache cache;
    auto loss = [&]() {
        const std::vector<double>& y = mlp_forward(m, std::span<const double>(x), cache);
        double acc = 0;
        for (std::size_t j = 0; j < y.size(); ++j) acc += y[j] * dy[j];
        return acc;
    };
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        auto probe = [&](std::vector<double>& params, std::vector<double>& out) {
            for (std::size_t i = 0; i < params.size(); ++i) {
                double saved = params[i];
                params[i] = saved + h;
                double up = loss();
                params[i] = saved - h;
                double dn = loss();
                params[i] = saved;
                out[i] = (up - dn) / (2.0 * h);
            }
        };
        probe(m.layers[l].w, g.dw[l]);
        probe(m.layers[l].b, g.db[l]);
    }
    return g;
}

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_coordinate;
    bool pass = false;
};

// Shifts relu biases so every pre-activation sits at least `margin` away
// from its kink at the given input. Finite differences are only meaningful
// in a differentiable neighborhood; check gradients at the nudged point.
inline void nudge_relu_kinks(Mlp& m, const std::vector<double>& x, double margin = 1e-3) {
    std::vector<double> a(x);
    for (auto& layer : m.layers) {
        std::vector<double> next(layer.out);
        for (int o = 0; o < layer.out; ++o) {
            const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
            double z = layer.b[o];
            for (int i = 0; i < layer.in; ++i) z += wrow[i] * a[i];
            if (layer.act == Activation::Relu && std::abs(z) < margin) {
                double target = z >= 0 ? margin : -margin;
                layer.b[o] += target - z;
                z = target;
            }
            next[o] = apply_activation(layer.act, z);
        }
        a.swap(next);
    }
}

// Scaled relative error with a 1e-3 floor so finite-difference noise on
// near-zero gradients does not dominate.
inline double scaled_rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

inline GradCheckReport grad_check(const Mlp& m, const std::vector<double>& x, double tol) {
    if (!(tol > 0)) throw std::invalid_argument("grad_check: tol must be > 0");
    Rng rng(0xd1fc43cULL);
    std::vector<double> dy(m.output_dim());
    for (auto& v : dy) v = rng.normal();

    auto [y, cache] = mlp_forward(m, x);
    auto [analytic, dx] = mlp_backward(m, cache, dy);
    MlpGrads fd = fd_gradients(m, x, dy);

    GradCheckReport rep;
    auto scan = [&](const std::vector<double>& a, const std::vector<double>& f, std::size_t l,
                    const char* kind) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            double e = scaled_rel_err(a[i], f[i]);
            if (e > rep.max_rel_err) {
                rep.max_rel_err = e;
                rep.worst_coordinate =
                    "layer " + std::to_string(l) + " " + kind + "[" + std::to_string(i) + "]";
            }
        }
    };
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        scan(analytic.dw[l], fd.dw[l], l, "w");
        scan(analytic.db[l], fd.db[l], l, "b");
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

} // namespace dif
