#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lungkit/nn/ops.hpp"
#include "lungkit/nn/tensor.hpp"
#include "lungkit/rng.hpp"

namespace lungkit::nn {

enum class LayerKind {
    conv,
    tconv,
    maxpool,
    dense,
    relu,
    sigmoid,
    dropout,
    batchnorm,
    flatten,
    concat_skip,
};

const char* layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int filters = 0;      // conv/tconv output channels, dense units
    int kernel = 0;       // conv kernel size (square)
    int stride = 1;       // conv stride
    Padding padding = Padding::valid;
    double rate = 0.0;    // dropout rate
    int skip_source = -1; // layer index whose output concat_skip appends

    static LayerSpec make_conv(int filters, int kernel, Padding pad, int stride = 1) {
        LayerSpec s;
        s.kind = LayerKind::conv;
        s.filters = filters;
        s.kernel = kernel;
        s.stride = stride;
        s.padding = pad;
        return s;
    }
    static LayerSpec make_tconv(int filters) {
        LayerSpec s;
        s.kind = LayerKind::tconv;
        s.filters = filters;
        s.kernel = 2;
        s.stride = 2;
        return s;
    }
    static LayerSpec make_dense(int units) {
        LayerSpec s;
        s.kind = LayerKind::dense;
        s.filters = units;
        return s;
    }
    static LayerSpec make_dropout(double rate) {
        LayerSpec s;
        s.kind = LayerKind::dropout;
        s.rate = rate;
        return s;
    }
    static LayerSpec make_concat(int source) {
        LayerSpec s;
        s.kind = LayerKind::concat_skip;
        s.skip_source = source;
        return s;
    }
    static LayerSpec make(LayerKind kind) {
        LayerSpec s;
        s.kind = kind;
        return s;
    }
};

enum class Task { segmentation, classification };

struct NetworkSpec {
    Task task = Task::classification;
    int in_channels = 1;
    int in_h = 0;
    int in_w = 0;
    std::vector<LayerSpec> layers;
};

struct Shape {
    int c = 0, h = 0, w = 0;
    bool operator==(const Shape&) const = default;
};

/// Output shape of every layer in order; throws on any inconsistency.
inline std::vector<Shape> infer_shapes(const NetworkSpec& spec) {
    if (spec.in_channels < 1 || spec.in_h < 1 || spec.in_w < 1)
        throw std::invalid_argument("network: input shape must be positive");
    std::vector<Shape> shapes;
    shapes.reserve(spec.layers.size());
    Shape cur{spec.in_channels, spec.in_h, spec.in_w};
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        switch (l.kind) {
            case LayerKind::conv: {
                if (l.filters < 1 || l.kernel < 1 || l.stride < 1)
                    throw std::invalid_argument("conv layer: filters, kernel and stride must be positive");
                const ConvGeometry g =
                    conv_geometry(cur.h, cur.w, l.kernel, l.kernel, l.stride, l.padding);
                cur = {l.filters, g.out_h, g.out_w};
                break;
            }
            case LayerKind::tconv:
                if (l.filters < 1)
                    throw std::invalid_argument("tconv layer: filters must be positive");
                cur = {l.filters, cur.h * 2, cur.w * 2};
                break;
            case LayerKind::maxpool:
                if (cur.h < 2 || cur.w < 2)
                    throw std::invalid_argument("maxpool layer: input smaller than window");
                cur = {cur.c, (cur.h + 1) / 2, (cur.w + 1) / 2};
                break;
            case LayerKind::dense:
                if (l.filters < 1)
                    throw std::invalid_argument("dense layer: units must be positive");
                cur = {l.filters, 1, 1};
                break;
            case LayerKind::dropout:
                if (l.rate < 0.0 || l.rate >= 1.0)
                    throw std::invalid_argument("dropout layer: rate must be in [0,1)");
                break;
            case LayerKind::flatten:
                cur = {cur.c * cur.h * cur.w, 1, 1};
                break;
            case LayerKind::concat_skip: {
                if (l.skip_source < 0 || static_cast<std::size_t>(l.skip_source) >= i)
                    throw std::invalid_argument("concat_skip layer: source must be an earlier layer");
                const Shape& src = shapes[static_cast<std::size_t>(l.skip_source)];
                if (src.h != cur.h || src.w != cur.w)
                    throw std::invalid_argument("concat_skip layer: source spatial shape mismatch");
                cur = {cur.c + src.c, cur.h, cur.w};
                break;
            }
            case LayerKind::relu:
            case LayerKind::sigmoid:
            case LayerKind::batchnorm:
                break;
        }
        shapes.push_back(cur);
    }
    return shapes;
}

template <typename T>
struct LayerParams {
    Tensor4<T> w, b, gamma, beta, running_mean, running_var;

    template <typename U>
    LayerParams<U> cast() const {
        LayerParams<U> out;
        out.w = w.template cast<U>();
        out.b = b.template cast<U>();
        out.gamma = gamma.template cast<U>();
        out.beta = beta.template cast<U>();
        out.running_mean = running_mean.template cast<U>();
        out.running_var = running_var.template cast<U>();
        return out;
    }
};

template <typename T>
struct ForwardCache {
    Tensor4<T> input;
    std::vector<Tensor4<T>> outputs;
    std::vector<std::vector<std::size_t>> pool_routing;
    std::vector<std::vector<std::uint8_t>> drop_mask;
    std::vector<BatchNormCache<T>> bn;
};

inline constexpr double kBatchNormMomentum = 0.9;
inline constexpr double kBatchNormEps = 1e-5;

template <typename T>
class Model {
   public:
    NetworkSpec spec;
    std::vector<Shape> shapes;
    std::vector<LayerParams<T>> params;

    Model() = default;
    explicit Model(NetworkSpec s) : spec(std::move(s)), shapes(infer_shapes(spec)) {
        params.resize(spec.layers.size());
        Shape cur{spec.in_channels, spec.in_h, spec.in_w};
        for (std::size_t i = 0; i < spec.layers.size(); ++i) {
            const LayerSpec& l = spec.layers[i];
            LayerParams<T>& p = params[i];
            switch (l.kind) {
                case LayerKind::conv:
                    p.w = Tensor4<T>(l.filters, cur.c, l.kernel, l.kernel);
                    p.b = Tensor4<T>(1, l.filters, 1, 1);
                    break;
                case LayerKind::tconv:
                    p.w = Tensor4<T>(cur.c, l.filters, 2, 2);  // no bias
                    break;
                case LayerKind::dense:
                    p.w = Tensor4<T>(1, 1, cur.c * cur.h * cur.w, l.filters);
                    p.b = Tensor4<T>(1, 1, 1, l.filters);
                    break;
                case LayerKind::batchnorm:
                    p.gamma = Tensor4<T>(1, cur.c, 1, 1);
                    p.beta = Tensor4<T>(1, cur.c, 1, 1);
                    p.running_mean = Tensor4<T>(1, cur.c, 1, 1);
                    p.running_var = Tensor4<T>(1, cur.c, 1, 1);
                    break;
                default:
                    break;
            }
            cur = shapes[i];
        }
    }

    /// Glorot-uniform weights, zero biases, identity batchnorm; all draws
    /// come from one generator in layer order so a seed pins the network.
    void init_weights(std::uint64_t seed) {
        Rng rng(seed);
        for (std::size_t i = 0; i < spec.layers.size(); ++i) {
            const LayerSpec& l = spec.layers[i];
            LayerParams<T>& p = params[i];
            switch (l.kind) {
                case LayerKind::conv: {
                    const double fan_in = static_cast<double>(p.w.c) * p.w.h * p.w.w;
                    const double fan_out = static_cast<double>(p.w.n) * p.w.h * p.w.w;
                    fill_glorot(p.w, fan_in, fan_out, rng);
                    std::fill(p.b.data.begin(), p.b.data.end(), T{0});
                    break;
                }
                case LayerKind::tconv: {
                    const double fan_in = static_cast<double>(p.w.n) * p.w.h * p.w.w;
                    const double fan_out = static_cast<double>(p.w.c) * p.w.h * p.w.w;
                    fill_glorot(p.w, fan_in, fan_out, rng);
                    break;
                }
                case LayerKind::dense: {
                    fill_glorot(p.w, p.w.h, p.w.w, rng);
                    std::fill(p.b.data.begin(), p.b.data.end(), T{0});
                    break;
                }
                case LayerKind::batchnorm:
                    std::fill(p.gamma.data.begin(), p.gamma.data.end(), T{1});
                    std::fill(p.beta.data.begin(), p.beta.data.end(), T{0});
                    std::fill(p.running_mean.data.begin(), p.running_mean.data.end(), T{0});
                    std::fill(p.running_var.data.begin(), p.running_var.data.end(), T{1});
                    break;
                default:
                    break;
            }
        }
    }

    Tensor4<T> forward(const Tensor4<T>& x, bool train, Rng& rng, ForwardCache<T>& cache) {
        check_input(x);
        const std::size_t n = spec.layers.size();
        cache.input = x;
        cache.outputs.assign(n, {});
        cache.pool_routing.assign(n, {});
        cache.drop_mask.assign(n, {});
        cache.bn.assign(n, {});
        const Tensor4<T>* cur = &cache.input;
        for (std::size_t i = 0; i < n; ++i) {
            const LayerSpec& l = spec.layers[i];
            LayerParams<T>& p = params[i];
            switch (l.kind) {
                case LayerKind::conv:
                    cache.outputs[i] = conv2d_apply(*cur, p.w, p.b, l.stride, l.padding);
                    break;
                case LayerKind::tconv:
                    cache.outputs[i] = tconv2d_apply(*cur, p.w);
                    break;
                case LayerKind::maxpool:
                    cache.outputs[i] = maxpool2d_apply(*cur, cache.pool_routing[i]);
                    break;
                case LayerKind::dense:
                    cache.outputs[i] = dense_apply(*cur, p.w, p.b);
                    break;
                case LayerKind::relu:
                    cache.outputs[i] = relu_apply(*cur);
                    break;
                case LayerKind::sigmoid:
                    cache.outputs[i] = sigmoid_apply(*cur);
                    break;
                case LayerKind::dropout:
                    cache.outputs[i] = dropout_apply(*cur, l.rate, train, rng, cache.drop_mask[i]);
                    break;
                case LayerKind::batchnorm:
                    cache.outputs[i] =
                        train ? batchnorm_apply_train(*cur, p.gamma, p.beta, p.running_mean,
                                                      p.running_var, kBatchNormMomentum,
                                                      kBatchNormEps, cache.bn[i])
                              : batchnorm_apply_infer(*cur, p.gamma, p.beta, p.running_mean,
                                                      p.running_var, kBatchNormEps);
                    break;
                case LayerKind::flatten: {
                    Tensor4<T> out = *cur;
                    out.c = cur->c * cur->h * cur->w;
                    out.h = out.w = 1;
                    cache.outputs[i] = std::move(out);
                    break;
                }
                case LayerKind::concat_skip: {
                    const Tensor4<T>& src = cache.outputs[static_cast<std::size_t>(l.skip_source)];
                    cache.outputs[i] = concat_channels(*cur, src);
                    break;
                }
            }
            cur = &cache.outputs[i];
        }
        return cache.outputs.empty() ? x : cache.outputs.back();
    }

    /// Inference pass: dropout disabled, batchnorm uses running statistics.
    Tensor4<T> forward(const Tensor4<T>& x) const {
        Rng rng(0);
        ForwardCache<T> cache;
        // running stats are only written in train mode, so this is safe
        return const_cast<Model*>(this)->forward(x, false, rng, cache);
    }

    /// Backpropagates `seed_grad`, taken as the gradient with respect to the
    /// output of layer `from_layer` (default: the last layer). Returns the
    /// gradient with respect to the network input; parameter gradients land
    /// in `grads`, shaped like `params`.
    Tensor4<T> backward(const ForwardCache<T>& cache, const Tensor4<T>& seed_grad,
                        std::vector<LayerParams<T>>& grads, int from_layer = -1) const {
        const int n = static_cast<int>(spec.layers.size());
        if (from_layer < 0) from_layer = n - 1;
        grads.assign(static_cast<std::size_t>(n), {});
        std::vector<Tensor4<T>> d_out(static_cast<std::size_t>(n));
        d_out[static_cast<std::size_t>(from_layer)] = seed_grad;
        Tensor4<T> d_input(cache.input.n, cache.input.c, cache.input.h, cache.input.w);
        auto route_back = [&](int layer, Tensor4<T>&& d) {
            if (layer == 0) {
                accumulate(d_input, d);
            } else {
                Tensor4<T>& slot = d_out[static_cast<std::size_t>(layer - 1)];
                if (slot.empty())
                    slot = std::move(d);
                else
                    accumulate(slot, d);
            }
        };
        for (int i = from_layer; i >= 0; --i) {
            Tensor4<T>& dy = d_out[static_cast<std::size_t>(i)];
            if (dy.empty()) continue;  // no gradient reached this layer
            const LayerSpec& l = spec.layers[static_cast<std::size_t>(i)];
            const LayerParams<T>& p = params[static_cast<std::size_t>(i)];
            LayerParams<T>& g = grads[static_cast<std::size_t>(i)];
            const Tensor4<T>& in =
                i == 0 ? cache.input : cache.outputs[static_cast<std::size_t>(i - 1)];
            switch (l.kind) {
                case LayerKind::conv: {
                    Tensor4<T> dx;
                    conv2d_grad(in, p.w, dy, l.stride, l.padding, dx, g.w, g.b);
                    route_back(i, std::move(dx));
                    break;
                }
                case LayerKind::tconv: {
                    Tensor4<T> dx;
                    tconv2d_grad(in, p.w, dy, dx, g.w);
                    route_back(i, std::move(dx));
                    break;
                }
                case LayerKind::maxpool:
                    route_back(i, maxpool2d_grad(in, dy, cache.pool_routing[static_cast<std::size_t>(i)]));
                    break;
                case LayerKind::dense: {
                    Tensor4<T> dx;
                    dense_grad(in, p.w, dy, dx, g.w, g.b);
                    route_back(i, std::move(dx));
                    break;
                }
                case LayerKind::relu:
                    route_back(i, relu_grad(in, dy));
                    break;
                case LayerKind::sigmoid:
                    route_back(i, sigmoid_grad(cache.outputs[static_cast<std::size_t>(i)], dy));
                    break;
                case LayerKind::dropout:
                    route_back(i, dropout_grad(dy, l.rate, cache.drop_mask[static_cast<std::size_t>(i)]));
                    break;
                case LayerKind::batchnorm: {
                    Tensor4<T> dx;
                    batchnorm_grad(dy, p.gamma, cache.bn[static_cast<std::size_t>(i)], dx, g.gamma,
                                   g.beta);
                    route_back(i, std::move(dx));
                    break;
                }
                case LayerKind::flatten: {
                    Tensor4<T> dx = dy;
                    dx.c = in.c;
                    dx.h = in.h;
                    dx.w = in.w;
                    route_back(i, std::move(dx));
                    break;
                }
                case LayerKind::concat_skip: {
                    const Tensor4<T>& src = cache.outputs[static_cast<std::size_t>(l.skip_source)];
                    Tensor4<T> d_main(in.n, in.c, in.h, in.w);
                    Tensor4<T> d_skip(src.n, src.c, src.h, src.w);
                    split_channels(dy, d_main, d_skip);
                    route_back(i, std::move(d_main));
                    Tensor4<T>& slot = d_out[static_cast<std::size_t>(l.skip_source)];
                    if (slot.empty())
                        slot = std::move(d_skip);
                    else
                        accumulate(slot, d_skip);
                    break;
                }
            }
        }
        return d_input;
    }

    /// Trainable tensors (weights, biases, batchnorm scale/shift) in a fixed
    /// layer order; gradient lists produced by backward() line up with this.
    std::vector<Tensor4<T>*> trainable_tensors() {
        return collect_trainable(params);
    }
    static std::vector<Tensor4<T>*> collect_trainable(std::vector<LayerParams<T>>& set) {
        std::vector<Tensor4<T>*> out;
        for (auto& p : set) {
            if (!p.w.empty()) out.push_back(&p.w);
            if (!p.b.empty()) out.push_back(&p.b);
            if (!p.gamma.empty()) out.push_back(&p.gamma);
            if (!p.beta.empty()) out.push_back(&p.beta);
        }
        return out;
    }

    /// All persisted tensors with stable names: L<i>.w, L<i>.b, L<i>.gamma,
    /// L<i>.beta, L<i>.running_mean, L<i>.running_var.
    std::vector<std::pair<std::string, Tensor4<T>*>> named_tensors() {
        std::vector<std::pair<std::string, Tensor4<T>*>> out;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const std::string prefix = "L" + std::to_string(i) + ".";
            LayerParams<T>& p = params[i];
            if (!p.w.empty()) out.emplace_back(prefix + "w", &p.w);
            if (!p.b.empty()) out.emplace_back(prefix + "b", &p.b);
            if (!p.gamma.empty()) out.emplace_back(prefix + "gamma", &p.gamma);
            if (!p.beta.empty()) out.emplace_back(prefix + "beta", &p.beta);
            if (!p.running_mean.empty()) out.emplace_back(prefix + "running_mean", &p.running_mean);
            if (!p.running_var.empty()) out.emplace_back(prefix + "running_var", &p.running_var);
        }
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : params)
            n += p.w.size() + p.b.size() + p.gamma.size() + p.beta.size();
        return n;
    }

    template <typename U>
    Model<U> cast() const {
        Model<U> out;
        out.spec = spec;
        out.shapes = shapes;
        out.params.reserve(params.size());
        for (const auto& p : params) out.params.push_back(p.template cast<U>());
        return out;
    }

   private:
    void check_input(const Tensor4<T>& x) const {
        if (x.c != spec.in_channels || x.h != spec.in_h || x.w != spec.in_w)
            throw std::invalid_argument("network: input shape mismatch");
        if (x.n < 1) throw std::invalid_argument("network: empty batch");
    }

    static void fill_glorot(Tensor4<T>& t, double fan_in, double fan_out, Rng& rng) {
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& v : t.data) v = static_cast<T>(rng.uniform(-limit, limit));
    }

    static void accumulate(Tensor4<T>& dst, const Tensor4<T>& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
    }

    static Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
        Tensor4<T> out(a.n, a.c + b.c, a.h, a.w);
        for (int in = 0; in < a.n; ++in) {
            for (int ic = 0; ic < a.c; ++ic)
                for (int iy = 0; iy < a.h; ++iy)
                    for (int ix = 0; ix < a.w; ++ix)
                        out.at(in, ic, iy, ix) = a.at(in, ic, iy, ix);
            for (int ic = 0; ic < b.c; ++ic)
                for (int iy = 0; iy < b.h; ++iy)
                    for (int ix = 0; ix < b.w; ++ix)
                        out.at(in, a.c + ic, iy, ix) = b.at(in, ic, iy, ix);
        }
        return out;
    }

    static void split_channels(const Tensor4<T>& d, Tensor4<T>& first, Tensor4<T>& second) {
        for (int in = 0; in < d.n; ++in) {
            for (int ic = 0; ic < first.c; ++ic)
                for (int iy = 0; iy < d.h; ++iy)
                    for (int ix = 0; ix < d.w; ++ix)
                        first.at(in, ic, iy, ix) = d.at(in, ic, iy, ix);
            for (int ic = 0; ic < second.c; ++ic)
                for (int iy = 0; iy < d.h; ++iy)
                    for (int ix = 0; ix < d.w; ++ix)
                        second.at(in, ic, iy, ix) = d.at(in, first.c + ic, iy, ix);
        }
    }
};

}  // namespace lungkit::nn
