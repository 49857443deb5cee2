#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lungkit/nn/tensor.hpp"
#include "lungkit/rng.hpp"

namespace lungkit::nn {

enum class Padding { valid, same };

struct ConvGeometry {
    int out_h = 0, out_w = 0;
    int pad_top = 0, pad_left = 0;
};

/// Output size and top/left padding for a convolution. Same-padding splits
/// the total evenly with the extra pixel on the bottom/right.
inline ConvGeometry conv_geometry(int h, int w, int kh, int kw, int stride, Padding pad) {
    ConvGeometry g;
    if (pad == Padding::valid) {
        if (h < kh || w < kw) throw std::invalid_argument("conv: input smaller than kernel");
        g.out_h = (h - kh) / stride + 1;
        g.out_w = (w - kw) / stride + 1;
    } else {
        g.out_h = (h + stride - 1) / stride;
        g.out_w = (w + stride - 1) / stride;
        const int pad_h = std::max((g.out_h - 1) * stride + kh - h, 0);
        const int pad_w = std::max((g.out_w - 1) * stride + kw - w, 0);
        g.pad_top = pad_h / 2;
        g.pad_left = pad_w / 2;
    }
    return g;
}

// ---------------------------------------------------------------- conv2d

template <typename T>
Tensor4<T> conv2d_apply(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& b,
                        int stride, Padding pad) {
    if (w.c != x.c) throw std::invalid_argument("conv2d: channel mismatch");
    const ConvGeometry g = conv_geometry(x.h, x.w, w.h, w.w, stride, pad);
    Tensor4<T> out(x.n, w.n, g.out_h, g.out_w);
    for (int in = 0; in < x.n; ++in)
        for (int f = 0; f < w.n; ++f)
            for (int oy = 0; oy < g.out_h; ++oy)
                for (int ox = 0; ox < g.out_w; ++ox) {
                    T acc = b.empty() ? T{0} : b.data[f];
                    for (int ic = 0; ic < x.c; ++ic)
                        for (int ky = 0; ky < w.h; ++ky) {
                            const int iy = oy * stride - g.pad_top + ky;
                            if (iy < 0 || iy >= x.h) continue;
                            for (int kx = 0; kx < w.w; ++kx) {
                                const int ix = ox * stride - g.pad_left + kx;
                                if (ix < 0 || ix >= x.w) continue;
                                acc += x.at(in, ic, iy, ix) * w.at(f, ic, ky, kx);
                            }
                        }
                    out.at(in, f, oy, ox) = acc;
                }
    return out;
}

template <typename T>
void conv2d_grad(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& dy,
                 int stride, Padding pad, Tensor4<T>& dx, Tensor4<T>& dw, Tensor4<T>& db) {
    const ConvGeometry g = conv_geometry(x.h, x.w, w.h, w.w, stride, pad);
    if (dy.n != x.n || dy.c != w.n || dy.h != g.out_h || dy.w != g.out_w)
        throw std::invalid_argument("conv2d_grad: upstream shape mismatch");
    dx = Tensor4<T>(x.n, x.c, x.h, x.w);
    dw = Tensor4<T>(w.n, w.c, w.h, w.w);
    db = Tensor4<T>(1, w.n, 1, 1);
    for (int in = 0; in < x.n; ++in)
        for (int f = 0; f < w.n; ++f)
            for (int oy = 0; oy < g.out_h; ++oy)
                for (int ox = 0; ox < g.out_w; ++ox) {
                    const T d = dy.at(in, f, oy, ox);
                    db.data[f] += d;
                    for (int ic = 0; ic < x.c; ++ic)
                        for (int ky = 0; ky < w.h; ++ky) {
                            const int iy = oy * stride - g.pad_top + ky;
                            if (iy < 0 || iy >= x.h) continue;
                            for (int kx = 0; kx < w.w; ++kx) {
                                const int ix = ox * stride - g.pad_left + kx;
                                if (ix < 0 || ix >= x.w) continue;
                                dx.at(in, ic, iy, ix) += d * w.at(f, ic, ky, kx);
                                dw.at(f, ic, ky, kx) += d * x.at(in, ic, iy, ix);
                            }
                        }
                }
}

// ----------------------------------------------------- transposed conv 2x2/2

template <typename T>
Tensor4<T> tconv2d_apply(const Tensor4<T>& x, const Tensor4<T>& w) {
    // w is [C_in, C_out, 2, 2]; fixed stride 2 so stamps never overlap
    if (w.n != x.c) throw std::invalid_argument("tconv2d: channel mismatch");
    Tensor4<T> out(x.n, w.c, x.h * 2, x.w * 2);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix) {
                    const T v = x.at(in, ic, iy, ix);
                    for (int oc = 0; oc < w.c; ++oc)
                        for (int ky = 0; ky < 2; ++ky)
                            for (int kx = 0; kx < 2; ++kx)
                                out.at(in, oc, iy * 2 + ky, ix * 2 + kx) +=
                                    v * w.at(ic, oc, ky, kx);
                }
    return out;
}

template <typename T>
void tconv2d_grad(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& dy,
                  Tensor4<T>& dx, Tensor4<T>& dw) {
    if (dy.n != x.n || dy.c != w.c || dy.h != x.h * 2 || dy.w != x.w * 2)
        throw std::invalid_argument("tconv2d_grad: upstream shape mismatch");
    dx = Tensor4<T>(x.n, x.c, x.h, x.w);
    dw = Tensor4<T>(w.n, w.c, w.h, w.w);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix) {
                    T acc = 0;
                    for (int oc = 0; oc < w.c; ++oc)
                        for (int ky = 0; ky < 2; ++ky)
                            for (int kx = 0; kx < 2; ++kx) {
                                const T d = dy.at(in, oc, iy * 2 + ky, ix * 2 + kx);
                                acc += d * w.at(ic, oc, ky, kx);
                                dw.at(ic, oc, ky, kx) += d * x.at(in, ic, iy, ix);
                            }
                    dx.at(in, ic, iy, ix) = acc;
                }
}

// ------------------------------------------------------------- maxpool 2x2/2

template <typename T>
Tensor4<T> maxpool2d_apply(const Tensor4<T>& x, std::vector<std::size_t>& routing) {
    const int oh = (x.h + 1) / 2, ow = (x.w + 1) / 2;  // odd edges padded with -inf
    Tensor4<T> out(x.n, x.c, oh, ow);
    routing.assign(out.size(), 0);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    T best = -std::numeric_limits<T>::infinity();
                    std::size_t best_idx = 0;
                    for (int ky = 0; ky < 2; ++ky) {
                        const int iy = oy * 2 + ky;
                        if (iy >= x.h) continue;
                        for (int kx = 0; kx < 2; ++kx) {
                            const int ix = ox * 2 + kx;
                            if (ix >= x.w) continue;
                            const T v = x.at(in, ic, iy, ix);
                            if (v > best) {  // ties keep the first in scan order
                                best = v;
                                best_idx = x.index(in, ic, iy, ix);
                            }
                        }
                    }
                    const std::size_t oi = out.index(in, ic, oy, ox);
                    out.data[oi] = best;
                    routing[oi] = best_idx;
                }
    return out;
}

template <typename T>
Tensor4<T> maxpool2d_grad(const Tensor4<T>& x, const Tensor4<T>& dy,
                          const std::vector<std::size_t>& routing) {
    Tensor4<T> dx(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.data[routing[i]] += dy.data[i];
    return dx;
}

// ------------------------------------------------------------------- dense

template <typename T>
Tensor4<T> dense_apply(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& b) {
    // x: [N, D, 1, 1], w: [1, 1, D, U], b: [1, 1, 1, U]
    const int d = x.c * x.h * x.w, units = w.w;
    if (w.h != d) throw std::invalid_argument("dense: dimension mismatch");
    Tensor4<T> out(x.n, units, 1, 1);
    for (int in = 0; in < x.n; ++in)
        for (int u = 0; u < units; ++u) {
            T acc = b.empty() ? T{0} : b.data[u];
            for (int i = 0; i < d; ++i)
                acc += x.data[static_cast<std::size_t>(in) * d + i] * w.at(0, 0, i, u);
            out.at(in, u, 0, 0) = acc;
        }
    return out;
}

template <typename T>
void dense_grad(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>& dy,
                Tensor4<T>& dx, Tensor4<T>& dw, Tensor4<T>& db) {
    const int d = x.c * x.h * x.w, units = w.w;
    dx = Tensor4<T>(x.n, x.c, x.h, x.w);
    dw = Tensor4<T>(1, 1, d, units);
    db = Tensor4<T>(1, 1, 1, units);
    for (int in = 0; in < x.n; ++in)
        for (int u = 0; u < units; ++u) {
            const T g = dy.at(in, u, 0, 0);
            db.data[u] += g;
            for (int i = 0; i < d; ++i) {
                const std::size_t xi = static_cast<std::size_t>(in) * d + i;
                dx.data[xi] += g * w.at(0, 0, i, u);
                dw.at(0, 0, i, u) += g * x.data[xi];
            }
        }
}

// -------------------------------------------------------------- activations

template <typename T>
Tensor4<T> relu_apply(const Tensor4<T>& x) {
    Tensor4<T> out = x;
    for (auto& v : out.data) v = std::max(v, T{0});
    return out;
}

template <typename T>
Tensor4<T> relu_grad(const Tensor4<T>& x, const Tensor4<T>& dy) {
    Tensor4<T> dx = dy;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x.data[i] <= T{0}) dx.data[i] = 0;  // derivative at 0 defined as 0
    return dx;
}

template <typename T>
Tensor4<T> sigmoid_apply(const Tensor4<T>& x) {
    Tensor4<T> out = x;
    for (auto& v : out.data) v = T{1} / (T{1} + std::exp(-v));
    return out;
}

template <typename T>
Tensor4<T> sigmoid_grad(const Tensor4<T>& y, const Tensor4<T>& dy) {
    // y is the forward output
    Tensor4<T> dx = dy;
    for (std::size_t i = 0; i < y.size(); ++i)
        dx.data[i] *= y.data[i] * (T{1} - y.data[i]);
    return dx;
}

// ------------------------------------------------------------------ dropout

template <typename T>
Tensor4<T> dropout_apply(const Tensor4<T>& x, double rate, bool train, Rng& rng,
                         std::vector<std::uint8_t>& mask) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
    if (!train || rate == 0.0) {
        mask.clear();
        return x;
    }
    // inverted dropout: survivors scaled so the expectation is unchanged
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    mask.assign(x.size(), 1);
    Tensor4<T> out = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (rng.uniform() < rate) {
            mask[i] = 0;
            out.data[i] = 0;
        } else {
            out.data[i] *= scale;
        }
    }
    return out;
}

template <typename T>
Tensor4<T> dropout_grad(const Tensor4<T>& dy, double rate, const std::vector<std::uint8_t>& mask) {
    if (mask.empty()) return dy;  // was identity
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    Tensor4<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] = mask[i] ? dx.data[i] * scale : T{0};
    return dx;
}

// ---------------------------------------------------------------- batchnorm

template <typename T>
struct BatchNormCache {
    std::vector<T> inv_std;  // per channel
    Tensor4<T> xhat;
};

template <typename T>
Tensor4<T> batchnorm_apply_train(const Tensor4<T>& x, const Tensor4<T>& gamma,
                                 const Tensor4<T>& beta, Tensor4<T>& running_mean,
                                 Tensor4<T>& running_var, double momentum, double eps,
                                 BatchNormCache<T>& cache) {
    if (x.n < 2) throw std::invalid_argument("batchnorm: batch of size < 2 in train mode");
    const std::size_t m = static_cast<std::size_t>(x.n) * x.h * x.w;
    Tensor4<T> out(x.n, x.c, x.h, x.w);
    cache.xhat = Tensor4<T>(x.n, x.c, x.h, x.w);
    cache.inv_std.assign(x.c, T{0});
    for (int ic = 0; ic < x.c; ++ic) {
        T sum = 0;
        for (int in = 0; in < x.n; ++in)
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix) sum += x.at(in, ic, iy, ix);
        const T mean = sum / static_cast<T>(m);
        T ss = 0;
        for (int in = 0; in < x.n; ++in)
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix) {
                    const T d = x.at(in, ic, iy, ix) - mean;
                    ss += d * d;
                }
        const T var = ss / static_cast<T>(m);
        const T inv_std = T{1} / std::sqrt(var + static_cast<T>(eps));
        cache.inv_std[ic] = inv_std;
        running_mean.data[ic] =
            static_cast<T>(momentum) * running_mean.data[ic] + static_cast<T>(1.0 - momentum) * mean;
        running_var.data[ic] =
            static_cast<T>(momentum) * running_var.data[ic] + static_cast<T>(1.0 - momentum) * var;
        for (int in = 0; in < x.n; ++in)
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix) {
                    const T xh = (x.at(in, ic, iy, ix) - mean) * inv_std;
                    cache.xhat.at(in, ic, iy, ix) = xh;
                    out.at(in, ic, iy, ix) = gamma.data[ic] * xh + beta.data[ic];
                }
    }
    return out;
}

template <typename T>
Tensor4<T> batchnorm_apply_infer(const Tensor4<T>& x, const Tensor4<T>& gamma,
                                 const Tensor4<T>& beta, const Tensor4<T>& running_mean,
                                 const Tensor4<T>& running_var, double eps) {
    Tensor4<T> out(x.n, x.c, x.h, x.w);
    for (int ic = 0; ic < x.c; ++ic) {
        const T inv_std = T{1} / std::sqrt(running_var.data[ic] + static_cast<T>(eps));
        for (int in = 0; in < x.n; ++in)
            for (int iy = 0; iy < x.h; ++iy)
                for (int ix = 0; ix < x.w; ++ix)
                    out.at(in, ic, iy, ix) =
                        gamma.data[ic] * (x.at(in, ic, iy, ix) - running_mean.data[ic]) * inv_std +
                        beta.data[ic];
    }
    return out;
}

template <typename T>
void batchnorm_grad(const Tensor4<T>& dy, const Tensor4<T>& gamma,
                    const BatchNormCache<T>& cache, Tensor4<T>& dx, Tensor4<T>& dgamma,
                    Tensor4<T>& dbeta) {
    const Tensor4<T>& xhat = cache.xhat;
    const std::size_t m = static_cast<std::size_t>(xhat.n) * xhat.h * xhat.w;
    dx = Tensor4<T>(xhat.n, xhat.c, xhat.h, xhat.w);
    dgamma = Tensor4<T>(1, xhat.c, 1, 1);
    dbeta = Tensor4<T>(1, xhat.c, 1, 1);
    for (int ic = 0; ic < xhat.c; ++ic) {
        T sum_dy = 0, sum_dy_xhat = 0;
        for (int in = 0; in < xhat.n; ++in)
            for (int iy = 0; iy < xhat.h; ++iy)
                for (int ix = 0; ix < xhat.w; ++ix) {
                    const T d = dy.at(in, ic, iy, ix);
                    sum_dy += d;
                    sum_dy_xhat += d * xhat.at(in, ic, iy, ix);
                }
        dgamma.data[ic] = sum_dy_xhat;
        dbeta.data[ic] = sum_dy;
        const T k = gamma.data[ic] * cache.inv_std[ic] / static_cast<T>(m);
        for (int in = 0; in < xhat.n; ++in)
            for (int iy = 0; iy < xhat.h; ++iy)
                for (int ix = 0; ix < xhat.w; ++ix)
                    dx.at(in, ic, iy, ix) =
                        k * (static_cast<T>(m) * dy.at(in, ic, iy, ix) - sum_dy -
                             xhat.at(in, ic, iy, ix) * sum_dy_xhat);
    }
}

// --------------------------------------------------------------------- loss

inline constexpr double kBceEps = 1e-7;

template <typename T>
T bce_loss(const Tensor4<T>& p, const Tensor4<T>& y) {
    if (p.size() != y.size()) throw std::invalid_argument("bce_loss: count mismatch");
    T acc = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const T pc = std::clamp(p.data[i], static_cast<T>(kBceEps), static_cast<T>(1.0 - kBceEps));
        acc += -(y.data[i] * std::log(pc) + (T{1} - y.data[i]) * std::log(T{1} - pc));
    }
    return acc / static_cast<T>(p.size());
}

/// Gradient of mean BCE with respect to the logits feeding the final
/// sigmoid: (p - y) / count.
template <typename T>
Tensor4<T> bce_sigmoid_grad(const Tensor4<T>& p, const Tensor4<T>& y) {
    if (p.size() != y.size()) throw std::invalid_argument("bce_sigmoid_grad: count mismatch");
    Tensor4<T> g(p.n, p.c, p.h, p.w);
    const T inv = T{1} / static_cast<T>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) g.data[i] = (p.data[i] - y.data[i]) * inv;
    return g;
}

// --------------------------------------------------------------------- adam

template <typename T>
struct AdamState {
    Tensor4<T> m, v;
};

template <typename T>
void adam_update(Tensor4<T>& param, const Tensor4<T>& grad, AdamState<T>& st, long long t,
                 double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (!param.same_shape(grad)) throw std::invalid_argument("adam_update: shape mismatch");
    if (t < 1) throw std::invalid_argument("adam_update: step must be >= 1");
    if (st.m.empty()) {
        st.m = Tensor4<T>(param.n, param.c, param.h, param.w);
        st.v = Tensor4<T>(param.n, param.c, param.h, param.w);
    }
    const T b1 = static_cast<T>(beta1), b2 = static_cast<T>(beta2);
    const T bc1 = static_cast<T>(1.0 - std::pow(beta1, static_cast<double>(t)));
    const T bc2 = static_cast<T>(1.0 - std::pow(beta2, static_cast<double>(t)));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const T g = grad.data[i];
        st.m.data[i] = b1 * st.m.data[i] + (T{1} - b1) * g;
        st.v.data[i] = b2 * st.v.data[i] + (T{1} - b2) * g * g;
        const T mhat = st.m.data[i] / bc1;
        const T vhat = st.v.data[i] / bc2;
        param.data[i] -= static_cast<T>(lr) * mhat / (std::sqrt(vhat) + static_cast<T>(eps));
    }
}

}  // namespace lungkit::nn
