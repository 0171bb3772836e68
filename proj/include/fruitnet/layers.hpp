#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "fruitnet/prng.hpp"
#include "fruitnet/tensor.hpp"

namespace fruitnet {

enum class Mode { train, eval };

// "Same" padding: output extent = ceil(in / stride), total pad split evenly
// with the extra row/column at the bottom/right.
struct PadAxis {
    std::size_t out;
    std::size_t before;
};

inline PadAxis same_pad(std::size_t in, std::size_t k, std::size_t stride) {
    const std::size_t out = (in + stride - 1) / stride;
    const std::size_t needed = (out - 1) * stride + k;
    const std::size_t total = needed > in ? needed - in : 0;
    return {out, total / 2};
}

// ---------------------------------------------------------------------------
// Conv2D: stride-s "same" convolution, zero padding.
// ---------------------------------------------------------------------------

template <class T>
struct Conv2D {
    Tensor<T> weights;  // [out_channels, in_channels, kh, kw]
    Tensor<T> bias;     // [out_channels]
    std::size_t stride = 1;

    std::size_t out_channels() const { return weights.dim(0); }
    std::size_t in_channels() const { return weights.dim(1); }
    std::size_t kh() const { return weights.dim(2); }
    std::size_t kw() const { return weights.dim(3); }
};

template <class T>
struct ConvCache {
    Tensor<T> input;  // [N, C, H, W]
};

namespace detail {

// One sample: x is [C,H,W], col is [C*kh*kw, OH*OW].
template <class T>
void im2col(const T* x, std::size_t C, std::size_t H, std::size_t W, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t pad_h, std::size_t pad_w,
            std::size_t OH, std::size_t OW, T* col) {
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t u = 0; u < kh; ++u) {
            for (std::size_t v = 0; v < kw; ++v) {
                T* crow = col + ((c * kh + u) * kw + v) * (OH * OW);
                for (std::size_t oh = 0; oh < OH; ++oh) {
                    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride + u) -
                                              static_cast<std::ptrdiff_t>(pad_h);
                    const bool row_ok = ih >= 0 && ih < static_cast<std::ptrdiff_t>(H);
                    for (std::size_t ow = 0; ow < OW; ++ow) {
                        const std::ptrdiff_t iw =
                            static_cast<std::ptrdiff_t>(ow * stride + v) -
                            static_cast<std::ptrdiff_t>(pad_w);
                        crow[oh * OW + ow] =
                            (row_ok && iw >= 0 && iw < static_cast<std::ptrdiff_t>(W))
                                ? x[(c * H + static_cast<std::size_t>(ih)) * W +
                                    static_cast<std::size_t>(iw)]
                                : T(0);
                    }
                }
            }
        }
    }
}

// Scatter-add inverse of im2col.
template <class T>
void col2im_add(const T* col, std::size_t C, std::size_t H, std::size_t W, std::size_t kh,
                std::size_t kw, std::size_t stride, std::size_t pad_h, std::size_t pad_w,
                std::size_t OH, std::size_t OW, T* x) {
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t u = 0; u < kh; ++u) {
            for (std::size_t v = 0; v < kw; ++v) {
                const T* crow = col + ((c * kh + u) * kw + v) * (OH * OW);
                for (std::size_t oh = 0; oh < OH; ++oh) {
                    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride + u) -
                                              static_cast<std::ptrdiff_t>(pad_h);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                    for (std::size_t ow = 0; ow < OW; ++ow) {
                        const std::ptrdiff_t iw =
                            static_cast<std::ptrdiff_t>(ow * stride + v) -
                            static_cast<std::ptrdiff_t>(pad_w);
                        if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
                        x[(c * H + static_cast<std::size_t>(ih)) * W +
                          static_cast<std::size_t>(iw)] += crow[oh * OW + ow];
                    }
                }
            }
        }
    }
}

inline void require_nchw(const Shape& s, const char* op) {
    if (s.rank() != 4)
        throw std::invalid_argument(std::string(op) + ": expected NCHW input, got " + s.str());
}

}  // namespace detail

// im2col + matmul fast path. Output [N, F, OH, OW].
template <class T>
std::pair<Tensor<T>, ConvCache<T>> conv2d_forward(const Conv2D<T>& layer, const Tensor<T>& x) {
    detail::require_nchw(x.shape(), "conv2d_forward");
    if (x.dim(1) != layer.in_channels())
        throw std::invalid_argument("conv2d_forward: input channels " +
                                    std::to_string(x.dim(1)) + " != layer in_channels " +
                                    std::to_string(layer.in_channels()));
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t F = layer.out_channels(), kh = layer.kh(), kw = layer.kw();
    const auto [OH, ph] = same_pad(H, kh, layer.stride);
    const auto [OW, pw] = same_pad(W, kw, layer.stride);
    const std::size_t ckk = C * kh * kw, hw = OH * OW;

    Tensor<T> out(Shape{N, F, OH, OW});
    std::vector<T> col(ckk * hw);
    for (std::size_t n = 0; n < N; ++n) {
        detail::im2col(x.data() + n * C * H * W, C, H, W, kh, kw, layer.stride, ph, pw, OH,
                       OW, col.data());
        T* out_n = out.data() + n * F * hw;
        // out_n[F, hw] = weights[F, ckk] * col[ckk, hw]
        detail::gemm(F, ckk, hw, layer.weights.data(), col.data(), out_n);
        for (std::size_t f = 0; f < F; ++f) {
            const T b = layer.bias[f];
            T* row = out_n + f * hw;
            for (std::size_t t = 0; t < hw; ++t) row[t] += b;
        }
    }
    return {std::move(out), ConvCache<T>{x}};
}

// Direct loop-nest reference implementation. Kept permanently as the oracle
// the fast path is tested against.
template <class T>
Tensor<T> conv2d_forward_naive(const Conv2D<T>& layer, const Tensor<T>& x) {
    detail::require_nchw(x.shape(), "conv2d_forward_naive");
    if (x.dim(1) != layer.in_channels())
        throw std::invalid_argument("conv2d_forward_naive: channel mismatch");
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t F = layer.out_channels(), kh = layer.kh(), kw = layer.kw();
    const auto [OH, ph] = same_pad(H, kh, layer.stride);
    const auto [OW, pw] = same_pad(W, kw, layer.stride);
    Tensor<T> out(Shape{N, F, OH, OW});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t oh = 0; oh < OH; ++oh)
                for (std::size_t ow = 0; ow < OW; ++ow) {
                    T acc = layer.bias[f];
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t u = 0; u < kh; ++u)
                            for (std::size_t v = 0; v < kw; ++v) {
                                const std::ptrdiff_t ih =
                                    static_cast<std::ptrdiff_t>(oh * layer.stride + u) -
                                    static_cast<std::ptrdiff_t>(ph);
                                const std::ptrdiff_t iw =
                                    static_cast<std::ptrdiff_t>(ow * layer.stride + v) -
                                    static_cast<std::ptrdiff_t>(pw);
                                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H) ||
                                    iw < 0 || iw >= static_cast<std::ptrdiff_t>(W))
                                    continue;
                                acc += layer.weights.at(f, c, static_cast<std::size_t>(u),
                                                        static_cast<std::size_t>(v)) *
                                       x.at(n, c, static_cast<std::size_t>(ih),
                                            static_cast<std::size_t>(iw));
                            }
                    out.at(n, f, oh, ow) = acc;
                }
    return out;
}

template <class T>
struct ConvGrads {
    Tensor<T> input;
    Tensor<T> weights;
    Tensor<T> bias;
};

template <class T>
ConvGrads<T> conv2d_backward(const Conv2D<T>& layer, const Tensor<T>& grad_out,
                             const ConvCache<T>& cache) {
    const Tensor<T>& x = cache.input;
    detail::require_nchw(grad_out.shape(), "conv2d_backward");
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t F = layer.out_channels(), kh = layer.kh(), kw = layer.kw();
    const auto [OH, ph] = same_pad(H, kh, layer.stride);
    const auto [OW, pw] = same_pad(W, kw, layer.stride);
    if (grad_out.shape() != Shape{N, F, OH, OW})
        throw std::invalid_argument("conv2d_backward: grad_out shape " +
                                    grad_out.shape().str() + " != forward output " +
                                    Shape{N, F, OH, OW}.str());
    const std::size_t ckk = C * kh * kw, hw = OH * OW;

    ConvGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(layer.weights.shape()),
                   Tensor<T>(layer.bias.shape())};
    std::vector<T> col(ckk * hw), gcol(ckk * hw);
    for (std::size_t n = 0; n < N; ++n) {
        const T* go_n = grad_out.data() + n * F * hw;
        detail::im2col(x.data() + n * C * H * W, C, H, W, kh, kw, layer.stride, ph, pw, OH,
                       OW, col.data());
        // grad_w[F, ckk] += go_n[F, hw] * col[ckk, hw]^T
        detail::gemm_bt(F, hw, ckk, go_n, col.data(), g.weights.data());
        // gcol[ckk, hw] = weights[F, ckk]^T * go_n[F, hw]
        std::fill(gcol.begin(), gcol.end(), T(0));
        detail::gemm_at(F, ckk, hw, layer.weights.data(), go_n, gcol.data());
        detail::col2im_add(gcol.data(), C, H, W, kh, kw, layer.stride, ph, pw, OH, OW,
                           g.input.data() + n * C * H * W);
        for (std::size_t f = 0; f < F; ++f) {
            T acc = 0;
            const T* row = go_n + f * hw;
            for (std::size_t t = 0; t < hw; ++t) acc += row[t];
            g.bias[f] += acc;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// MaxPool2D: "same" padding with -inf pad values (never selected), ceil
// output size, ties broken by first position in row-major order.
// ---------------------------------------------------------------------------

struct MaxPool2D {
    std::size_t ph = 2;
    std::size_t pw = 2;
    std::size_t stride = 2;
};

struct PoolCache {
    Shape in_shape;
    std::vector<std::size_t> argmax;  // flat input index per output element
};

template <class T>
std::pair<Tensor<T>, PoolCache> maxpool_forward(const MaxPool2D& layer, const Tensor<T>& x) {
    detail::require_nchw(x.shape(), "maxpool_forward");
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const auto [OH, pad_h] = same_pad(H, layer.ph, layer.stride);
    const auto [OW, pad_w] = same_pad(W, layer.pw, layer.stride);
    Tensor<T> out(Shape{N, C, OH, OW});
    PoolCache cache{x.shape(), std::vector<std::size_t>(N * C * OH * OW)};
    std::size_t oi = 0;
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            const T* plane = x.data() + (n * C + c) * H * W;
            for (std::size_t oh = 0; oh < OH; ++oh)
                for (std::size_t ow = 0; ow < OW; ++ow) {
                    T best = -std::numeric_limits<T>::infinity();
                    std::size_t best_idx = 0;
                    bool found = false;
                    for (std::size_t u = 0; u < layer.ph; ++u) {
                        const std::ptrdiff_t ih =
                            static_cast<std::ptrdiff_t>(oh * layer.stride + u) -
                            static_cast<std::ptrdiff_t>(pad_h);
                        if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                        for (std::size_t v = 0; v < layer.pw; ++v) {
                            const std::ptrdiff_t iw =
                                static_cast<std::ptrdiff_t>(ow * layer.stride + v) -
                                static_cast<std::ptrdiff_t>(pad_w);
                            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
                            const std::size_t idx =
                                static_cast<std::size_t>(ih) * W + static_cast<std::size_t>(iw);
                            if (!found || plane[idx] > best) {
                                best = plane[idx];
                                best_idx = idx;
                                found = true;
                            }
                        }
                    }
                    out.at(n, c, oh, ow) = best;
                    cache.argmax[oi++] = (n * C + c) * H * W + best_idx;
                }
        }
    return {std::move(out), std::move(cache)};
}

template <class T>
Tensor<T> maxpool_backward(const MaxPool2D& layer, const Tensor<T>& grad_out,
                           const PoolCache& cache) {
    (void)layer;
    if (cache.argmax.size() != grad_out.size() || cache.in_shape.rank() != 4)
        throw std::invalid_argument("maxpool_backward: cache does not match grad_out " +
                                    grad_out.shape().str());
    Tensor<T> grad_in(cache.in_shape);
    for (std::size_t i = 0; i < grad_out.size(); ++i)
        grad_in[cache.argmax[i]] += grad_out[i];
    return grad_in;
}

// ---------------------------------------------------------------------------
// Dense: y = x * W^T + b with W stored [out, in].
// ---------------------------------------------------------------------------

template <class T>
struct Dense {
    Tensor<T> weights;  // [out, in]
    Tensor<T> bias;     // [out]

    std::size_t out_features() const { return weights.dim(0); }
    std::size_t in_features() const { return weights.dim(1); }
};

template <class T>
struct DenseCache {
    Tensor<T> input;  // [N, in]
};

template <class T>
std::pair<Tensor<T>, DenseCache<T>> dense_forward(const Dense<T>& layer, const Tensor<T>& x) {
    if (x.rank() != 2 || x.dim(1) != layer.in_features())
        throw std::invalid_argument("dense_forward: input " + x.shape().str() +
                                    " incompatible with weights " +
                                    layer.weights.shape().str());
    Tensor<T> y = matmul_bt(x, layer.weights);
    const std::size_t N = x.dim(0), out = layer.out_features();
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t j = 0; j < out; ++j) y.at(n, j) += layer.bias[j];
    return {std::move(y), DenseCache<T>{x}};
}

template <class T>
struct DenseGrads {
    Tensor<T> input;
    Tensor<T> weights;
    Tensor<T> bias;
};

template <class T>
DenseGrads<T> dense_backward(const Dense<T>& layer, const Tensor<T>& grad_out,
                             const DenseCache<T>& cache) {
    const Tensor<T>& x = cache.input;
    if (grad_out.rank() != 2 || grad_out.dim(0) != x.dim(0) ||
        grad_out.dim(1) != layer.out_features())
        throw std::invalid_argument("dense_backward: grad_out shape " +
                                    grad_out.shape().str() + " does not match layer");
    DenseGrads<T> g;
    g.weights = matmul_at(grad_out, x);   // [out, in]
    g.input = matmul(grad_out, layer.weights);  // [N, in]
    g.bias = Tensor<T>(layer.bias.shape());
    for (std::size_t n = 0; n < grad_out.dim(0); ++n)
        for (std::size_t j = 0; j < grad_out.dim(1); ++j) g.bias[j] += grad_out.at(n, j);
    return g;
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
    return out;
}

// Derivative at exactly 0 is 0: grad passes only where the input was > 0.
template <class T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& input) {
    detail::require_same_shape(grad_out.shape(), input.shape(), "relu_backward");
    Tensor<T> out(grad_out.shape());
    for (std::size_t i = 0; i < grad_out.size(); ++i)
        out[i] = input[i] > T(0) ? grad_out[i] : T(0);
    return out;
}

// 1 / (1 + exp(-z)), branch on sign so exp never overflows.
template <class T>
Tensor<T> sigmoid(const Tensor<T>& z) {
    Tensor<T> out(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const T v = z[i];
        if (v >= T(0)) {
            out[i] = T(1) / (T(1) + std::exp(-v));
        } else {
            const T e = std::exp(v);
            out[i] = e / (T(1) + e);
        }
    }
    return out;
}

// Row-wise softmax with max subtraction. Input [N, k].
template <class T>
Tensor<T> softmax(const Tensor<T>& z) {
    if (z.rank() != 2 || z.dim(1) < 1)
        throw std::invalid_argument("softmax: expected [N,k] input, got " + z.shape().str());
    const std::size_t N = z.dim(0), k = z.dim(1);
    Tensor<T> p(z.shape());
    for (std::size_t n = 0; n < N; ++n) {
        const T* row = z.data() + n * k;
        T* prow = p.data() + n * k;
        T m = row[0];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, row[j]);
        T sum = 0;
        for (std::size_t j = 0; j < k; ++j) {
            prow[j] = std::exp(row[j] - m);
            sum += prow[j];
        }
        for (std::size_t j = 0; j < k; ++j) prow[j] /= sum;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Dropout (inverted): train mode zeroes with probability p and scales
// survivors by 1/(1-p); eval mode is the bit-exact identity.
// ---------------------------------------------------------------------------

struct Dropout {
    double p = 0.25;
};

template <class T>
struct DropoutCache {
    Tensor<T> scaled_mask;  // elements are 0 or 1/(1-p); empty in eval mode
};

template <class T>
std::pair<Tensor<T>, DropoutCache<T>> dropout_forward(const Dropout& layer, const Tensor<T>& x,
                                                      Mode mode, Prng& prng) {
    if (!(layer.p >= 0.0 && layer.p < 1.0))
        throw std::invalid_argument("dropout: p must be in [0,1), got " +
                                    std::to_string(layer.p));
    if (mode == Mode::eval) return {x, DropoutCache<T>{}};
    const T keep_scale = static_cast<T>(1.0 / (1.0 - layer.p));
    Tensor<T> mask(x.shape());
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        mask[i] = prng.bernoulli(layer.p) ? T(0) : keep_scale;
        out[i] = x[i] * mask[i];
    }
    return {std::move(out), DropoutCache<T>{std::move(mask)}};
}

template <class T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out, const DropoutCache<T>& cache) {
    if (cache.scaled_mask.size() == 0) return grad_out;  // eval: identity
    return mul(grad_out, cache.scaled_mask);
}

// ---------------------------------------------------------------------------
// Flatten: [N,C,H,W] -> [N, C*H*W]; pure reshape, row-major order preserved.
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> flatten(const Tensor<T>& x) {
    detail::require_nchw(x.shape(), "flatten");
    return x.reshaped(Shape{x.dim(0), x.dim(1) * x.dim(2) * x.dim(3)});
}

template <class T>
Tensor<T> unflatten(const Tensor<T>& x, const Shape& nchw) {
    return x.reshaped(nchw);
}

}  // namespace fruitnet
