#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "fruitnet/layers.hpp"
#include "fruitnet/loss.hpp"
#include "fruitnet/prng.hpp"
#include "fruitnet/tensor.hpp"

namespace fruitnet {

enum class LayerKind { conv, relu, pool, dropout, flatten, dense };

struct LayerDesc {
    LayerKind kind;
    std::size_t out_channels = 0;  // conv
    std::size_t kernel = 0;        // conv
    std::size_t stride = 0;        // conv, pool
    std::size_t pool = 0;          // pool window (square)
    double drop_p = 0.0;           // dropout
    std::size_t units = 0;         // dense
};

// Ordered layer descriptors for one experiment case, shape-checked at build.
struct NetworkSpec {
    int case_id = 4;
    std::size_t in_channels = 3;
    std::size_t in_h = 100;
    std::size_t in_w = 100;
    std::size_t num_classes = 25;
    std::vector<LayerDesc> layers;
};

// The five experiment cases. All share Conv(64,3x3,same)/ReLU,
// Pool(2x2,stride 2,same), Flatten, Dense(500)/ReLU, Dense(k); they differ
// in conv/pool ordering and dropout placement:
//   1: Conv-Pool-Conv-Pool (alternating), no dropout
//   2: Conv-Conv-Pool-Pool (stacked), no dropout
//   3: Conv-Conv-Pool-Pool with dropout (0.25 after last pool, 0.5 after FC1)
//   4: Conv-Pool-Conv-Pool with dropout (0.25 after pool 2, 0.5 after FC1)
//   5: Conv-Pool-Conv-Pool with dropout 0.25 after each pool, 0.5 after FC1
inline NetworkSpec make_case_spec(int case_id, std::size_t num_classes = 25,
                                  std::size_t in_h = 100, std::size_t in_w = 100,
                                  std::size_t in_channels = 3) {
    if (case_id < 1 || case_id > 5)
        throw std::invalid_argument("case id must be one of 1, 2, 3, 4, 5 (got " +
                                    std::to_string(case_id) + ")");
    NetworkSpec spec;
    spec.case_id = case_id;
    spec.in_channels = in_channels;
    spec.in_h = in_h;
    spec.in_w = in_w;
    spec.num_classes = num_classes;

    auto conv = [] { return LayerDesc{LayerKind::conv, 64, 3, 1, 0, 0.0, 0}; };
    auto relu_ = [] { return LayerDesc{LayerKind::relu}; };
    auto pool = [] { return LayerDesc{LayerKind::pool, 0, 0, 2, 2, 0.0, 0}; };
    auto drop = [](double p) { return LayerDesc{LayerKind::dropout, 0, 0, 0, 0, p, 0}; };
    auto dense = [](std::size_t units) {
        return LayerDesc{LayerKind::dense, 0, 0, 0, 0, 0.0, units};
    };

    auto& L = spec.layers;
    switch (case_id) {
        case 1:
            L = {conv(), relu_(), pool(), conv(), relu_(), pool()};
            break;
        case 2:
            L = {conv(), relu_(), conv(), relu_(), pool(), pool()};
            break;
        case 3:
            L = {conv(), relu_(), conv(), relu_(), pool(), pool(), drop(0.25)};
            break;
        case 4:
            L = {conv(), relu_(), pool(), conv(), relu_(), pool(), drop(0.25)};
            break;
        case 5:
            L = {conv(), relu_(), pool(), drop(0.25), conv(), relu_(), pool(), drop(0.25)};
            break;
    }
    L.push_back(LayerDesc{LayerKind::flatten});
    L.push_back(dense(500));
    L.push_back(relu_());
    if (case_id >= 3) L.push_back(drop(0.5));
    L.push_back(dense(num_classes));
    return spec;
}

struct ReluMarker {};
struct FlattenMarker {};

template <class T>
using LayerNode = std::variant<Conv2D<T>, ReluMarker, MaxPool2D, Dropout, FlattenMarker,
                               Dense<T>>;

template <class T>
struct ReluCache {
    Tensor<T> input;
};

struct FlattenCache {
    Shape in_shape;
};

template <class T>
using NodeCache = std::variant<std::monostate, ConvCache<T>, ReluCache<T>, PoolCache,
                               DropoutCache<T>, FlattenCache, DenseCache<T>>;

template <class T>
struct Network {
    using value_type = T;
    NetworkSpec spec;
    std::vector<LayerNode<T>> layers;
};

template <class T>
struct ParamRef {
    std::string name;
    Tensor<T>* value;
};

// Parameter tensors in layer order, weights before bias. Names follow the
// architecture convention: conv1, conv2, fc1, fc2.
template <class T>
std::vector<ParamRef<T>> parameters(Network<T>& net) {
    std::vector<ParamRef<T>> refs;
    int conv_n = 0, fc_n = 0;
    for (auto& node : net.layers) {
        if (auto* conv = std::get_if<Conv2D<T>>(&node)) {
            const std::string base = "conv" + std::to_string(++conv_n);
            refs.push_back({base + ".weights", &conv->weights});
            refs.push_back({base + ".bias", &conv->bias});
        } else if (auto* dense = std::get_if<Dense<T>>(&node)) {
            const std::string base = "fc" + std::to_string(++fc_n);
            refs.push_back({base + ".weights", &dense->weights});
            refs.push_back({base + ".bias", &dense->bias});
        }
    }
    return refs;
}

template <class T>
struct ConstParamRef {
    std::string name;
    const Tensor<T>* value;
};

template <class T>
std::vector<ConstParamRef<T>> parameters(const Network<T>& net) {
    std::vector<ConstParamRef<T>> refs;
    for (auto& ref : parameters(const_cast<Network<T>&>(net)))
        refs.push_back({ref.name, ref.value});
    return refs;
}

// LeCun uniform: U(-L, L) with L = sqrt(3 / fan_in); biases start at zero.
// Same seed, same spec -> bit-identical parameters.
template <class T>
Network<T> build_network(const NetworkSpec& spec, std::uint64_t seed) {
    if (spec.num_classes < 2)
        throw std::invalid_argument("build_network: need at least 2 classes");
    Network<T> net;
    net.spec = spec;
    Prng prng = derive_stream(seed, 0, Stream::init);

    // walk the descriptor chain validating shapes as we instantiate
    std::size_t c = spec.in_channels, h = spec.in_h, w = spec.in_w;
    bool flat = false;
    std::size_t width = 0;
    for (const auto& d : spec.layers) {
        switch (d.kind) {
            case LayerKind::conv: {
                if (flat)
                    throw std::invalid_argument("build_network: conv after flatten");
                const double limit = std::sqrt(3.0 / static_cast<double>(c * d.kernel * d.kernel));
                Conv2D<T> conv;
                conv.weights = uniform_fill<T>(
                    prng, Shape{d.out_channels, c, d.kernel, d.kernel}, -limit, limit);
                conv.bias = Tensor<T>(Shape{d.out_channels});
                conv.stride = d.stride;
                net.layers.push_back(std::move(conv));
                c = d.out_channels;
                h = same_pad(h, d.kernel, d.stride).out;
                w = same_pad(w, d.kernel, d.stride).out;
                break;
            }
            case LayerKind::relu:
                net.layers.push_back(ReluMarker{});
                break;
            case LayerKind::pool: {
                if (flat) throw std::invalid_argument("build_network: pool after flatten");
                net.layers.push_back(MaxPool2D{d.pool, d.pool, d.stride});
                h = same_pad(h, d.pool, d.stride).out;
                w = same_pad(w, d.pool, d.stride).out;
                break;
            }
            case LayerKind::dropout:
                net.layers.push_back(Dropout{d.drop_p});
                break;
            case LayerKind::flatten:
                net.layers.push_back(FlattenMarker{});
                width = c * h * w;
                flat = true;
                break;
            case LayerKind::dense: {
                if (!flat)
                    throw std::invalid_argument("build_network: dense requires flatten first");
                const double limit = std::sqrt(3.0 / static_cast<double>(width));
                Dense<T> dense;
                dense.weights = uniform_fill<T>(prng, Shape{d.units, width}, -limit, limit);
                dense.bias = Tensor<T>(Shape{d.units});
                net.layers.push_back(std::move(dense));
                width = d.units;
                break;
            }
        }
    }
    if (!flat || width != spec.num_classes)
        throw std::invalid_argument("build_network: descriptor chain does not end at " +
                                    std::to_string(spec.num_classes) + " classes");
    return net;
}

template <class T>
Network<T> build_case(int case_id, std::size_t num_classes, std::uint64_t seed,
                      std::size_t in_h = 100, std::size_t in_w = 100,
                      std::size_t in_channels = 3) {
    return build_network<T>(make_case_spec(case_id, num_classes, in_h, in_w, in_channels),
                            seed);
}

template <class T>
struct ForwardResult {
    Tensor<T> logits;
    Tensor<T> probs;
    std::vector<NodeCache<T>> caches;
};

// Runs the full stack and softmax on top. Eval mode bypasses dropout; the
// prng is consumed only by train-mode dropout layers.
template <class T>
ForwardResult<T> forward_full(const Network<T>& net, const Tensor<T>& x, Mode mode,
                              Prng& prng) {
    const Shape expect{x.dim(0), net.spec.in_channels, net.spec.in_h, net.spec.in_w};
    if (x.shape() != expect)
        throw std::invalid_argument("forward_full: input " + x.shape().str() +
                                    " does not match network input " + expect.str());
    ForwardResult<T> res;
    res.caches.reserve(net.layers.size());
    Tensor<T> cur = x;
    for (const auto& node : net.layers) {
        if (const auto* conv = std::get_if<Conv2D<T>>(&node)) {
            auto [out, cache] = conv2d_forward(*conv, cur);
            cur = std::move(out);
            res.caches.emplace_back(std::move(cache));
        } else if (std::get_if<ReluMarker>(&node)) {
            res.caches.emplace_back(ReluCache<T>{cur});
            cur = relu(cur);
        } else if (const auto* pool = std::get_if<MaxPool2D>(&node)) {
            auto [out, cache] = maxpool_forward(*pool, cur);
            cur = std::move(out);
            res.caches.emplace_back(std::move(cache));
        } else if (const auto* drop = std::get_if<Dropout>(&node)) {
            auto [out, cache] = dropout_forward(*drop, cur, mode, prng);
            cur = std::move(out);
            res.caches.emplace_back(std::move(cache));
        } else if (std::get_if<FlattenMarker>(&node)) {
            res.caches.emplace_back(FlattenCache{cur.shape()});
            cur = flatten(cur);
        } else if (const auto* dense = std::get_if<Dense<T>>(&node)) {
            auto [out, cache] = dense_forward(*dense, cur);
            cur = std::move(out);
            res.caches.emplace_back(std::move(cache));
        }
    }
    res.probs = softmax(cur);
    res.logits = std::move(cur);
    return res;
}

// Gradients for every parameter tensor, aligned with parameters(net), plus
// the gradient w.r.t. the network input.
template <class T>
struct BackwardResult {
    std::vector<Tensor<T>> param_grads;
    Tensor<T> input_grad;
};

template <class T>
BackwardResult<T> backward_full(const Network<T>& net, const std::vector<NodeCache<T>>& caches,
                                const Tensor<T>& grad_logits) {
    if (caches.size() != net.layers.size())
        throw std::invalid_argument("backward_full: cache count does not match layer count");
    BackwardResult<T> res;
    std::vector<std::vector<Tensor<T>>> per_layer(net.layers.size());
    Tensor<T> grad = grad_logits;
    for (std::size_t i = net.layers.size(); i-- > 0;) {
        const auto& node = net.layers[i];
        const auto& cache = caches[i];
        if (const auto* conv = std::get_if<Conv2D<T>>(&node)) {
            auto g = conv2d_backward(*conv, grad, std::get<ConvCache<T>>(cache));
            per_layer[i] = {std::move(g.weights), std::move(g.bias)};
            grad = std::move(g.input);
        } else if (std::get_if<ReluMarker>(&node)) {
            grad = relu_backward(grad, std::get<ReluCache<T>>(cache).input);
        } else if (const auto* pool = std::get_if<MaxPool2D>(&node)) {
            grad = maxpool_backward<T>(*pool, grad, std::get<PoolCache>(cache));
        } else if (std::get_if<Dropout>(&node)) {
            grad = dropout_backward(grad, std::get<DropoutCache<T>>(cache));
        } else if (std::get_if<FlattenMarker>(&node)) {
            grad = unflatten(grad, std::get<FlattenCache>(cache).in_shape);
        } else if (const auto* dense = std::get_if<Dense<T>>(&node)) {
            auto g = dense_backward(*dense, grad, std::get<DenseCache<T>>(cache));
            per_layer[i] = {std::move(g.weights), std::move(g.bias)};
            grad = std::move(g.input);
        }
    }
    for (auto& grads : per_layer)
        for (auto& g : grads) res.param_grads.push_back(std::move(g));
    res.input_grad = std::move(grad);
    return res;
}

}  // namespace fruitnet
