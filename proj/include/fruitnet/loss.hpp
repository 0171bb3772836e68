#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fruitnet/layers.hpp"
#include "fruitnet/tensor.hpp"

namespace fruitnet {

namespace detail {

template <class T>
void require_one_hot(const Tensor<T>& t, const char* op) {
    if (t.rank() != 2)
        throw std::invalid_argument(std::string(op) + ": targets must be [N,k]");
    for (std::size_t n = 0; n < t.dim(0); ++n) {
        std::size_t ones = 0;
        for (std::size_t j = 0; j < t.dim(1); ++j) {
            const T v = t.at(n, j);
            if (v == T(1))
                ++ones;
            else if (v != T(0))
                throw std::invalid_argument(std::string(op) + ": row " + std::to_string(n) +
                                            " is not one-hot (value " + std::to_string(v) +
                                            ")");
        }
        if (ones != 1)
            throw std::invalid_argument(std::string(op) + ": row " + std::to_string(n) +
                                        " has " + std::to_string(ones) + " ones");
    }
}

}  // namespace detail

// Mean categorical cross-entropy over the batch, p clamped to [1e-12, 1]
// inside the log. p rows must already sum to 1 (checked to 1e-6), t one-hot.
template <class T>
double cross_entropy(const Tensor<T>& p, const Tensor<T>& t) {
    detail::require_same_shape(p.shape(), t.shape(), "cross_entropy");
    detail::require_one_hot(t, "cross_entropy");
    const std::size_t N = p.dim(0), k = p.dim(1);
    double total = 0;
    for (std::size_t n = 0; n < N; ++n) {
        double row_sum = 0;
        for (std::size_t j = 0; j < k; ++j) row_sum += static_cast<double>(p.at(n, j));
        // written so NaN fails the comparison too
        if (!(std::abs(row_sum - 1.0) <= 1e-6))
            throw std::invalid_argument("cross_entropy: probability row " + std::to_string(n) +
                                        " sums to " + std::to_string(row_sum));
        for (std::size_t j = 0; j < k; ++j) {
            if (t.at(n, j) == T(1)) {
                const double pv = std::clamp(static_cast<double>(p.at(n, j)), 1e-12, 1.0);
                total -= std::log(pv);
            }
        }
    }
    return total / static_cast<double>(N);
}

// Analytically simplified gradient of mean cross-entropy composed with
// softmax, taken w.r.t. the logits: (softmax(z) - t) / N.
template <class T>
Tensor<T> softmax_xent_grad(const Tensor<T>& z, const Tensor<T>& t) {
    detail::require_same_shape(z.shape(), t.shape(), "softmax_xent_grad");
    detail::require_one_hot(t, "softmax_xent_grad");
    Tensor<T> g = softmax(z);
    const T inv_n = T(1) / static_cast<T>(z.dim(0));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (g[i] - t[i]) * inv_n;
    return g;
}

// Quadratic cost (1/2N) * sum (y - a)^2. Reported as a metric only; training
// always uses cross-entropy.
template <class T>
double quadratic_cost(const Tensor<T>& y, const Tensor<T>& a) {
    detail::require_same_shape(y.shape(), a.shape(), "quadratic_cost");
    const std::size_t N = y.dim(0);
    double total = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = static_cast<double>(y[i]) - static_cast<double>(a[i]);
        total += d * d;
    }
    return total / (2.0 * static_cast<double>(N));
}

}  // namespace fruitnet
