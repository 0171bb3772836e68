#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fruitnet/tensor.hpp"

namespace fruitnet {

// Adam with bias correction. One state per parameter tensor; m and v mirror
// the parameter shape and start at zero with t = 0.
template <class T>
struct AdamState {
    Tensor<T> m;  // first moment
    Tensor<T> v;  // second moment
    std::uint64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eta = 0.002;
    double eps = 1e-8;

    explicit AdamState(const Shape& param_shape, double eta_ = 0.002, double beta1_ = 0.9,
                       double beta2_ = 0.999, double eps_ = 1e-8)
        : m(param_shape), v(param_shape), beta1(beta1_), beta2(beta2_), eta(eta_), eps(eps_) {}
};

// m' = b1*m + (1-b1)*g;  v' = b2*v + (1-b2)*g^2;
// w' = w - eta * (m'/(1-b1^t)) / (sqrt(v'/(1-b2^t)) + eps)
template <class T>
void adam_step(AdamState<T>& st, Tensor<T>& w, const Tensor<T>& g,
               const std::string& param_name = "") {
    if (w.shape() != g.shape() || w.shape() != st.m.shape())
        throw std::invalid_argument("adam_step: shape mismatch w=" + w.shape().str() +
                                    " g=" + g.shape().str() + " state=" + st.m.shape().str());
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!std::isfinite(static_cast<double>(g[i])))
            throw std::runtime_error("adam_step: non-finite gradient in parameter '" +
                                     (param_name.empty() ? std::string("<unnamed>") : param_name) +
                                     "' at index " + std::to_string(i));
    st.t += 1;
    const T b1 = static_cast<T>(st.beta1), b2 = static_cast<T>(st.beta2);
    const T c1 = static_cast<T>(1.0 - std::pow(st.beta1, static_cast<double>(st.t)));
    const T c2 = static_cast<T>(1.0 - std::pow(st.beta2, static_cast<double>(st.t)));
    const T eta = static_cast<T>(st.eta), eps = static_cast<T>(st.eps);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const T gi = g[i];
        st.m[i] = b1 * st.m[i] + (T(1) - b1) * gi;
        st.v[i] = b2 * st.v[i] + (T(1) - b2) * gi * gi;
        const T mhat = st.m[i] / c1;
        const T vhat = st.v[i] / c2;
        w[i] -= eta * mhat / (std::sqrt(vhat) + eps);
    }
}

// Plateau-based learning rate reduction: if the monitored metric (validation
// accuracy, higher is better) fails to improve for `patience` consecutive
// epochs, the rate is multiplied by `factor` and floored at `min_lr`.
struct PlateauSchedule {
    double factor = 0.5;
    int patience = 3;
    double min_lr = 1e-5;
    double best_metric = -std::numeric_limits<double>::infinity();
    int epochs_since_improve = 0;
};

inline double lr_on_epoch_end(PlateauSchedule& sched, double eta, double metric) {
    if (metric > sched.best_metric) {
        sched.best_metric = metric;
        sched.epochs_since_improve = 0;
        return eta;
    }
    sched.epochs_since_improve += 1;
    if (sched.epochs_since_improve >= sched.patience) {
        sched.epochs_since_improve = 0;
        return std::max(eta * sched.factor, sched.min_lr);
    }
    return eta;
}

}  // namespace fruitnet
