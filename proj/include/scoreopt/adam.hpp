#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include "scoreopt/tensor.hpp"

namespace scoreopt {

/// Adam moments for one parameter tensor. Bias correction follows the
/// original recurrence; defaults beta1=0.9, beta2=0.999, eps=1e-8.
struct AdamState {
    Tensor m;
    Tensor v;
    std::int64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState init(const Tensor& param, double beta1 = 0.9, double beta2 = 0.999,
                          double eps = 1e-8) {
        AdamState s;
        s.m = Tensor::zeros_like(param);
        s.v = Tensor::zeros_like(param);
        s.beta1 = beta1;
        s.beta2 = beta2;
        s.eps = eps;
        return s;
    }
};

/// One Adam update. Returns the advanced state and the updated parameter.
inline std::pair<AdamState, Tensor> adam_step(AdamState state, const Tensor& param,
                                              const Tensor& grad, double lr) {
    if (!param.same_shape(grad) || !param.same_shape(state.m) || !param.same_shape(state.v))
        throw ContractViolation("adam_step: shape mismatch");
    if (!(lr > 0.0)) throw ContractViolation("adam_step: lr must be positive");

    state.step += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    Tensor out = param;
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        out[i] = param[i] - lr * mhat / (std::sqrt(vhat) + state.eps);
    }
    return {std::move(state), std::move(out)};
}

}  // namespace scoreopt
