#pragma once

#include <cmath>

#include "scoreopt/errors.hpp"
#include "scoreopt/score_model.hpp"
#include "scoreopt/tensor.hpp"

namespace scoreopt {

/// One Monte-Carlo draw for the purification objectives: the noise level and
/// the two unit-normal draws. eps2 is consulted only by the Sr variant.
struct LossSample {
    double sigma = 0.0;
    Tensor eps1;
    Tensor eps2;
};

/// The three purification objectives, all built on the one-shot denoiser D:
///   Diff            ||D(x + s*eps1, s) - x||^2
///   Mse(lambda)     Diff + lambda * ||x - x_a||^2
///   Sr(lambda_reg)  Diff + lambda_reg * ||D(x + s*eps1, s) - D(x_a + s*eps2, s)||^2
/// Both Sr terms share the same sigma. lambda_reg defaults to 1, the
/// hyperparameter-free form; it is exposed only for sensitivity sweeps.
struct LossKind {
    enum class Variant { Diff, Mse, Sr };
    Variant variant = Variant::Diff;
    double lambda = 0.0;
    double lambda_reg = 1.0;

    static LossKind diff() { return {Variant::Diff, 0.0, 1.0}; }
    static LossKind mse(double lambda) {
        if (!(lambda >= 0.0) || !std::isfinite(lambda))
            throw ConfigError("mse loss: lambda must be finite and >= 0");
        return {Variant::Mse, lambda, 1.0};
    }
    static LossKind sr(double lambda_reg = 1.0) {
        if (!(lambda_reg >= 0.0) || !std::isfinite(lambda_reg))
            throw ConfigError("sr loss: lambda_reg must be finite and >= 0");
        return {Variant::Sr, 0.0, lambda_reg};
    }
};

struct LossEval {
    double value = 0.0;
    Tensor grad;
};

namespace detail {

inline void check_sample(const Tensor& x, const LossSample& s, bool needs_eps2) {
    if (!(s.sigma > 0.0)) throw ContractViolation("loss: sigma must be positive");
    if (!s.eps1.same_shape(x)) throw ContractViolation("loss: eps1 shape mismatch");
    if (needs_eps2 && !s.eps2.same_shape(x)) throw ContractViolation("loss: eps2 shape mismatch");
}

/// Shared value+gradient core. `x` is the clean-space variable and `u1` the
/// noisy denoiser argument; callers pass u1 = x + sigma*eps1 (clean-space
/// gradient) or the noisy iterate itself with x recovered as u1 - sigma*eps1
/// (noisy-space gradient). Since du1/dx = I the two gradients coincide.
///
/// With d1 = D(u1), r1 = d1 - x, q = d1 - D(x_a + sigma*eps2):
///   grad Diff = 2 sigma^2 vjp(u1, r1)
///   grad Mse  = grad Diff + 2 lambda (x - x_a)
///   grad Sr   = 2 sigma^2 vjp(u1, r1 + lambda_reg q) + 2 lambda_reg q
/// so every variant costs exactly one vjp (and Sr a second forward for the
/// x_a branch, which carries no gradient).
inline LossEval eval(const LossKind& kind, const ScoreModel& model, const Tensor& x,
                     const Tensor& u1, const Tensor& x_a, const LossSample& s) {
    Tensor d1 = denoise(model, u1, s.sigma);
    Tensor r1 = d1 - x;

    LossEval out;
    out.value = norm2_sq(r1);
    Tensor cotangent = r1;
    Tensor extra = Tensor::zeros_like(x);

    switch (kind.variant) {
        case LossKind::Variant::Diff:
            break;
        case LossKind::Variant::Mse: {
            if (!x_a.same_shape(x)) throw ContractViolation("loss: x_a shape mismatch");
            Tensor anchor = x - x_a;
            out.value += kind.lambda * norm2_sq(anchor);
            axpy(2.0 * kind.lambda, anchor, extra);
            break;
        }
        case LossKind::Variant::Sr: {
            if (!x_a.same_shape(x)) throw ContractViolation("loss: x_a shape mismatch");
            Tensor u2 = x_a;
            axpy(s.sigma, s.eps2, u2);
            Tensor d2 = denoise(model, u2, s.sigma);
            Tensor q = d1 - d2;
            out.value += kind.lambda_reg * norm2_sq(q);
            axpy(kind.lambda_reg, q, cotangent);
            axpy(2.0 * kind.lambda_reg, q, extra);
            break;
        }
    }

    Tensor pull = model.score_vjp(u1, s.sigma, cotangent);
    out.grad = std::move(extra);
    axpy(2.0 * s.sigma * s.sigma, pull, out.grad);
    return out;
}

}  // namespace detail

/// ||D(x + sigma*eps1, sigma) - x||^2 for the single draw.
inline double diff_loss(const ScoreModel& model, const Tensor& x, const LossSample& s) {
    detail::check_sample(x, s, false);
    Tensor u1 = x;
    axpy(s.sigma, s.eps1, u1);
    Tensor d1 = denoise(model, u1, s.sigma);
    return norm2_sq(d1 - x);
}

/// diff_loss + lambda * ||x - x_a||^2.
inline double mse_loss(const ScoreModel& model, const Tensor& x, const Tensor& x_a, double lambda,
                       const LossSample& s) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ContractViolation("mse_loss: lambda must be finite and >= 0");
    if (!x_a.same_shape(x)) throw ContractViolation("mse_loss: x_a shape mismatch");
    return diff_loss(model, x, s) + lambda * norm2_sq(x - x_a);
}

/// diff_loss + lambda_reg * ||D(x + sigma*eps1) - D(x_a + sigma*eps2)||^2,
/// both denoiser calls at the same sigma.
inline double sr_loss(const ScoreModel& model, const Tensor& x, const Tensor& x_a,
                      double lambda_reg, const LossSample& s) {
    if (!(lambda_reg >= 0.0) || !std::isfinite(lambda_reg))
        throw ContractViolation("sr_loss: lambda_reg must be finite and >= 0");
    if (!x_a.same_shape(x)) throw ContractViolation("sr_loss: x_a shape mismatch");
    detail::check_sample(x, s, true);
    Tensor u1 = x;
    axpy(s.sigma, s.eps1, u1);
    Tensor d1 = denoise(model, u1, s.sigma);
    Tensor u2 = x_a;
    axpy(s.sigma, s.eps2, u2);
    Tensor d2 = denoise(model, u2, s.sigma);
    return norm2_sq(d1 - x) + lambda_reg * norm2_sq(d1 - d2);
}

inline double loss_value(const LossKind& kind, const ScoreModel& model, const Tensor& x,
                         const Tensor& x_a, const LossSample& s) {
    switch (kind.variant) {
        case LossKind::Variant::Diff:
            return diff_loss(model, x, s);
        case LossKind::Variant::Mse:
            return mse_loss(model, x, x_a, kind.lambda, s);
        case LossKind::Variant::Sr:
            return sr_loss(model, x, x_a, kind.lambda_reg, s);
    }
    throw ContractViolation("loss_value: unknown loss kind");
}

/// Value and exact gradient w.r.t. the clean-space variable x.
inline LossEval loss_eval(const LossKind& kind, const ScoreModel& model, const Tensor& x,
                          const Tensor& x_a, const LossSample& s) {
    detail::check_sample(x, s, kind.variant == LossKind::Variant::Sr);
    Tensor u1 = x;
    axpy(s.sigma, s.eps1, u1);
    return detail::eval(kind, model, x, u1, x_a, s);
}

/// Value and exact gradient w.r.t. the noisy iterate x_t = x + sigma*eps1
/// (eps1 fixed, taken from s). Equals loss_eval at x = x_t - sigma*eps1.
inline LossEval loss_eval_at_noisy(const LossKind& kind, const ScoreModel& model,
                                   const Tensor& x_t, const Tensor& x_a, const LossSample& s) {
    detail::check_sample(x_t, s, kind.variant == LossKind::Variant::Sr);
    Tensor x = x_t;
    axpy(-s.sigma, s.eps1, x);
    return detail::eval(kind, model, x, x_t, x_a, s);
}

inline Tensor loss_grad(const LossKind& kind, const ScoreModel& model, const Tensor& x,
                        const Tensor& x_a, const LossSample& s) {
    return loss_eval(kind, model, x, x_a, s).grad;
}

inline Tensor loss_grad_at_noisy(const LossKind& kind, const ScoreModel& model, const Tensor& x_t,
                                 const Tensor& x_a, const LossSample& s) {
    return loss_eval_at_noisy(kind, model, x_t, x_a, s).grad;
}

}  // namespace scoreopt
