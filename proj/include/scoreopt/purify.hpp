#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "scoreopt/adam.hpp"
#include "scoreopt/errors.hpp"
#include "scoreopt/losses.hpp"
#include "scoreopt/rng.hpp"
#include "scoreopt/score_model.hpp"

namespace scoreopt {

/// Noise-level window; a degenerate range (min == max) pins sigma.
struct NoiseRange {
    double sigma_min;
    double sigma_max;
    NoiseRange(double lo, double hi) : sigma_min(lo), sigma_max(hi) {
        if (!(lo > 0.0) || !(hi >= lo)) throw ConfigError("noise range: need 0 < min <= max");
    }
};

/// sigma ~ U[min, max]. A degenerate range consumes no randomness, so
/// fixed-level configs keep the same downstream draw sequence as each other.
inline double sample_noise_level(const NoiseRange& r, RngStream& rng) {
    if (r.sigma_min == r.sigma_max) return r.sigma_min;
    return rng.uniform(r.sigma_min, r.sigma_max);
}

enum class Optimizer { Adam, PlainGd };

/// Optional per-dimension bounds applied after every iterate update.
struct ClipBox {
    Tensor lo;
    Tensor hi;
};

/// Defaults are the stock transfer-attack setting for the noisy-iterate
/// purifier: SR objective, Adam, lr 0.1, five outer rounds, fixed sigma 0.25.
struct PurifierConfig {
    LossKind loss = LossKind::sr();
    double lr = 0.1;
    std::size_t outer_steps = 5;  // M
    std::size_t inner_steps = 1;  // N, used by score_opt_n only
    NoiseRange noise{0.25, 0.25};
    Optimizer optimizer = Optimizer::Adam;
    std::optional<ClipBox> clip;
    bool record_iterates = false;
};

/// Instrumentation: one loss entry per gradient evaluation, optional iterate
/// snapshot per outer step, score-model call counts, wall time.
struct PurifyTrace {
    std::vector<double> losses;
    std::vector<Tensor> iterates;
    EvalCounts counts;
    double seconds = 0.0;
};

namespace detail {

inline void apply_clip(const std::optional<ClipBox>& clip, Tensor& x) {
    if (!clip) return;
    if (!clip->lo.same_shape(x) || !clip->hi.same_shape(x))
        throw ContractViolation("clip box: shape mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], clip->lo[i], clip->hi[i]);
}

inline void check_iterate(const Tensor& x, std::size_t step) {
    if (!all_finite(x)) throw PurificationDiverged(step);
}

/// Adam or plain gradient step behind one interface.
struct Stepper {
    Optimizer kind;
    double lr;
    AdamState state;

    void reset(const Tensor& like) {
        if (kind == Optimizer::Adam) state = AdamState::init(like);
    }
    Tensor step(const Tensor& x, const Tensor& g) {
        if (kind == Optimizer::PlainGd) {
            Tensor out = x;
            axpy(-lr, g, out);
            return out;
        }
        auto [ns, out] = adam_step(std::move(state), x, g, lr);
        state = std::move(ns);
        return out;
    }
};

inline void validate(const Tensor& x_a, const PurifierConfig& cfg, const char* who) {
    if (!all_finite(x_a)) throw ContractViolation(std::string(who) + ": non-finite input");
    if (!(cfg.lr > 0.0)) throw ConfigError(std::string(who) + ": lr must be positive");
}

inline double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Direct iterate optimization: x_{i+1} = step(x_i, grad loss(x_i)), with a
/// fresh (sigma, eps) draw each round. Draw order per round: sigma, eps1,
/// then eps2 (Sr only). The Adam state persists across rounds.
inline std::pair<Tensor, PurifyTrace> score_opt_o(const ScoreModel& model, const Tensor& x_a,
                                                  const PurifierConfig& cfg, RngStream rng) {
    detail::validate(x_a, cfg, "score_opt_o");
    PurifyTrace trace;
    CountingScoreModel counted(model, trace.counts);
    const auto t0 = std::chrono::steady_clock::now();

    Tensor x = x_a;
    detail::Stepper opt{cfg.optimizer, cfg.lr, {}};
    opt.reset(x);
    const bool needs_eps2 = cfg.loss.variant == LossKind::Variant::Sr;

    for (std::size_t i = 0; i < cfg.outer_steps; ++i) {
        LossSample s;
        s.sigma = sample_noise_level(cfg.noise, rng);
        s.eps1 = gaussian(rng, x.shape());
        if (needs_eps2) s.eps2 = gaussian(rng, x.shape());
        LossEval ev = loss_eval(cfg.loss, counted, x, x_a, s);
        x = opt.step(x, ev.grad);
        detail::apply_clip(cfg.clip, x);
        detail::check_iterate(x, i);
        trace.losses.push_back(ev.value);
        if (cfg.record_iterates) trace.iterates.push_back(x);
    }

    trace.seconds = detail::elapsed_seconds(t0);
    return {std::move(x), std::move(trace)};
}

/// Noisy-iterate optimization: each outer round draws sigma and eps1 once,
/// forms x_t = x_i + sigma*eps1, runs N gradient steps on x_t (eps2 redrawn
/// per inner step for Sr; Adam state fresh per round), then one-shot
/// denoises back: x_{i+1} = D(x_t, sigma). N = 0 reduces to stochastic
/// one-shot denoising. Draw order per round: sigma, eps1, then per inner
/// step eps2 (Sr only).
inline std::pair<Tensor, PurifyTrace> score_opt_n(const ScoreModel& model, const Tensor& x_a,
                                                  const PurifierConfig& cfg, RngStream rng) {
    detail::validate(x_a, cfg, "score_opt_n");
    PurifyTrace trace;
    CountingScoreModel counted(model, trace.counts);
    const auto t0 = std::chrono::steady_clock::now();

    Tensor x = x_a;
    const bool needs_eps2 = cfg.loss.variant == LossKind::Variant::Sr;

    for (std::size_t i = 0; i < cfg.outer_steps; ++i) {
        LossSample s;
        s.sigma = sample_noise_level(cfg.noise, rng);
        s.eps1 = gaussian(rng, x.shape());

        Tensor xt = x;
        axpy(s.sigma, s.eps1, xt);
        detail::Stepper opt{cfg.optimizer, cfg.lr, {}};
        opt.reset(xt);

        for (std::size_t j = 0; j < cfg.inner_steps; ++j) {
            if (needs_eps2) s.eps2 = gaussian(rng, x.shape());
            LossEval ev = loss_eval_at_noisy(cfg.loss, counted, xt, x_a, s);
            xt = opt.step(xt, ev.grad);
            detail::apply_clip(cfg.clip, xt);
            detail::check_iterate(xt, i);
            trace.losses.push_back(ev.value);
        }

        x = denoise(counted, xt, s.sigma);
        detail::apply_clip(cfg.clip, x);
        detail::check_iterate(x, i);
        if (cfg.record_iterates) trace.iterates.push_back(x);
    }

    trace.seconds = detail::elapsed_seconds(t0);
    return {std::move(x), std::move(trace)};
}

/// Sequential diffusion-purification baseline: diffuse to sigma_star in one
/// shot, walk a decreasing geometric sigma grid with ancestral
/// variance-exploding updates, finish with a one-shot denoise. Exactly
/// `steps` score evaluations; steps = 1 is denoise(x_a + sigma_star*eps).
inline std::pair<Tensor, PurifyTrace> multi_step_purify(const ScoreModel& model, const Tensor& x_a,
                                                        double sigma_star, std::size_t steps,
                                                        RngStream rng) {
    if (steps < 1) throw ContractViolation("multi_step_purify: steps must be >= 1");
    if (!(sigma_star > 0.0)) throw ContractViolation("multi_step_purify: sigma_star must be > 0");
    if (!all_finite(x_a)) throw ContractViolation("multi_step_purify: non-finite input");

    PurifyTrace trace;
    CountingScoreModel counted(model, trace.counts);
    const auto t0 = std::chrono::steady_clock::now();

    Tensor x = x_a;
    Tensor eps = gaussian(rng, x.shape());
    axpy(sigma_star, eps, x);

    // geometric grid from sigma_star down to a small floor
    constexpr double kFloorRatio = 0.02;
    std::vector<double> grid(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const double frac = (steps == 1) ? 0.0
                                         : static_cast<double>(k) / static_cast<double>(steps - 1);
        grid[k] = sigma_star * std::pow(kFloorRatio, frac);
    }

    for (std::size_t k = 0; k + 1 < steps; ++k) {
        const double shi = grid[k];
        const double slo = grid[k + 1];
        Tensor sc = counted.score(x, shi);
        const double dv = shi * shi - slo * slo;
        axpy(dv, sc, x);
        const double noise_sd = std::sqrt(slo * slo * dv / (shi * shi));
        Tensor z = gaussian(rng, x.shape());
        axpy(noise_sd, z, x);
        detail::check_iterate(x, k);
    }

    x = denoise(counted, x, grid[steps - 1]);
    detail::check_iterate(x, steps - 1);

    trace.seconds = detail::elapsed_seconds(t0);
    return {std::move(x), std::move(trace)};
}

}  // namespace scoreopt
