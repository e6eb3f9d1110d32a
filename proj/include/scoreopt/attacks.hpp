#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>

#include "scoreopt/classifier.hpp"
#include "scoreopt/errors.hpp"
#include "scoreopt/purify.hpp"
#include "scoreopt/rng.hpp"
#include "scoreopt/score_model.hpp"
#include "scoreopt/tensor.hpp"

namespace scoreopt {

enum class Norm { L2, Linf };

/// Perturbation budget: the adversary may move each input anywhere inside the
/// ||.||_p ball of radius epsilon around it.
struct ThreatModel {
    Norm norm;
    double epsilon;

    ThreatModel(Norm n, double eps) : norm(n), epsilon(eps) {
        if (!(eps > 0.0) || !std::isfinite(eps))
            throw ConfigError("threat model: epsilon must be positive and finite");
    }
};

/// How the adversary obtains input gradients of the attacked loss.
enum class OracleMode { ClassifierOnly, BpdaIdentity, OneShotApprox, ExactUnroll };

struct AttackConfig {
    double alpha = 0.0;
    std::size_t iters = 0;
    std::size_t eot_k = 1;
    OracleMode mode = OracleMode::ClassifierOnly;
    bool random_start = false;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw ConfigError("attack: step size must be positive and finite");
        if (eot_k < 1) throw ConfigError("attack: need at least one EOT replicate");
    }

    // stock budgets for the three evaluation adversaries
    static AttackConfig transfer(double eps, std::uint64_t seed = 0) {
        return {eps / 4.0, 40, 1, OracleMode::ClassifierOnly, false, seed};
    }
    static AttackConfig bpda_eot(double eps, std::uint64_t seed = 0) {
        return {eps / 4.0, 50, 15, OracleMode::BpdaIdentity, false, seed};
    }
    static AttackConfig pgd_eot(double eps, std::uint64_t seed = 0) {
        return {eps / 4.0, 20, 20, OracleMode::OneShotApprox, false, seed};
    }
    static AttackConfig exact_unroll(double eps, std::uint64_t seed = 0) {
        return {eps / 4.0, 50, 15, OracleMode::ExactUnroll, false, seed};
    }
};

/// A stochastic purifier with its randomness abstracted away.
using PurifyFn = std::function<Tensor(const Tensor&, RngStream&)>;

/// Gradient oracle: mode tag plus the composed defense/classifier handles.
/// grad(x, y, rng) must return a tensor of x's shape.
struct GradOracle {
    OracleMode mode;
    std::function<Tensor(const Tensor&, int, RngStream&)> grad;
};

/// Projects a perturbation onto the threat ball: per-coordinate clamp for
/// l_inf, radial rescale for l_2 (no-op inside the ball).
inline Tensor project(Tensor delta, const ThreatModel& threat) {
    if (!all_finite(delta)) throw ContractViolation("project: non-finite perturbation");
    if (threat.norm == Norm::Linf) {
        for (std::size_t i = 0; i < delta.size(); ++i)
            delta[i] = std::clamp(delta[i], -threat.epsilon, threat.epsilon);
        return delta;
    }
    const double n = norm2(delta);
    if (n > threat.epsilon) delta *= threat.epsilon / n;
    return delta;
}

/// Projected gradient ascent on the attacked loss: signed steps for l_inf,
/// normalized-gradient steps for l_2; the perturbation is re-projected after
/// every step, so the threat bound holds by construction.
inline Tensor pgd(const GradOracle& oracle, const Tensor& x, int y, const ThreatModel& threat,
                  const AttackConfig& cfg, RngStream& rng) {
    cfg.validate();
    if (!all_finite(x)) throw ContractViolation("pgd: non-finite input");

    Tensor delta = Tensor::zeros_like(x);
    if (cfg.random_start) {
        for (std::size_t i = 0; i < delta.size(); ++i)
            delta[i] = rng.uniform(-threat.epsilon, threat.epsilon);
        delta = project(std::move(delta), threat);
    }

    for (std::size_t it = 0; it < cfg.iters; ++it) {
        Tensor cur = x;
        cur += delta;
        const Tensor g = oracle.grad(cur, y, rng);
        if (g.shape() != x.shape())
            throw ContractViolation("pgd: oracle gradient has the wrong shape");
        if (!all_finite(g)) throw AttackAborted(it, "oracle returned a non-finite gradient");
        if (threat.norm == Norm::Linf) {
            for (std::size_t i = 0; i < delta.size(); ++i) {
                if (g[i] > 0.0)
                    delta[i] += cfg.alpha;
                else if (g[i] < 0.0)
                    delta[i] -= cfg.alpha;
            }
        } else {
            const double n = norm2(g);
            if (n > 0.0) {
                Tensor step = g;
                step *= cfg.alpha / n;
                delta += step;
            }
        }
        delta = project(std::move(delta), threat);
    }
    Tensor out = x;
    out += delta;
    return out;
}

/// Mean of k gradient evaluations, each on its own substream of a fresh
/// spawn; the sum runs in replicate order, so results are deterministic and
/// replicates could safely be evaluated concurrently.
inline Tensor eot_gradient(const std::function<Tensor(const Tensor&, int, RngStream&)>& fn,
                           const Tensor& x, int y, std::size_t k, RngStream& rng) {
    if (k < 1) throw ContractViolation("eot_gradient: need k >= 1");
    RngStream base = rng.spawn();
    Tensor acc = Tensor::zeros_like(x);
    for (std::size_t j = 0; j < k; ++j) {
        RngStream sub = base.substream(j);
        acc += fn(x, y, sub);
    }
    acc *= 1.0 / static_cast<double>(k);
    return acc;
}

/// Classifier-only gradients: what a transfer adversary that ignores the
/// defense would use. Deterministic; the rng is untouched.
inline GradOracle make_classifier_oracle(const Classifier& clf) {
    return {OracleMode::ClassifierOnly,
            [&clf](const Tensor& x, int y, RngStream&) { return clf.loss_input_grad(x, y); }};
}

/// BPDA with EOT: purify stochastically, take the classifier gradient at the
/// purified point, and pretend the purifier's Jacobian is the identity.
inline GradOracle make_bpda_oracle(PurifyFn purify, const Classifier& clf, std::size_t k) {
    auto one = [purify = std::move(purify), &clf](const Tensor& x, int y, RngStream& r) {
        return clf.loss_input_grad(purify(x, r), y);
    };
    return {OracleMode::BpdaIdentity,
            [one = std::move(one), k](const Tensor& x, int y, RngStream& r) {
                return eot_gradient(one, x, y, k, r);
            }};
}

/// Exact gradient of classifier(denoise(x + sigma*eps, sigma)) averaged over
/// k draws of (sigma, eps). The denoiser Jacobian is I + sigma^2 ds/dx, so
/// the pullback of g is g + sigma^2 vjp(u, sigma, g).
inline GradOracle make_oneshot_oracle(const ScoreModel& model, const Classifier& clf,
                                      NoiseRange noise, std::size_t k) {
    auto one = [&model, &clf, noise](const Tensor& x, int y, RngStream& r) {
        const double sigma = sample_noise_level(noise, r);
        Tensor u = gaussian(r, x.shape());
        u *= sigma;
        u += x;
        const Tensor d = denoise(model, u, sigma);
        const Tensor gp = clf.loss_input_grad(d, y);
        Tensor g = model.score_vjp(u, sigma, gp);
        g *= sigma * sigma;
        g += gp;
        return g;
    };
    return {OracleMode::OneShotApprox,
            [one = std::move(one), k](const Tensor& x, int y, RngStream& r) {
                return eot_gradient(one, x, y, k, r);
            }};
}

/// Ground-truth adversary for tiny purifiers: central finite differences of
/// classifier(purify(x)) with the purifier's randomness frozen per replicate,
/// so the differentiated map is deterministic.
inline GradOracle make_exact_unroll_oracle(PurifyFn purify, const Classifier& clf, std::size_t k,
                                           double h = 1e-5) {
    if (!(h > 0.0)) throw ContractViolation("exact unroll: need h > 0");
    auto one = [purify = std::move(purify), &clf, h](const Tensor& x, int y, RngStream& r) {
        const RngStream frozen = r;
        Tensor g = Tensor::zeros_like(x);
        for (std::size_t i = 0; i < x.size(); ++i) {
            Tensor up = x, dn = x;
            up[i] += h;
            dn[i] -= h;
            RngStream ra = frozen, rb = frozen;
            const double fa = clf.ce_loss(purify(up, ra), y);
            const double fb = clf.ce_loss(purify(dn, rb), y);
            g[i] = (fa - fb) / (2.0 * h);
        }
        return g;
    };
    return {OracleMode::ExactUnroll,
            [one = std::move(one), k](const Tensor& x, int y, RngStream& r) {
                return eot_gradient(one, x, y, k, r);
            }};
}

/// PGD through the purifier with identity backward passes (BPDA) and
/// EOT-averaged gradients.
inline Tensor bpda_eot_attack(PurifyFn defense, const Classifier& clf, const Tensor& x, int y,
                              const ThreatModel& threat, const AttackConfig& cfg,
                              RngStream& rng) {
    const GradOracle oracle = make_bpda_oracle(std::move(defense), clf, cfg.eot_k);
    return pgd(oracle, x, y, threat, cfg, rng);
}

/// PGD whose backward path differentiates the one-shot denoising defense
/// exactly, EOT-averaged over noise draws.
inline Tensor pgd_eot_oneshot(const ScoreModel& model, const Classifier& clf, NoiseRange noise,
                              const Tensor& x, int y, const ThreatModel& threat,
                              const AttackConfig& cfg, RngStream& rng) {
    const GradOracle oracle = make_oneshot_oracle(model, clf, noise, cfg.eot_k);
    return pgd(oracle, x, y, threat, cfg, rng);
}

}  // namespace scoreopt
