#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "scoreopt/tensor.hpp"

namespace scoreopt {

/// A score-based prior: exposes the score s(x, sigma) of the sigma-noised
/// data distribution and its input-space vector-Jacobian product. The time
/// index is identified with sigma (variance-exploding convention).
class ScoreModel {
  public:
    virtual ~ScoreModel() = default;

    virtual std::size_t dim() const = 0;

    /// grad_x log p_sigma(x)
    virtual Tensor score(const Tensor& x, double sigma) const = 0;

    /// v^T (d score / d x), i.e. reverse-mode pull-back of v through score.
    virtual Tensor score_vjp(const Tensor& x, double sigma, const Tensor& v) const = 0;

    virtual std::string kind() const = 0;
    virtual void save(std::ostream& os) const = 0;
};

/// Tweedie one-shot denoiser: x_t + sigma^2 * s(x_t; sigma), the posterior
/// mean of the clean sample given the noised one.
inline Tensor denoise(const ScoreModel& m, const Tensor& x_t, double sigma) {
    Tensor s = m.score(x_t, sigma);
    Tensor out = x_t;
    axpy(sigma * sigma, s, out);
    return out;
}

/// Score-network evaluation counters (the NFE currency of the benchmarks).
struct EvalCounts {
    std::uint64_t forwards = 0;
    std::uint64_t vjps = 0;
};

/// Pass-through wrapper that counts forward and vjp evaluations. The counts
/// object is owned by the caller, so instrumented runs stay thread-safe as
/// long as each invocation wraps its own counter.
class CountingScoreModel final : public ScoreModel {
  public:
    CountingScoreModel(const ScoreModel& inner, EvalCounts& counts)
        : inner_(inner), counts_(counts) {}

    std::size_t dim() const override { return inner_.dim(); }
    Tensor score(const Tensor& x, double sigma) const override {
        ++counts_.forwards;
        return inner_.score(x, sigma);
    }
    Tensor score_vjp(const Tensor& x, double sigma, const Tensor& v) const override {
        ++counts_.vjps;
        return inner_.score_vjp(x, sigma, v);
    }
    std::string kind() const override { return inner_.kind(); }
    void save(std::ostream& os) const override { inner_.save(os); }

  private:
    const ScoreModel& inner_;
    EvalCounts& counts_;
};

}  // namespace scoreopt
