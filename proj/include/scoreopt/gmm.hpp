#pragma once

#include <cmath>
#include <numbers>
#include <ostream>
#include <vector>

#include "scoreopt/rng.hpp"
#include "scoreopt/score_model.hpp"
#include "scoreopt/tensor.hpp"
#include "scoreopt/text_format.hpp"

namespace scoreopt {

/// Isotropic Gaussian mixture with exact score, Hessian and posterior mean.
/// Convolving with N(0, sigma^2 I) keeps it a GMM with variances v_k + sigma^2,
/// so every noised quantity below is closed-form. This is the ground-truth
/// prior used wherever the tests need an oracle.
class GmmModel final : public ScoreModel {
  public:
    GmmModel(std::vector<double> weights, std::vector<Tensor> means, std::vector<double> variances)
        : weights_(std::move(weights)), means_(std::move(means)), variances_(std::move(variances)) {
        if (weights_.empty() || weights_.size() != means_.size() ||
            weights_.size() != variances_.size())
            throw ContractViolation("GmmModel: component count mismatch");
        double wsum = 0.0;
        for (double w : weights_) {
            if (!(w > 0.0)) throw ContractViolation("GmmModel: weights must be positive");
            wsum += w;
        }
        if (std::abs(wsum - 1.0) > 1e-12)
            throw ContractViolation("GmmModel: weights must sum to 1");
        for (double v : variances_)
            if (!(v > 0.0)) throw ContractViolation("GmmModel: variances must be positive");
        const std::size_t d = means_[0].size();
        for (const Tensor& mu : means_)
            if (mu.size() != d) throw ContractViolation("GmmModel: mean dimension mismatch");
    }

    std::size_t dim() const override { return means_[0].size(); }
    std::size_t components() const { return weights_.size(); }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<Tensor>& means() const { return means_; }
    const std::vector<double>& variances() const { return variances_; }

    /// log sum_k w_k N(x; mu_k, (v_k + sigma^2) I), log-sum-exp stabilized.
    double noised_logdensity(const Tensor& x, double sigma) const {
        std::vector<double> lt = log_terms(x, sigma);
        return logsumexp(lt);
    }

    Tensor score(const Tensor& x, double sigma) const override {
        std::vector<double> r = responsibilities(x, sigma);
        const double s2 = sigma * sigma;
        Tensor g = Tensor::zeros_like(x);
        for (std::size_t k = 0; k < weights_.size(); ++k) {
            const double inv = r[k] / (variances_[k] + s2);
            for (std::size_t i = 0; i < x.size(); ++i) g[i] += inv * (means_[k][i] - x[i]);
        }
        return g;
    }

    /// Hessian of the noised log-density applied to v:
    ///   H = sum_k r_k g_k g_k^T - s s^T - (sum_k r_k / s_k) I,
    /// with g_k = (mu_k - x)/s_k, s the mixture score, s_k = v_k + sigma^2.
    Tensor score_vjp(const Tensor& x, double sigma, const Tensor& v) const override {
        if (!x.same_shape(v)) throw ContractViolation("score_vjp: shape mismatch");
        std::vector<double> r = responsibilities(x, sigma);
        const double s2 = sigma * sigma;
        Tensor out = Tensor::zeros_like(x);
        Tensor sc = Tensor::zeros_like(x);
        double trace_coeff = 0.0;
        for (std::size_t k = 0; k < weights_.size(); ++k) {
            const double sk = variances_[k] + s2;
            trace_coeff += r[k] / sk;
            double gk_dot_v = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i)
                gk_dot_v += (means_[k][i] - x[i]) / sk * v[i];
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double gki = (means_[k][i] - x[i]) / sk;
                out[i] += r[k] * gki * gk_dot_v;
                sc[i] += r[k] * gki;
            }
        }
        const double sc_dot_v = dot(sc, v);
        for (std::size_t i = 0; i < x.size(); ++i)
            out[i] -= sc[i] * sc_dot_v + trace_coeff * v[i];
        return out;
    }

    /// Posterior component probabilities of the noised mixture at x.
    std::vector<double> responsibilities(const Tensor& x, double sigma) const {
        std::vector<double> lt = log_terms(x, sigma);
        const double lse = logsumexp(lt);
        std::vector<double> r(lt.size());
        for (std::size_t k = 0; k < lt.size(); ++k) r[k] = std::exp(lt[k] - lse);
        return r;
    }

    int sample_component(RngStream& rng) const {
        double u = rng.uniform01();
        double acc = 0.0;
        for (std::size_t k = 0; k < weights_.size(); ++k) {
            acc += weights_[k];
            if (u < acc) return static_cast<int>(k);
        }
        return static_cast<int>(weights_.size()) - 1;
    }

    Tensor sample(RngStream& rng) const {
        const int k = sample_component(rng);
        return sample_from(static_cast<std::size_t>(k), rng);
    }

    Tensor sample_from(std::size_t k, RngStream& rng) const {
        Tensor x = gaussian(rng, {dim()});
        const double sd = std::sqrt(variances_[k]);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = means_[k][i] + sd * x[i];
        return x;
    }

    std::string kind() const override { return "gmm"; }

    void save(std::ostream& os) const override {
        os << "kind gmm\n";
        os << "components " << weights_.size() << " dim " << dim() << '\n';
        textio::write_scalars(os, "weights", weights_);
        textio::write_scalars(os, "variances", variances_);
        for (std::size_t k = 0; k < means_.size(); ++k)
            textio::write_array(os, "mean" + std::to_string(k), means_[k]);
    }

    static GmmModel load(textio::TokenReader& r) {
        r.expect("components");
        const auto kcount = static_cast<std::size_t>(r.integer());
        r.expect("dim");
        const auto d = static_cast<std::size_t>(r.integer());
        std::vector<double> w = r.scalars("weights");
        std::vector<double> v = r.scalars("variances");
        std::vector<Tensor> mu;
        mu.reserve(kcount);
        for (std::size_t k = 0; k < kcount; ++k) {
            mu.push_back(r.array("mean" + std::to_string(k), 1));
            if (mu.back().size() != d) throw ConfigError("gmm model file: bad mean dimension");
        }
        return GmmModel(std::move(w), std::move(mu), std::move(v));
    }

  private:
    std::vector<double> log_terms(const Tensor& x, double sigma) const {
        if (x.size() != dim()) throw ContractViolation("GmmModel: input dimension mismatch");
        const double s2 = sigma * sigma;
        const double d = static_cast<double>(dim());
        std::vector<double> lt(weights_.size());
        for (std::size_t k = 0; k < weights_.size(); ++k) {
            const double sk = variances_[k] + s2;
            double q = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double dxi = x[i] - means_[k][i];
                q += dxi * dxi;
            }
            lt[k] = std::log(weights_[k]) - 0.5 * d * std::log(2.0 * std::numbers::pi * sk) -
                    0.5 * q / sk;
        }
        return lt;
    }

    static double logsumexp(const std::vector<double>& xs) {
        double m = xs[0];
        for (double x : xs) m = std::max(m, x);
        double s = 0.0;
        for (double x : xs) s += std::exp(x - m);
        return m + std::log(s);
    }

    std::vector<double> weights_;
    std::vector<Tensor> means_;
    std::vector<double> variances_;
};

}  // namespace scoreopt
