#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "scoreopt/adam.hpp"
#include "scoreopt/errors.hpp"
#include "scoreopt/rng.hpp"
#include "scoreopt/score_model.hpp"
#include "scoreopt/tensor.hpp"
#include "scoreopt/text_format.hpp"

namespace scoreopt {

/// Small tanh MLP score network. The net predicts the noise direction
/// eps_hat(x_t, sigma) and the score is -eps_hat/sigma, which keeps the raw
/// output O(1) across noise levels. sigma conditions the net through input
/// features of l = log(sigma): [l, sin l, cos l, sin 2l, cos 2l]. Forward
/// pass, input-space vjp and parameter gradients are all derived by hand so
/// the whole pipeline stays dependency-free and finite-difference checkable.
class MlpScoreNet final : public ScoreModel {
  public:
    static constexpr std::size_t kSigmaFeatures = 5;

    /// Random init: weights N(0, 1/fan_in), biases zero.
    MlpScoreNet(std::size_t dim, std::vector<std::size_t> hidden, RngStream& rng,
                std::string fingerprint = "none")
        : dim_(dim), hidden_(std::move(hidden)), fingerprint_(std::move(fingerprint)) {
        if (dim_ == 0) throw ContractViolation("MlpScoreNet: dim must be positive");
        std::size_t in = dim_ + kSigmaFeatures;
        std::vector<std::size_t> outs = hidden_;
        outs.push_back(dim_);
        for (std::size_t out : outs) {
            if (out == 0) throw ContractViolation("MlpScoreNet: zero layer width");
            Tensor W({out, in});
            const double sd = std::sqrt(1.0 / static_cast<double>(in));
            for (std::size_t i = 0; i < W.size(); ++i) W[i] = sd * rng.normal();
            W_.push_back(std::move(W));
            b_.emplace_back(Tensor({out}));
            in = out;
        }
    }

    /// Assemble from explicit parameters (deserialization path).
    MlpScoreNet(std::size_t dim, std::vector<std::size_t> hidden, std::vector<Tensor> weights,
                std::vector<Tensor> biases, std::string fingerprint)
        : dim_(dim),
          hidden_(std::move(hidden)),
          W_(std::move(weights)),
          b_(std::move(biases)),
          fingerprint_(std::move(fingerprint)) {
        if (dim_ == 0) throw ContractViolation("MlpScoreNet: dim must be positive");
        if (W_.size() != hidden_.size() + 1 || b_.size() != W_.size())
            throw ContractViolation("MlpScoreNet: layer count mismatch");
        std::size_t in = dim_ + kSigmaFeatures;
        for (std::size_t l = 0; l < W_.size(); ++l) {
            const std::size_t out = (l < hidden_.size()) ? hidden_[l] : dim_;
            if (W_[l].shape() != std::vector<std::size_t>{out, in} || b_[l].size() != out)
                throw ContractViolation("MlpScoreNet: layer dimensions do not chain");
            if (!all_finite(W_[l]) || !all_finite(b_[l]))
                throw ContractViolation("MlpScoreNet: non-finite parameters");
            in = out;
        }
    }

    std::size_t dim() const override { return dim_; }
    std::size_t layer_count() const { return W_.size(); }
    const std::vector<std::size_t>& hidden() const { return hidden_; }
    std::vector<Tensor>& weights() { return W_; }
    std::vector<Tensor>& biases() { return b_; }
    const std::vector<Tensor>& weights() const { return W_; }
    const std::vector<Tensor>& biases() const { return b_; }
    const std::string& fingerprint() const { return fingerprint_; }
    void set_fingerprint(std::string fp) { fingerprint_ = std::move(fp); }

    /// Per-layer inputs recorded by eps_forward, consumed by backward.
    struct Activations {
        std::vector<Tensor> inputs;
    };

    struct Grads {
        std::vector<Tensor> dW;
        std::vector<Tensor> db;
        Tensor dinput;  // w.r.t. the embedded input [x, phi(sigma)]
    };

    /// Raw network output eps_hat(x, sigma).
    Tensor eps_forward(const Tensor& x, double sigma, Activations* acts = nullptr) const {
        Tensor h = embed(x, sigma);
        if (acts) {
            acts->inputs.clear();
            acts->inputs.push_back(h);
        }
        for (std::size_t l = 0; l < W_.size(); ++l) {
            Tensor pre = matvec(W_[l], h);
            pre += b_[l];
            if (l + 1 < W_.size()) {
                for (std::size_t i = 0; i < pre.size(); ++i) pre[i] = std::tanh(pre[i]);
                if (acts) acts->inputs.push_back(pre);
            }
            h = std::move(pre);
        }
        return h;
    }

    /// Reverse pass from a cotangent on eps_hat. Parameter gradients are
    /// filled only when requested (the vjp path skips them).
    Grads backward(const Activations& acts, Tensor dout, bool want_param_grads) const {
        if (acts.inputs.size() != W_.size())
            throw ContractViolation("MlpScoreNet::backward: stale activations");
        Grads g;
        if (want_param_grads) {
            g.dW.resize(W_.size());
            g.db.resize(W_.size());
        }
        Tensor grad = std::move(dout);
        for (std::size_t l = W_.size(); l-- > 0;) {
            const Tensor& in = acts.inputs[l];
            if (want_param_grads) {
                Tensor dW({grad.size(), in.size()});
                for (std::size_t r = 0; r < grad.size(); ++r)
                    for (std::size_t c = 0; c < in.size(); ++c) dW.at(r, c) = grad[r] * in[c];
                g.dW[l] = std::move(dW);
                g.db[l] = grad;
            }
            grad = matvec_t(W_[l], grad);
            if (l > 0)  // undo tanh: in == tanh(pre), so tanh' = 1 - in^2
                for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= 1.0 - in[i] * in[i];
        }
        g.dinput = std::move(grad);
        return g;
    }

    Tensor score(const Tensor& x, double sigma) const override {
        Tensor eps = eps_forward(x, sigma);
        eps *= -1.0 / sigma;
        return eps;
    }

    Tensor score_vjp(const Tensor& x, double sigma, const Tensor& v) const override {
        if (!x.same_shape(v)) throw ContractViolation("score_vjp: shape mismatch");
        Activations acts;
        (void)eps_forward(x, sigma, &acts);
        Grads g = backward(acts, v * (-1.0 / sigma), false);
        Tensor out({dim_});
        for (std::size_t i = 0; i < dim_; ++i) out[i] = g.dinput[i];
        return out;
    }

    std::string kind() const override { return "mlp"; }

    void save(std::ostream& os) const override {
        os << "kind mlp\n";
        os << "dim " << dim_ << '\n';
        os << "fingerprint " << fingerprint_ << '\n';
        os << "hidden " << hidden_.size();
        for (std::size_t h : hidden_) os << ' ' << h;
        os << '\n';
        for (std::size_t l = 0; l < W_.size(); ++l) {
            textio::write_array(os, "w" + std::to_string(l), W_[l]);
            textio::write_array(os, "b" + std::to_string(l), b_[l]);
        }
    }

    static MlpScoreNet load(textio::TokenReader& r) {
        r.expect("dim");
        const auto d = static_cast<std::size_t>(r.integer());
        r.expect("fingerprint");
        std::string fp = r.word();
        r.expect("hidden");
        const auto n = static_cast<std::size_t>(r.integer());
        std::vector<std::size_t> hidden(n);
        for (auto& h : hidden) h = static_cast<std::size_t>(r.integer());
        std::vector<Tensor> Ws, bs;
        for (std::size_t l = 0; l <= n; ++l) {
            Ws.push_back(r.array("w" + std::to_string(l), 2));
            bs.push_back(r.array("b" + std::to_string(l), 1));
        }
        return MlpScoreNet(d, std::move(hidden), std::move(Ws), std::move(bs), std::move(fp));
    }

  private:
    Tensor embed(const Tensor& x, double sigma) const {
        if (x.size() != dim_) throw ContractViolation("MlpScoreNet: input dimension mismatch");
        if (!(sigma > 0.0)) throw ContractViolation("MlpScoreNet: sigma must be positive");
        Tensor z({dim_ + kSigmaFeatures});
        for (std::size_t i = 0; i < dim_; ++i) z[i] = x[i];
        const double l = std::log(sigma);
        z[dim_] = l;
        z[dim_ + 1] = std::sin(l);
        z[dim_ + 2] = std::cos(l);
        z[dim_ + 3] = std::sin(2.0 * l);
        z[dim_ + 4] = std::cos(2.0 * l);
        return z;
    }

    std::size_t dim_ = 0;
    std::vector<std::size_t> hidden_;
    std::vector<Tensor> W_;
    std::vector<Tensor> b_;
    std::string fingerprint_;
};

/// Denoising-score-matching training configuration. sigma is drawn
/// log-uniformly from [sigma_min, sigma_max]; `weight` is an optional
/// per-sigma loss weight (empty = constant 1, the default objective).
struct DsmTrainConfig {
    double sigma_min = 0.02;
    double sigma_max = 2.0;
    std::size_t batch = 64;
    std::size_t iters = 10000;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    std::function<double(double)> weight;
};

/// Minimize the single-draw denoising objective E ||denoise(x + sigma*eps,
/// sigma) - x||^2 over the dataset with Adam. Deterministic per seed.
/// iters = 0 returns the net unchanged. Throws TrainingDiverged if the batch
/// loss goes non-finite.
inline MlpScoreNet train_dsm(MlpScoreNet net, const std::vector<Tensor>& data,
                             const DsmTrainConfig& cfg,
                             std::vector<double>* loss_trace = nullptr) {
    if (data.empty()) throw ContractViolation("train_dsm: empty dataset");
    if (!(cfg.sigma_min > 0.0) || !(cfg.sigma_max >= cfg.sigma_min))
        throw ConfigError("train_dsm: need 0 < sigma_min <= sigma_max");
    if (cfg.batch == 0) throw ConfigError("train_dsm: batch must be positive");
    if (!(cfg.lr > 0.0)) throw ConfigError("train_dsm: lr must be positive");
    for (const Tensor& x : data)
        if (x.size() != net.dim()) throw ContractViolation("train_dsm: data dimension mismatch");

    const std::size_t L = net.layer_count();
    std::vector<AdamState> stw, stb;
    for (std::size_t l = 0; l < L; ++l) {
        stw.push_back(AdamState::init(net.weights()[l]));
        stb.push_back(AdamState::init(net.biases()[l]));
    }

    RngStream rng(cfg.seed);
    const double llo = std::log(cfg.sigma_min);
    const double lhi = std::log(cfg.sigma_max);
    const std::size_t n = data.size();
    const std::size_t d = net.dim();

    for (std::size_t it = 0; it < cfg.iters; ++it) {
        std::vector<Tensor> gw, gb;
        for (std::size_t l = 0; l < L; ++l) {
            gw.push_back(Tensor::zeros_like(net.weights()[l]));
            gb.push_back(Tensor::zeros_like(net.biases()[l]));
        }
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < cfg.batch; ++b) {
            const auto idx = static_cast<std::size_t>(rng.uniform01() * static_cast<double>(n));
            const Tensor& x = data[idx];
            const double sigma = std::exp(rng.uniform(llo, lhi));
            const double w = cfg.weight ? cfg.weight(sigma) : 1.0;
            const double ws2 = w * sigma * sigma;
            Tensor eps = gaussian(rng, {d});
            Tensor xt = x;
            axpy(sigma, eps, xt);

            MlpScoreNet::Activations acts;
            Tensor eps_hat = net.eps_forward(xt, sigma, &acts);

            // ||denoise(xt) - x||^2 = sigma^2 ||eps - eps_hat||^2
            Tensor dout({eps_hat.size()});
            double li = 0.0;
            for (std::size_t i = 0; i < eps_hat.size(); ++i) {
                const double r = eps_hat[i] - eps[i];
                li += r * r;
                dout[i] = 2.0 * ws2 * r;
            }
            loss_sum += ws2 * li;

            MlpScoreNet::Grads g = net.backward(acts, std::move(dout), true);
            for (std::size_t l = 0; l < L; ++l) {
                gw[l] += g.dW[l];
                gb[l] += g.db[l];
            }
        }
        const double mean_loss = loss_sum / static_cast<double>(cfg.batch);
        if (!std::isfinite(mean_loss)) throw TrainingDiverged(it, "non-finite DSM loss");
        if (loss_trace) loss_trace->push_back(mean_loss);

        const double inv_batch = 1.0 / static_cast<double>(cfg.batch);
        for (std::size_t l = 0; l < L; ++l) {
            gw[l] *= inv_batch;
            gb[l] *= inv_batch;
            auto [nsw, npw] = adam_step(std::move(stw[l]), net.weights()[l], gw[l], cfg.lr);
            stw[l] = std::move(nsw);
            net.weights()[l] = std::move(npw);
            auto [nsb, npb] = adam_step(std::move(stb[l]), net.biases()[l], gb[l], cfg.lr);
            stb[l] = std::move(nsb);
            net.biases()[l] = std::move(npb);
        }
    }

    if (cfg.iters > 0) {
        net.set_fingerprint("dsm;iters=" + std::to_string(cfg.iters) +
                            ";lr=" + textio::fmt_double(cfg.lr) +
                            ";smin=" + textio::fmt_double(cfg.sigma_min) +
                            ";smax=" + textio::fmt_double(cfg.sigma_max) +
                            ";batch=" + std::to_string(cfg.batch) +
                            ";seed=" + std::to_string(cfg.seed));
    }
    return net;
}

}  // namespace scoreopt
