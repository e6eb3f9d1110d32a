#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "scoreopt/adam.hpp"
#include "scoreopt/errors.hpp"
#include "scoreopt/rng.hpp"
#include "scoreopt/tensor.hpp"
#include "scoreopt/text_format.hpp"

namespace scoreopt {

/// Points with integer class labels in [0, C).
struct LabeledSet {
    std::vector<Tensor> points;
    std::vector<int> labels;

    std::size_t size() const { return points.size(); }
    std::size_t dim() const { return points.empty() ? 0 : points[0].size(); }

    void validate(std::size_t classes) const {
        if (points.size() != labels.size())
            throw ContractViolation("labeled set: points/labels length mismatch");
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (points[i].size() != dim())
                throw ContractViolation("labeled set: inconsistent dimensions");
            if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
                throw ContractViolation("labeled set: label out of range");
        }
    }
};

/// Softmax classifier with an optional tanh hidden layer; hidden = 0 is the
/// softmax-linear model. Smooth everywhere, so attack gradients are
/// well-defined; prediction ties break toward the lowest class index.
class Classifier {
  public:
    /// `gain` scales the hidden-layer init: weights are drawn at `gain`
    /// times the usual scale and the hidden biases, zero at gain 1, come
    /// from N(0, gain^2/dim) so the sharpened units spread across the data
    /// region instead of all pivoting near the origin. gain 1 is the plain
    /// init; large gains give near-frozen, high-frequency features whose
    /// trained readout is accurate on clean data yet brittle under attack.
    Classifier(std::size_t dim, std::size_t classes, std::size_t hidden, RngStream& rng,
               double gain = 1.0)
        : dim_(dim), classes_(classes), hidden_(hidden) {
        if (dim_ == 0 || classes_ < 2) throw ContractViolation("classifier: need dim>0, C>=2");
        if (!(gain > 0.0) || !std::isfinite(gain))
            throw ContractViolation("classifier: init gain must be positive and finite");
        if (hidden_ == 0 && gain != 1.0)
            throw ContractViolation("classifier: init gain needs a hidden layer");
        std::size_t in = dim_;
        if (hidden_ > 0) {
            push_layer(hidden_, in, rng);
            if (gain != 1.0) {
                W_[0] *= gain;
                const double sd = gain * std::sqrt(1.0 / static_cast<double>(in));
                for (std::size_t i = 0; i < b_[0].size(); ++i) b_[0][i] = sd * rng.normal();
            }
            in = hidden_;
        }
        push_layer(classes_, in, rng);
    }

    Classifier(std::size_t dim, std::size_t classes, std::size_t hidden, std::vector<Tensor> Ws,
               std::vector<Tensor> bs)
        : dim_(dim), classes_(classes), hidden_(hidden), W_(std::move(Ws)), b_(std::move(bs)) {
        if (dim_ == 0 || classes_ < 2) throw ContractViolation("classifier: need dim>0, C>=2");
        const std::size_t layers = hidden_ > 0 ? 2 : 1;
        if (W_.size() != layers || b_.size() != layers)
            throw ContractViolation("classifier: layer count mismatch");
        std::size_t in = dim_;
        for (std::size_t l = 0; l < layers; ++l) {
            const std::size_t out = (hidden_ > 0 && l == 0) ? hidden_ : classes_;
            if (W_[l].shape() != std::vector<std::size_t>{out, in} || b_[l].size() != out)
                throw ContractViolation("classifier: layer dimensions do not chain");
            if (!all_finite(W_[l]) || !all_finite(b_[l]))
                throw ContractViolation("classifier: non-finite parameters");
            in = out;
        }
    }

    std::size_t dim() const { return dim_; }
    std::size_t classes() const { return classes_; }
    std::size_t hidden() const { return hidden_; }
    std::vector<Tensor>& weights() { return W_; }
    std::vector<Tensor>& biases() { return b_; }
    const std::vector<Tensor>& weights() const { return W_; }
    const std::vector<Tensor>& biases() const { return b_; }

    Tensor logits(const Tensor& x) const { return forward(x, nullptr); }

    /// Stable softmax; strictly positive, sums to 1.
    Tensor probs(const Tensor& x) const { return softmax(logits(x)); }

    int predict(const Tensor& x) const {
        Tensor l = logits(x);
        int best = 0;
        for (std::size_t i = 1; i < l.size(); ++i)
            if (l[i] > l[best]) best = static_cast<int>(i);
        return best;
    }

    double ce_loss(const Tensor& x, int y) const {
        check_label(y);
        return ce_from_logits(logits(x), y);
    }

    /// d/dx of the cross-entropy at (x, y): back-propagates p - onehot(y).
    Tensor loss_input_grad(const Tensor& x, int y) const {
        check_label(y);
        Tensor h({hidden_ > 0 ? hidden_ : 1});
        Tensor l = forward(x, hidden_ > 0 ? &h : nullptr);
        Tensor dl = softmax(l);
        dl[static_cast<std::size_t>(y)] -= 1.0;
        if (hidden_ == 0) return matvec_t(W_[0], dl);
        Tensor dh = matvec_t(W_[1], dl);
        for (std::size_t i = 0; i < dh.size(); ++i) dh[i] *= 1.0 - h[i] * h[i];
        return matvec_t(W_[0], dh);
    }

    /// Accumulates the parameter gradient of one sample's cross-entropy into
    /// (gw, gb); returns the sample loss.
    double ce_param_grads(const Tensor& x, int y, std::vector<Tensor>& gw,
                          std::vector<Tensor>& gb) const {
        check_label(y);
        Tensor h({hidden_ > 0 ? hidden_ : 1});
        Tensor l = forward(x, hidden_ > 0 ? &h : nullptr);
        const double loss = ce_from_logits(l, y);
        Tensor dl = softmax(l);
        dl[static_cast<std::size_t>(y)] -= 1.0;
        if (hidden_ == 0) {
            accumulate_outer(gw[0], dl, x);
            gb[0] += dl;
        } else {
            accumulate_outer(gw[1], dl, h);
            gb[1] += dl;
            Tensor dh = matvec_t(W_[1], dl);
            for (std::size_t i = 0; i < dh.size(); ++i) dh[i] *= 1.0 - h[i] * h[i];
            accumulate_outer(gw[0], dh, x);
            gb[0] += dh;
        }
        return loss;
    }

    void save(std::ostream& os) const {
        os << "kind clf\n";
        os << "dim " << dim_ << " classes " << classes_ << " hidden " << hidden_ << '\n';
        for (std::size_t l = 0; l < W_.size(); ++l) {
            textio::write_array(os, "w" + std::to_string(l), W_[l]);
            textio::write_array(os, "b" + std::to_string(l), b_[l]);
        }
    }

    static Classifier load(textio::TokenReader& r) {
        r.expect("dim");
        const auto d = static_cast<std::size_t>(r.integer());
        r.expect("classes");
        const auto c = static_cast<std::size_t>(r.integer());
        r.expect("hidden");
        const auto h = static_cast<std::size_t>(r.integer());
        const std::size_t layers = h > 0 ? 2 : 1;
        std::vector<Tensor> Ws, bs;
        for (std::size_t l = 0; l < layers; ++l) {
            Ws.push_back(r.array("w" + std::to_string(l), 2));
            bs.push_back(r.array("b" + std::to_string(l), 1));
        }
        return Classifier(d, c, h, std::move(Ws), std::move(bs));
    }

  private:
    void push_layer(std::size_t out, std::size_t in, RngStream& rng) {
        Tensor W({out, in});
        const double sd = std::sqrt(1.0 / static_cast<double>(in));
        for (std::size_t i = 0; i < W.size(); ++i) W[i] = sd * rng.normal();
        W_.push_back(std::move(W));
        b_.emplace_back(Tensor({out}));
    }

    Tensor forward(const Tensor& x, Tensor* hidden_out) const {
        if (x.size() != dim_) throw ContractViolation("classifier: input dimension mismatch");
        if (hidden_ == 0) {
            Tensor l = matvec(W_[0], x);
            l += b_[0];
            return l;
        }
        Tensor h = matvec(W_[0], x);
        h += b_[0];
        for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::tanh(h[i]);
        if (hidden_out) *hidden_out = h;
        Tensor l = matvec(W_[1], h);
        l += b_[1];
        return l;
    }

    static Tensor softmax(const Tensor& l) {
        double m = l[0];
        for (std::size_t i = 1; i < l.size(); ++i) m = std::max(m, l[i]);
        Tensor p = Tensor::zeros_like(l);
        double z = 0.0;
        for (std::size_t i = 0; i < l.size(); ++i) {
            p[i] = std::exp(l[i] - m);
            z += p[i];
        }
        p *= 1.0 / z;
        return p;
    }

    static double ce_from_logits(const Tensor& l, int y) {
        double m = l[0];
        for (std::size_t i = 1; i < l.size(); ++i) m = std::max(m, l[i]);
        double z = 0.0;
        for (std::size_t i = 0; i < l.size(); ++i) z += std::exp(l[i] - m);
        return m + std::log(z) - l[static_cast<std::size_t>(y)];
    }

    static void accumulate_outer(Tensor& gw, const Tensor& row, const Tensor& col) {
        for (std::size_t r = 0; r < row.size(); ++r)
            for (std::size_t c = 0; c < col.size(); ++c) gw.at(r, c) += row[r] * col[c];
    }

    void check_label(int y) const {
        if (y < 0 || static_cast<std::size_t>(y) >= classes_)
            throw ContractViolation("classifier: label out of range");
    }

    std::size_t dim_;
    std::size_t classes_;
    std::size_t hidden_;
    std::vector<Tensor> W_;
    std::vector<Tensor> b_;
};

/// Parsed architecture descriptor: hidden width (0 = softmax-linear) and
/// hidden-layer init gain (1 = plain init).
struct ClassifierArch {
    std::size_t hidden = 0;
    double gain = 1.0;

    friend bool operator==(const ClassifierArch&, const ClassifierArch&) = default;
};

/// "linear", "mlp:<width>", or "mlp:<width>:<gain>".
inline ClassifierArch parse_classifier_arch(const std::string& arch) {
    if (arch == "linear") return {0, 1.0};
    if (arch.rfind("mlp:", 0) == 0) {
        const std::string rest = arch.substr(4);
        const std::size_t colon = rest.find(':');
        try {
            std::size_t pos = 0;
            const std::string wtok = colon == std::string::npos ? rest : rest.substr(0, colon);
            const long w = std::stol(wtok, &pos);
            if (pos == wtok.size() && w > 0) {
                if (colon == std::string::npos) return {static_cast<std::size_t>(w), 1.0};
                const std::string gtok = rest.substr(colon + 1);
                const double g = std::stod(gtok, &pos);
                if (pos == gtok.size() && g > 0.0 && std::isfinite(g))
                    return {static_cast<std::size_t>(w), g};
            }
        } catch (const std::exception&) {
        }
    }
    throw ConfigError("unknown classifier arch '" + arch +
                      "' (expected linear, mlp:<width>, or mlp:<width>:<gain>)");
}

/// Minibatch cross-entropy training with Adam; deterministic per seed.
/// epochs = 0 returns the freshly initialized classifier.
inline Classifier train_classifier(const LabeledSet& data, std::size_t classes,
                                   std::size_t hidden, std::size_t epochs, double lr,
                                   std::uint64_t seed, double gain = 1.0) {
    if (data.size() == 0) throw ContractViolation("train_classifier: empty dataset");
    data.validate(classes);
    if (!(lr > 0.0)) throw ConfigError("train_classifier: lr must be positive");

    RngStream rng(seed);
    Classifier clf(data.dim(), classes, hidden, rng, gain);

    const std::size_t layers = clf.weights().size();
    std::vector<AdamState> stw, stb;
    for (std::size_t l = 0; l < layers; ++l) {
        stw.push_back(AdamState::init(clf.weights()[l]));
        stb.push_back(AdamState::init(clf.biases()[l]));
    }

    constexpr std::size_t kBatch = 64;
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        // Fisher-Yates with our own stream, so shuffles are platform-stable
        for (std::size_t i = idx.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng.uniform01() * static_cast<double>(i));
            std::swap(idx[i - 1], idx[j]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < idx.size(); start += kBatch) {
            const std::size_t stop = std::min(start + kBatch, idx.size());
            std::vector<Tensor> gw, gb;
            for (std::size_t l = 0; l < layers; ++l) {
                gw.push_back(Tensor::zeros_like(clf.weights()[l]));
                gb.push_back(Tensor::zeros_like(clf.biases()[l]));
            }
            for (std::size_t i = start; i < stop; ++i)
                epoch_loss += clf.ce_param_grads(data.points[idx[i]], data.labels[idx[i]], gw, gb);
            const double inv = 1.0 / static_cast<double>(stop - start);
            for (std::size_t l = 0; l < layers; ++l) {
                gw[l] *= inv;
                gb[l] *= inv;
                auto [nsw, npw] = adam_step(std::move(stw[l]), clf.weights()[l], gw[l], lr);
                stw[l] = std::move(nsw);
                clf.weights()[l] = std::move(npw);
                auto [nsb, npb] = adam_step(std::move(stb[l]), clf.biases()[l], gb[l], lr);
                stb[l] = std::move(nsb);
                clf.biases()[l] = std::move(npb);
            }
        }
        if (!std::isfinite(epoch_loss))
            throw TrainingDiverged(epoch, "non-finite classifier training loss");
    }
    return clf;
}

/// Fraction of correctly predicted labels, in [0, 1].
inline double accuracy(const Classifier& clf, const LabeledSet& data) {
    if (data.size() == 0) throw ContractViolation("accuracy: empty dataset");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (clf.predict(data.points[i]) == data.labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace scoreopt
