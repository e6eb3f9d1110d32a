#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "attacks.hpp"
#include "classifier.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "purify.hpp"
#include "rng.hpp"
#include "serialize.hpp"
#include "text_format.hpp"

/// Experiment orchestration: wiring datasets, score models, classifiers,
/// purification defenses, and attacks into seeded clean/attacked/defended
/// evaluations with trial statistics, plus inference-cost benchmarking and
/// result serialization.

namespace scoreopt {

// ---------------------------------------------------------------------------
// experiment vocabulary

enum class DefenseKind { Identity, OneShotDenoise, ScoreOptO, ScoreOptN, MultiStep };
enum class AttackKind { None, TransferPgd, BpdaEot, PgdEotOneShot, ExactUnroll };

inline std::string defense_kind_to_string(DefenseKind k) {
    switch (k) {
        case DefenseKind::Identity: return "identity";
        case DefenseKind::OneShotDenoise: return "one-shot";
        case DefenseKind::ScoreOptO: return "score-opt-o";
        case DefenseKind::ScoreOptN: return "score-opt-n";
        case DefenseKind::MultiStep: return "multi-step";
    }
    throw ContractViolation("defense_kind_to_string: unknown defense kind");
}

inline DefenseKind parse_defense_kind(const std::string& w) {
    if (w == "identity") return DefenseKind::Identity;
    if (w == "one-shot") return DefenseKind::OneShotDenoise;
    if (w == "score-opt-o") return DefenseKind::ScoreOptO;
    if (w == "score-opt-n") return DefenseKind::ScoreOptN;
    if (w == "multi-step") return DefenseKind::MultiStep;
    throw ConfigError("unknown defense '" + w +
                      "' (want identity, one-shot, score-opt-o, score-opt-n, or multi-step)");
}

inline std::string attack_kind_to_string(AttackKind k) {
    switch (k) {
        case AttackKind::None: return "none";
        case AttackKind::TransferPgd: return "transfer-pgd";
        case AttackKind::BpdaEot: return "bpda-eot";
        case AttackKind::PgdEotOneShot: return "pgd-eot";
        case AttackKind::ExactUnroll: return "exact-unroll";
    }
    throw ContractViolation("attack_kind_to_string: unknown attack kind");
}

inline AttackKind parse_attack_kind(const std::string& w) {
    if (w == "none") return AttackKind::None;
    if (w == "transfer-pgd") return AttackKind::TransferPgd;
    if (w == "bpda-eot") return AttackKind::BpdaEot;
    if (w == "pgd-eot") return AttackKind::PgdEotOneShot;
    if (w == "exact-unroll") return AttackKind::ExactUnroll;
    throw ConfigError("unknown attack '" + w +
                      "' (want none, transfer-pgd, bpda-eot, pgd-eot, or exact-unroll)");
}

inline std::string loss_variant_to_string(LossKind::Variant v) {
    switch (v) {
        case LossKind::Variant::Diff: return "diff";
        case LossKind::Variant::Mse: return "mse";
        case LossKind::Variant::Sr: return "sr";
    }
    throw ContractViolation("loss_variant_to_string: unknown loss variant");
}

inline LossKind::Variant parse_loss_variant(const std::string& w) {
    if (w == "diff") return LossKind::Variant::Diff;
    if (w == "mse") return LossKind::Variant::Mse;
    if (w == "sr") return LossKind::Variant::Sr;
    throw ConfigError("unknown loss '" + w + "' (want diff, mse, or sr)");
}

inline std::string optimizer_to_string(Optimizer o) {
    return o == Optimizer::Adam ? "adam" : "gd";
}

inline Optimizer parse_optimizer(const std::string& w) {
    if (w == "adam") return Optimizer::Adam;
    if (w == "gd") return Optimizer::PlainGd;
    throw ConfigError("unknown optimizer '" + w + "' (want adam or gd)");
}

inline std::string norm_to_string(Norm n) { return n == Norm::Linf ? "linf" : "l2"; }

inline Norm parse_norm(const std::string& w) {
    if (w == "linf") return Norm::Linf;
    if (w == "l2") return Norm::L2;
    throw ConfigError("unknown norm '" + w + "' (want linf or l2)");
}

// ---------------------------------------------------------------------------
// experiment description

/// Everything a defended-evaluation run depends on. The score model and
/// classifier are referenced by path for file-driven runs; the in-memory
/// overloads ignore the paths.
struct ExperimentSpec {
    DatasetKind dataset{};  // defaults to the stock 8-mode / 4-class mixture
    std::string score_model_path;
    std::string classifier_path;

    DefenseKind defense = DefenseKind::ScoreOptN;
    PurifierConfig purifier{};
    std::optional<std::pair<double, double>> clip;  // scalar box, broadcast per coordinate
    std::size_t multi_steps = 50;                   // step count for the multi-step defense

    AttackKind attack = AttackKind::TransferPgd;
    ThreatModel threat{Norm::Linf, 0.3};
    AttackConfig attack_cfg = AttackConfig::transfer(0.3);

    std::size_t eval_n = 512;
    std::size_t trials = 5;
    std::uint64_t seed = 0;

    void validate() const {
        dataset.validate();
        if (eval_n < 1) throw ConfigError("experiment: eval-n must be >= 1");
        if (trials < 1) throw ConfigError("experiment: trials must be >= 1");
        if (multi_steps < 1) throw ConfigError("experiment: multi-steps must be >= 1");
        if (!(purifier.lr > 0.0) || !std::isfinite(purifier.lr))
            throw ConfigError("experiment: purifier lr must be positive and finite");
        if (!(purifier.loss.lambda >= 0.0) || !std::isfinite(purifier.loss.lambda))
            throw ConfigError("experiment: lambda must be finite and >= 0");
        if (!(purifier.loss.lambda_reg >= 0.0) || !std::isfinite(purifier.loss.lambda_reg))
            throw ConfigError("experiment: lambda-reg must be finite and >= 0");
        if (clip && !(clip->first < clip->second &&
                      std::isfinite(clip->first) && std::isfinite(clip->second)))
            throw ConfigError("experiment: clip box needs finite lo < hi");
        if (attack != AttackKind::None) attack_cfg.validate();
    }

    void save(std::ostream& os) const {
        const auto path_token = [](const std::string& p) { return p.empty() ? "-" : p; };
        os << "kind experiment\n";
        os << "dataset " << dataset_kind_to_string(dataset) << '\n';
        os << "score-model " << path_token(score_model_path) << '\n';
        os << "classifier " << path_token(classifier_path) << '\n';
        os << "defense " << defense_kind_to_string(defense) << '\n';
        os << "loss " << loss_variant_to_string(purifier.loss.variant) << '\n';
        os << "lambda " << textio::fmt_double(purifier.loss.lambda) << '\n';
        os << "lambda-reg " << textio::fmt_double(purifier.loss.lambda_reg) << '\n';
        os << "lr " << textio::fmt_double(purifier.lr) << '\n';
        os << "outer-steps " << purifier.outer_steps << '\n';
        os << "inner-steps " << purifier.inner_steps << '\n';
        os << "sigma-min " << textio::fmt_double(purifier.noise.sigma_min) << '\n';
        os << "sigma-max " << textio::fmt_double(purifier.noise.sigma_max) << '\n';
        os << "optimizer " << optimizer_to_string(purifier.optimizer) << '\n';
        if (clip)
            os << "clip box " << textio::fmt_double(clip->first) << ' '
               << textio::fmt_double(clip->second) << '\n';
        else
            os << "clip none\n";
        os << "multi-steps " << multi_steps << '\n';
        os << "attack " << attack_kind_to_string(attack) << '\n';
        os << "norm " << norm_to_string(threat.norm) << '\n';
        os << "epsilon " << textio::fmt_double(threat.epsilon) << '\n';
        os << "alpha " << textio::fmt_double(attack_cfg.alpha) << '\n';
        os << "attack-iters " << attack_cfg.iters << '\n';
        os << "eot-k " << attack_cfg.eot_k << '\n';
        os << "random-start " << (attack_cfg.random_start ? 1 : 0) << '\n';
        os << "eval-n " << eval_n << '\n';
        os << "trials " << trials << '\n';
        os << "seed " << seed << '\n';
    }

    static ExperimentSpec load(textio::TokenReader& r) {
        const auto count = [&r](const char* field) {
            const long long v = r.integer();
            if (v < 0)
                throw ConfigError(std::string("experiment: ") + field + " must be nonnegative");
            return static_cast<std::size_t>(v);
        };
        const auto path_field = [&r](const char* field) {
            r.expect(field);
            std::string w = r.word();
            return w == "-" ? std::string() : w;
        };

        ExperimentSpec s;
        r.expect("kind");
        r.expect("experiment");
        r.expect("dataset");
        s.dataset = parse_dataset_kind(r.word());
        s.score_model_path = path_field("score-model");
        s.classifier_path = path_field("classifier");
        r.expect("defense");
        s.defense = parse_defense_kind(r.word());
        r.expect("loss");
        s.purifier.loss.variant = parse_loss_variant(r.word());
        r.expect("lambda");
        s.purifier.loss.lambda = r.real();
        r.expect("lambda-reg");
        s.purifier.loss.lambda_reg = r.real();
        r.expect("lr");
        s.purifier.lr = r.real();
        r.expect("outer-steps");
        s.purifier.outer_steps = count("outer-steps");
        r.expect("inner-steps");
        s.purifier.inner_steps = count("inner-steps");
        r.expect("sigma-min");
        const double smin = r.real();
        r.expect("sigma-max");
        const double smax = r.real();
        s.purifier.noise = NoiseRange(smin, smax);
        r.expect("optimizer");
        s.purifier.optimizer = parse_optimizer(r.word());
        r.expect("clip");
        if (const std::string w = r.word(); w == "box") {
            const double lo = r.real();
            const double hi = r.real();
            s.clip = {lo, hi};
        } else if (w != "none") {
            throw ConfigError("experiment: clip must be 'none' or 'box <lo> <hi>', got '" + w +
                              "'");
        }
        r.expect("multi-steps");
        s.multi_steps = count("multi-steps");
        r.expect("attack");
        s.attack = parse_attack_kind(r.word());
        r.expect("norm");
        const Norm norm = parse_norm(r.word());
        r.expect("epsilon");
        s.threat = ThreatModel{norm, r.real()};
        r.expect("alpha");
        s.attack_cfg.alpha = r.real();
        r.expect("attack-iters");
        s.attack_cfg.iters = count("attack-iters");
        r.expect("eot-k");
        s.attack_cfg.eot_k = count("eot-k");
        r.expect("random-start");
        if (const long long rs = r.integer(); rs == 0 || rs == 1)
            s.attack_cfg.random_start = rs == 1;
        else
            throw ConfigError("experiment: random-start must be 0 or 1");
        r.expect("eval-n");
        s.eval_n = count("eval-n");
        r.expect("trials");
        s.trials = count("trials");
        r.expect("seed");
        if (const long long v = r.integer(); v >= 0)
            s.seed = static_cast<std::uint64_t>(v);
        else
            throw ConfigError("experiment: seed must be nonnegative");
        s.validate();
        return s;
    }
};

inline ExperimentSpec load_experiment_spec_file(const std::string& path) {
    std::ifstream is = open_for_reading(path);
    textio::TokenReader r(is);
    return ExperimentSpec::load(r);
}

/// The stock desk benchmark: 2-D eight-mode mixture collapsed to four
/// classes, 512 evaluation points under l_inf eps = 0.3 Transfer-PGD,
/// defended by ScoreOpt-N with the stock purifier settings at a small fixed
/// noise level, five trials. Separation 13 keeps the mode clouds tight
/// relative to the inter-mode half-gap, so an eps-ball attack can flip a
/// brittle classifier without carrying points into a neighboring mixture
/// basin — the regime where purification can actually undo the damage.
inline ExperimentSpec toy_benchmark_spec(std::uint64_t seed = 0) {
    ExperimentSpec s;
    s.dataset = DatasetKind::gmm_classes(8, 4, 13.0, 2);
    s.defense = DefenseKind::ScoreOptN;
    s.purifier.noise = NoiseRange(0.06, 0.06);
    s.attack = AttackKind::TransferPgd;
    s.threat = ThreatModel{Norm::Linf, 0.3};
    s.attack_cfg = AttackConfig::transfer(s.threat.epsilon);
    s.eval_n = 512;
    s.trials = 5;
    s.seed = seed;
    return s;
}

/// Companion classifier for the toy benchmark: a deliberately narrow tanh
/// network (4 hidden units for 8 modes) trained briefly, so it is accurate
/// on clean data while its decision boundaries pass close to the mode
/// clouds. The undefended model therefore collapses under Transfer-PGD,
/// while purified inputs — pulled back near the mode centers — classify
/// correctly, giving the defense measurable room to work.
inline Classifier toy_benchmark_classifier(const ExperimentSpec& spec) {
    const LabeledSet train = gen_dataset(spec.dataset, 2000, 1);
    return train_classifier(train, spec.dataset.classes, 4, 10, 0.05, 14);
}

// ---------------------------------------------------------------------------
// results

/// Aggregated outcome of one defended evaluation. Accuracies are percents
/// with sample standard deviations over trials; the cost fields are means
/// over every purification call the run makes (each sample is purified once
/// clean and once attacked). Equality covers the seed-determined fields
/// only — wall time is a measurement, not an output.
struct ResultRecord {
    std::string label;  // sweep tag; empty for plain runs
    double standard_acc = 0.0;
    double standard_std = 0.0;
    double robust_acc = 0.0;
    double robust_std = 0.0;
    double seconds_per_sample = 0.0;
    double forwards_per_sample = 0.0;
    double vjps_per_sample = 0.0;

    friend bool operator==(const ResultRecord& a, const ResultRecord& b) {
        return a.label == b.label && a.standard_acc == b.standard_acc &&
               a.standard_std == b.standard_std && a.robust_acc == b.robust_acc &&
               a.robust_std == b.robust_std && a.forwards_per_sample == b.forwards_per_sample &&
               a.vjps_per_sample == b.vjps_per_sample;
    }
};

// ---------------------------------------------------------------------------
// defense and attack wiring

/// A purification defense: input point and a private rng stream in, purified
/// point and instrumentation trace out.
using DefenseFn = std::function<std::pair<Tensor, PurifyTrace>(const Tensor&, RngStream)>;

/// An evaluation adversary: clean point, true label, and the attack's rng
/// stream in, perturbed point out.
using AttackFn = std::function<Tensor(const Tensor&, int, RngStream&)>;

/// Build the configured defense around `model`. `dim` sizes the clip box.
/// The returned closure keeps a reference to `model`, which must outlive it.
inline DefenseFn make_defense(const ExperimentSpec& spec, const ScoreModel& model,
                              std::size_t dim) {
    PurifierConfig cfg = spec.purifier;
    if (spec.clip) {
        Tensor lo({dim});
        Tensor hi({dim});
        for (std::size_t i = 0; i < dim; ++i) {
            lo[i] = spec.clip->first;
            hi[i] = spec.clip->second;
        }
        cfg.clip = ClipBox{std::move(lo), std::move(hi)};
    }
    switch (spec.defense) {
        case DefenseKind::Identity:
            return [](const Tensor& x, RngStream) {
                return std::pair<Tensor, PurifyTrace>{x, PurifyTrace{}};
            };
        case DefenseKind::OneShotDenoise:
            // a single diffuse-denoise round with no optimization steps
            cfg.outer_steps = 1;
            cfg.inner_steps = 0;
            return [&model, cfg](const Tensor& x, RngStream rng) {
                return score_opt_n(model, x, cfg, std::move(rng));
            };
        case DefenseKind::ScoreOptO:
            return [&model, cfg](const Tensor& x, RngStream rng) {
                return score_opt_o(model, x, cfg, std::move(rng));
            };
        case DefenseKind::ScoreOptN:
            return [&model, cfg](const Tensor& x, RngStream rng) {
                return score_opt_n(model, x, cfg, std::move(rng));
            };
        case DefenseKind::MultiStep: {
            const double sigma_star = cfg.noise.sigma_max;
            const std::size_t steps = spec.multi_steps;
            return [&model, sigma_star, steps](const Tensor& x, RngStream rng) {
                return multi_step_purify(model, x, sigma_star, steps, std::move(rng));
            };
        }
    }
    throw ContractViolation("make_defense: unknown defense kind");
}

/// Build the configured adversary. The closure keeps references to `model`,
/// `clf`, and (for defense-aware attacks) `defense`; all must outlive it.
inline AttackFn make_attack(const ExperimentSpec& spec, const ScoreModel& model,
                            const Classifier& clf, const DefenseFn& defense) {
    if (spec.attack == AttackKind::None)
        return [](const Tensor& x, int, RngStream&) { return x; };

    AttackConfig cfg = spec.attack_cfg;
    const ThreatModel threat = spec.threat;
    const PurifyFn purify = [&defense](const Tensor& x, RngStream& r) {
        return defense(x, r).first;
    };

    switch (spec.attack) {
        case AttackKind::TransferPgd: {
            cfg.mode = OracleMode::ClassifierOnly;
            const GradOracle oracle = make_classifier_oracle(clf);
            return [oracle, threat, cfg](const Tensor& x, int y, RngStream& rng) {
                return pgd(oracle, x, y, threat, cfg, rng);
            };
        }
        case AttackKind::BpdaEot: {
            cfg.mode = OracleMode::BpdaIdentity;
            const GradOracle oracle = make_bpda_oracle(purify, clf, cfg.eot_k);
            return [oracle, threat, cfg](const Tensor& x, int y, RngStream& rng) {
                return pgd(oracle, x, y, threat, cfg, rng);
            };
        }
        case AttackKind::PgdEotOneShot: {
            cfg.mode = OracleMode::OneShotApprox;
            const GradOracle oracle = make_oneshot_oracle(model, clf, spec.purifier.noise,
                                                          cfg.eot_k);
            return [oracle, threat, cfg](const Tensor& x, int y, RngStream& rng) {
                return pgd(oracle, x, y, threat, cfg, rng);
            };
        }
        case AttackKind::ExactUnroll: {
            cfg.mode = OracleMode::ExactUnroll;
            const GradOracle oracle = make_exact_unroll_oracle(purify, clf, cfg.eot_k);
            return [oracle, threat, cfg](const Tensor& x, int y, RngStream& rng) {
                return pgd(oracle, x, y, threat, cfg, rng);
            };
        }
        case AttackKind::None: break;  // handled above
    }
    throw ContractViolation("make_attack: unknown attack kind");
}

// ---------------------------------------------------------------------------
// defended evaluation

namespace detail {

struct SampleOutcome {
    bool std_ok = false;
    bool rob_ok = false;
    double seconds = 0.0;
    std::uint64_t forwards = 0;
    std::uint64_t vjps = 0;
    std::exception_ptr error;
};

inline double sample_std(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double ss = 0.0;
    for (const double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

/// Evaluate the defended pipeline: every trial draws nothing new from the
/// data (the evaluation set is fixed by the spec seed) but re-runs attack
/// and purification on fresh substreams. Standard accuracy classifies
/// purified clean inputs, robust accuracy purified attacked inputs. The
/// clean and attacked purifications of a sample share one stream, so a
/// no-op attack reproduces the standard predictions bit-for-bit. Worker
/// fan-out never changes outputs: every sample owns its substreams and
/// results reduce in sample order.
inline ResultRecord run_experiment(const ExperimentSpec& spec, const ScoreModel& model,
                                   const Classifier& clf, std::size_t workers = 1) {
    spec.validate();
    if (workers < 1) throw ContractViolation("run_experiment: need at least one worker");

    const LabeledSet eval = gen_dataset(spec.dataset, spec.eval_n, spec.seed);
    if (eval.dim() != clf.dim())
        throw ConfigError("run_experiment: dataset dimension does not match the classifier");
    eval.validate(clf.classes());

    const DefenseFn defense = make_defense(spec, model, eval.dim());
    const AttackFn attack = make_attack(spec, model, clf, defense);
    const RngStream root(spec.seed);

    const std::size_t jobs = spec.trials * spec.eval_n;
    std::vector<detail::SampleOutcome> out(jobs);

    const auto eval_one = [&](std::size_t job) {
        detail::SampleOutcome& slot = out[job];
        try {
            const std::size_t i = job % spec.eval_n;
            const Tensor& x = eval.points[i];
            const int y = eval.labels[i];
            RngStream attack_rng = root.substream(1 + 2 * job);
            const RngStream purify_rng = root.substream(2 + 2 * job);

            const Tensor x_adv = attack(x, y, attack_rng);
            const auto [clean_out, clean_trace] = defense(x, purify_rng);
            const auto [adv_out, adv_trace] = defense(x_adv, purify_rng);

            slot.std_ok = clf.predict(clean_out) == y;
            slot.rob_ok = clf.predict(adv_out) == y;
            slot.seconds = clean_trace.seconds + adv_trace.seconds;
            slot.forwards = clean_trace.counts.forwards + adv_trace.counts.forwards;
            slot.vjps = clean_trace.counts.vjps + adv_trace.counts.vjps;
        } catch (...) {
            slot.error = std::current_exception();
        }
    };

    if (workers == 1) {
        for (std::size_t job = 0; job < jobs; ++job) eval_one(job);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t job = next.fetch_add(1);
                    if (job >= jobs) return;
                    eval_one(job);
                }
            });
        for (auto& t : pool) t.join();
    }

    for (std::size_t job = 0; job < jobs; ++job) {
        if (!out[job].error) continue;
        try {
            std::rethrow_exception(out[job].error);
        } catch (const std::exception& e) {
            throw Error("run_experiment: trial " + std::to_string(job / spec.eval_n) +
                        ", sample " + std::to_string(job % spec.eval_n) + ": " + e.what());
        }
    }

    std::vector<double> std_acc(spec.trials);
    std::vector<double> rob_acc(spec.trials);
    double seconds = 0.0;
    double forwards = 0.0;
    double vjps = 0.0;
    for (std::size_t t = 0; t < spec.trials; ++t) {
        std::size_t std_ok = 0;
        std::size_t rob_ok = 0;
        for (std::size_t i = 0; i < spec.eval_n; ++i) {
            const detail::SampleOutcome& s = out[t * spec.eval_n + i];
            std_ok += s.std_ok ? 1 : 0;
            rob_ok += s.rob_ok ? 1 : 0;
            seconds += s.seconds;
            forwards += static_cast<double>(s.forwards);
            vjps += static_cast<double>(s.vjps);
        }
        std_acc[t] = 100.0 * static_cast<double>(std_ok) / static_cast<double>(spec.eval_n);
        rob_acc[t] = 100.0 * static_cast<double>(rob_ok) / static_cast<double>(spec.eval_n);
    }

    ResultRecord rec;
    rec.standard_acc = std::accumulate(std_acc.begin(), std_acc.end(), 0.0) /
                       static_cast<double>(spec.trials);
    rec.robust_acc = std::accumulate(rob_acc.begin(), rob_acc.end(), 0.0) /
                     static_cast<double>(spec.trials);
    rec.standard_std = detail::sample_std(std_acc, rec.standard_acc);
    rec.robust_std = detail::sample_std(rob_acc, rec.robust_acc);
    const double calls = 2.0 * static_cast<double>(jobs);
    rec.seconds_per_sample = seconds / calls;
    rec.forwards_per_sample = forwards / calls;
    rec.vjps_per_sample = vjps / calls;
    return rec;
}

/// File-driven variant: loads the score model and classifier the spec
/// references, then runs the in-memory evaluation.
inline ResultRecord run_experiment(const ExperimentSpec& spec, std::size_t workers = 1) {
    if (spec.score_model_path.empty() || spec.classifier_path.empty())
        throw ConfigError("run_experiment: spec must reference score-model and classifier files");
    const auto model = load_score_model_file(spec.score_model_path);
    const Classifier clf = load_classifier_file(spec.classifier_path);
    return run_experiment(spec, *model, clf, workers);
}

// ---------------------------------------------------------------------------
// sweeps

/// One evaluation per axis value, all sharing the base spec's seed so the
/// per-sample noise is paired across values and differences reflect the
/// axis alone. Axes: "steps" (outer optimization steps), "lambda" (mse
/// anchor weight), "lambda-reg" (sr regularizer weight), "noise" (pins the
/// purifier noise range to the value). Each record is labeled
/// "<axis>=<value>"; apart from the label, a single-value sweep reproduces
/// run_experiment exactly.
inline std::vector<ResultRecord> sweep(const ExperimentSpec& spec, const std::string& axis,
                                       const std::vector<double>& values, const ScoreModel& model,
                                       const Classifier& clf, std::size_t workers = 1) {
    if (values.empty()) throw ContractViolation("sweep: need at least one axis value");
    const auto apply = [&axis, &spec](ExperimentSpec& s, double v) {
        if (axis == "steps") {
            if (!(v >= 1.0) || v != std::floor(v))
                throw ConfigError("sweep: steps values must be integers >= 1");
            s.purifier.outer_steps = static_cast<std::size_t>(v);
        } else if (axis == "lambda") {
            if (spec.purifier.loss.variant != LossKind::Variant::Mse)
                throw ConfigError("sweep: the lambda axis needs the mse loss");
            s.purifier.loss = LossKind::mse(v);
        } else if (axis == "lambda-reg") {
            if (spec.purifier.loss.variant != LossKind::Variant::Sr)
                throw ConfigError("sweep: the lambda-reg axis needs the sr loss");
            s.purifier.loss = LossKind::sr(v);
        } else if (axis == "noise") {
            s.purifier.noise = NoiseRange(v, v);
        } else {
            throw ConfigError("sweep: unknown axis '" + axis +
                              "' (want steps, lambda, lambda-reg, or noise)");
        }
    };

    std::vector<ResultRecord> records;
    records.reserve(values.size());
    for (const double v : values) {
        ExperimentSpec s = spec;
        apply(s, v);
        ResultRecord r = run_experiment(s, model, clf, workers);
        std::ostringstream tag;
        tag << axis << '=' << v;
        r.label = tag.str();
        records.push_back(std::move(r));
    }
    return records;
}

/// File-driven variant of sweep; loads the referenced artifacts once.
inline std::vector<ResultRecord> sweep(const ExperimentSpec& spec, const std::string& axis,
                                       const std::vector<double>& values,
                                       std::size_t workers = 1) {
    if (spec.score_model_path.empty() || spec.classifier_path.empty())
        throw ConfigError("sweep: spec must reference score-model and classifier files");
    const auto model = load_score_model_file(spec.score_model_path);
    const Classifier clf = load_classifier_file(spec.classifier_path);
    return sweep(spec, axis, values, *model, clf, workers);
}

// ---------------------------------------------------------------------------
// inference benchmarking

/// One benchmark table row: per-sample cost of a purifier at a step count.
struct BenchRow {
    std::string method;  // "score-opt-n" or "multi-step"
    std::size_t steps = 0;
    double seconds_per_sample = 0.0;
    double forwards_per_sample = 0.0;
    double vjps_per_sample = 0.0;
};

/// Cost table over a step grid, two rows per grid point (ScoreOpt-N first,
/// then the multi-step baseline). A grid point s runs ScoreOpt-N as one
/// outer round of s inner optimization steps and the baseline as an s-step
/// purification at sigma-max, over the spec's evaluation set. Always single
/// threaded so timings compare across rows.
inline std::vector<BenchRow> bench_inference(const ExperimentSpec& spec, const ScoreModel& model,
                                             const std::vector<std::size_t>& steps_grid) {
    if (steps_grid.empty()) throw ContractViolation("bench_inference: empty step grid");
    spec.validate();

    const LabeledSet eval = gen_dataset(spec.dataset, spec.eval_n, spec.seed);
    const RngStream root(spec.seed);
    const double n = static_cast<double>(eval.size());

    std::vector<BenchRow> rows;
    rows.reserve(2 * steps_grid.size());
    for (std::size_t gi = 0; gi < steps_grid.size(); ++gi) {
        const std::size_t s = steps_grid[gi];
        if (s < 1) throw ConfigError("bench_inference: step counts must be >= 1");

        PurifierConfig cfg = spec.purifier;
        cfg.outer_steps = 1;
        cfg.inner_steps = s;

        BenchRow opt{"score-opt-n", s, 0.0, 0.0, 0.0};
        BenchRow base{"multi-step", s, 0.0, 0.0, 0.0};
        for (std::size_t i = 0; i < eval.size(); ++i) {
            const std::uint64_t slot = 2 * (gi * eval.size() + i);
            auto [xo, to] = score_opt_n(model, eval.points[i], cfg, root.substream(1 + slot));
            opt.seconds_per_sample += to.seconds;
            opt.forwards_per_sample += static_cast<double>(to.counts.forwards);
            opt.vjps_per_sample += static_cast<double>(to.counts.vjps);
            auto [xb, tb] = multi_step_purify(model, eval.points[i], cfg.noise.sigma_max, s,
                                              root.substream(2 + slot));
            base.seconds_per_sample += tb.seconds;
            base.forwards_per_sample += static_cast<double>(tb.counts.forwards);
            base.vjps_per_sample += static_cast<double>(tb.counts.vjps);
        }
        for (BenchRow* row : {&opt, &base}) {
            row->seconds_per_sample /= n;
            row->forwards_per_sample /= n;
            row->vjps_per_sample /= n;
        }
        rows.push_back(std::move(opt));
        rows.push_back(std::move(base));
    }
    return rows;
}

/// File-driven variant of bench_inference.
inline std::vector<BenchRow> bench_inference(const ExperimentSpec& spec,
                                             const std::vector<std::size_t>& steps_grid) {
    if (spec.score_model_path.empty())
        throw ConfigError("bench_inference: spec must reference a score-model file");
    const auto model = load_score_model_file(spec.score_model_path);
    return bench_inference(spec, *model, steps_grid);
}

// ---------------------------------------------------------------------------
// result serialization

enum class ResultFormat { Csv, Text };

namespace detail {

inline void check_label(const std::string& label) {
    if (label.find_first_of(", \t\n") != std::string::npos)
        throw ContractViolation("result label must be a single comma-free token: '" + label +
                                "'");
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (const char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline constexpr const char* kResultsCsvHeader =
    "label,standard_acc,standard_std,robust_acc,robust_std,"
    "seconds_per_sample,forwards_per_sample,vjps_per_sample";

}  // namespace detail

/// Write records with a stable column order. The structured-text format
/// round-trips bit-exactly through load_results; csv keeps full double
/// precision. An empty record list writes the header alone.
inline void emit_results(const std::vector<ResultRecord>& records, const std::string& path,
                         ResultFormat format) {
    for (const ResultRecord& r : records) detail::check_label(r.label);
    std::ofstream os = open_for_writing(path);
    if (format == ResultFormat::Text) {
        os << "kind results\n";
        os << "records " << records.size() << '\n';
        for (const ResultRecord& r : records) {
            os << "record " << (r.label.empty() ? "-" : r.label) << ' '
               << textio::fmt_double(r.standard_acc) << ' ' << textio::fmt_double(r.standard_std)
               << ' ' << textio::fmt_double(r.robust_acc) << ' '
               << textio::fmt_double(r.robust_std) << ' '
               << textio::fmt_double(r.seconds_per_sample) << ' '
               << textio::fmt_double(r.forwards_per_sample) << ' '
               << textio::fmt_double(r.vjps_per_sample) << '\n';
        }
    } else {
        os << detail::kResultsCsvHeader << '\n';
        for (const ResultRecord& r : records) {
            os << r.label << ',' << textio::fmt_double(r.standard_acc) << ','
               << textio::fmt_double(r.standard_std) << ',' << textio::fmt_double(r.robust_acc)
               << ',' << textio::fmt_double(r.robust_std) << ','
               << textio::fmt_double(r.seconds_per_sample) << ','
               << textio::fmt_double(r.forwards_per_sample) << ','
               << textio::fmt_double(r.vjps_per_sample) << '\n';
        }
    }
    os.flush();
    if (!os) throw IoError(path, "write failed");
}

/// Read either results format back, auto-detected from the first line.
inline std::vector<ResultRecord> load_results(const std::string& path) {
    std::ifstream is = open_for_reading(path);
    std::stringstream buf;
    buf << is.rdbuf();
    const std::string text = buf.str();

    std::vector<ResultRecord> records;
    if (text.rfind("kind results", 0) == 0) {
        std::istringstream ss(text);
        textio::TokenReader r(ss);
        r.expect("kind");
        r.expect("results");
        r.expect("records");
        const long long n = r.integer();
        if (n < 0) throw IoError(path, "negative record count");
        records.reserve(static_cast<std::size_t>(n));
        for (long long i = 0; i < n; ++i) {
            r.expect("record");
            ResultRecord rec;
            const std::string label = r.word();
            rec.label = label == "-" ? "" : label;
            rec.standard_acc = r.real();
            rec.standard_std = r.real();
            rec.robust_acc = r.real();
            rec.robust_std = r.real();
            rec.seconds_per_sample = r.real();
            rec.forwards_per_sample = r.real();
            rec.vjps_per_sample = r.real();
            records.push_back(std::move(rec));
        }
        return records;
    }

    std::istringstream ss(text);
    std::string line;
    if (!std::getline(ss, line) || line != detail::kResultsCsvHeader)
        throw IoError(path, "unrecognized results file header");
    std::size_t line_no = 1;
    while (std::getline(ss, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 8)
            throw IoError(path, "line " + std::to_string(line_no) + ": expected 8 fields");
        try {
            ResultRecord rec;
            rec.label = fields[0];
            rec.standard_acc = std::stod(fields[1]);
            rec.standard_std = std::stod(fields[2]);
            rec.robust_acc = std::stod(fields[3]);
            rec.robust_std = std::stod(fields[4]);
            rec.seconds_per_sample = std::stod(fields[5]);
            rec.forwards_per_sample = std::stod(fields[6]);
            rec.vjps_per_sample = std::stod(fields[7]);
            records.push_back(std::move(rec));
        } catch (const std::exception&) {
            throw IoError(path, "line " + std::to_string(line_no) + ": malformed number");
        }
    }
    return records;
}

/// Write a benchmark table as csv (the only bench output format).
inline void emit_bench_csv(const std::vector<BenchRow>& rows, const std::string& path) {
    std::ofstream os = open_for_writing(path);
    os << "method,steps,seconds_per_sample,forwards_per_sample,vjps_per_sample\n";
    for (const BenchRow& r : rows) {
        os << r.method << ',' << r.steps << ',' << textio::fmt_double(r.seconds_per_sample)
           << ',' << textio::fmt_double(r.forwards_per_sample) << ','
           << textio::fmt_double(r.vjps_per_sample) << '\n';
    }
    os.flush();
    if (!os) throw IoError(path, "write failed");
}

}  // namespace scoreopt
