// Acceptance gate: eleven end-to-end checks covering the analytic oracles,
// the gradient identities, score-matching training quality, defended
// robustness on the stock benchmark, adaptive-attack resilience, the
// hyperparameter trends, inference-cost accounting, and determinism. Each
// criterion prints exactly one "ACCEPTANCE n: PASS|FAIL" line; the process
// exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "scoreopt/dataset.hpp"
#include "scoreopt/finite_diff.hpp"
#include "scoreopt/gmm.hpp"
#include "scoreopt/harness.hpp"
#include "scoreopt/losses.hpp"
#include "scoreopt/score_net.hpp"

using namespace scoreopt;

namespace {

int failures = 0;

void report(int n, bool ok) {
    std::printf("ACCEPTANCE %d: %s\n", n, ok ? "PASS" : "FAIL");
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Asymmetric three-mode probe mixture: no symmetry to hide sign errors.
GmmModel probe_mixture() {
    return GmmModel({0.3, 0.5, 0.2},
                    {Tensor::vec({-1.2, 0.4}), Tensor::vec({0.9, -0.7}), Tensor::vec({0.2, 1.5})},
                    {0.4, 0.9, 0.6});
}

/// err(a vs want) relative to the larger of 1 and |want|, so near-zero
/// targets fall back to an absolute comparison at the same tolerance.
double rel_err(const Tensor& got, const Tensor& want) {
    Tensor d = got;
    d -= want;
    return norm2(d) / std::max(1.0, norm2(want));
}

/// Trapezoid integrals of N(t; mu, v) * N(y; t, sigma^2) and of t times the
/// same integrand, over a generous bracket. Deliberately avoids the
/// v + sigma^2 convolution shortcut the closed forms use.
struct Quad1d {
    double mass = 0.0;
    double first_moment = 0.0;
};

Quad1d quad_1d(double mu, double v, double y, double sigma) {
    const double w = std::max(std::sqrt(v), sigma);
    const double lo = std::min(mu, y) - 10.0 * w;
    const double hi = std::max(mu, y) + 10.0 * w;
    const int n = 4000;
    const double h = (hi - lo) / n;
    const double cv = 1.0 / (2.0 * v);
    const double cs = 1.0 / (2.0 * sigma * sigma);
    const double z = 1.0 / (2.0 * std::numbers::pi * std::sqrt(v) * sigma);
    Quad1d q;
    for (int i = 0; i <= n; ++i) {
        const double t = lo + h * i;
        const double f = z * std::exp(-cv * (t - mu) * (t - mu) - cs * (y - t) * (y - t));
        const double wt = (i == 0 || i == n) ? 0.5 : 1.0;
        q.mass += wt * f;
        q.first_moment += wt * f * t;
    }
    q.mass *= h;
    q.first_moment *= h;
    return q;
}

/// Posterior mean of the clean sample given the noised one, by per-mode,
/// per-coordinate quadrature (valid because the modes are isotropic).
Tensor quad_posterior_mean(const GmmModel& g, const Tensor& y, double sigma, double* density) {
    const std::size_t d = y.size();
    const std::size_t K = g.weights().size();
    Tensor num = Tensor::zeros_like(y);
    double den = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<Quad1d> q(d);
        double mode_mass = g.weights()[k];
        for (std::size_t j = 0; j < d; ++j) {
            q[j] = quad_1d(g.means()[k][j], g.variances()[k], y[j], sigma);
            mode_mass *= q[j].mass;
        }
        den += mode_mass;
        for (std::size_t i = 0; i < d; ++i)
            num[i] += mode_mass / q[i].mass * q[i].first_moment;
    }
    for (std::size_t i = 0; i < d; ++i) num[i] /= den;
    if (density) *density = den;
    return num;
}

LossSample make_sample(double sigma, Tensor e1, Tensor e2 = {}) {
    LossSample s;
    s.sigma = sigma;
    s.eps1 = std::move(e1);
    s.eps2 = std::move(e2);
    return s;
}

// --- criterion 1: analytic mixture oracles ---------------------------------
// Score matches finite differences of the noised log-density, the noised
// density and the denoiser match mode-wise quadrature, the Hessian-vector
// product matches directional finite differences, and the denoiser equals
// x + sigma^2 * score to near machine precision. All within 10 s.
void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    const GmmModel g = probe_mixture();
    RngStream rng(41);
    bool ok = true;

    for (int t = 0; t < 100; ++t) {
        const Tensor x = Tensor::vec({rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)});
        const double sigma = std::exp(rng.uniform(std::log(0.05), std::log(2.0)));

        const auto logd = [&](const Tensor& p) { return g.noised_logdensity(p, sigma); };
        ok &= rel_err(g.score(x, sigma), finite_diff_grad(logd, x, 1e-5)) < 1e-4;

        double qden = 0.0;
        const Tensor pm = quad_posterior_mean(g, x, sigma, &qden);
        ok &= rel_err(denoise(g, x, sigma), pm) < 1e-4;
        ok &= std::abs(g.noised_logdensity(x, sigma) - std::log(qden)) < 1e-4;

        const Tensor v = gaussian(rng, {2});
        const double h = 1e-6;
        Tensor xp = x, xm = x;
        axpy(h, v, xp);
        axpy(-h, v, xm);
        Tensor dfd = g.score(xp, sigma);
        dfd -= g.score(xm, sigma);
        dfd *= 1.0 / (2.0 * h);
        // symmetric Hessian: directional derivative of the score along v
        // equals the vjp with cotangent v
        ok &= rel_err(g.score_vjp(x, sigma, v), dfd) < 1e-4;

        Tensor tweedie = x;
        axpy(sigma * sigma, g.score(x, sigma), tweedie);
        tweedie -= denoise(g, x, sigma);
        ok &= norm2(tweedie) < 1e-12;
    }
    ok &= seconds_since(t0) < 10.0;
    report(1, ok);
}

// --- criterion 2: clean-space and noisy-space gradients coincide -----------
void criterion_2() {
    const GmmModel m = probe_mixture();
    RngStream rng(53);
    bool ok = true;
    const std::vector<LossKind> kinds = {LossKind::diff(), LossKind::mse(0.7), LossKind::sr(1.3)};
    for (const LossKind& kind : kinds) {
        for (int t = 0; t < 100; ++t) {
            const Tensor x = gaussian(rng, {2});
            const Tensor x_a = gaussian(rng, {2});
            const LossSample s =
                make_sample(rng.uniform(0.2, 1.2), gaussian(rng, {2}), gaussian(rng, {2}));
            Tensor xt = x;
            axpy(s.sigma, s.eps1, xt);
            const Tensor g1 = loss_grad(kind, m, x, x_a, s);
            const Tensor g2 = loss_grad_at_noisy(kind, m, xt, x_a, s);
            for (std::size_t i = 0; i < x.size(); ++i) ok &= std::abs(g1[i] - g2[i]) <= 1e-14;
        }
    }
    report(2, ok);
}

// --- criterion 3: loss identities and frozen single-Gaussian fixtures ------
void criterion_3() {
    const GmmModel g = GmmModel({1.0}, {Tensor::vec({0.0, 0.0})}, {1.0});
    const GmmModel m = probe_mixture();
    bool ok = true;

    // anchor weight zero reduces the anchored loss to the plain one, exactly
    const Tensor x = Tensor::vec({0.4, -0.6});
    const Tensor x_a = Tensor::vec({0.1, 0.3});
    const LossSample s = make_sample(0.5, Tensor::vec({0.2, -1.0}));
    ok &= mse_loss(g, x, x_a, 0.0, s) == diff_loss(g, x, s);

    // matching arguments and shared noise cancel the regularizer, exactly
    const LossSample shared = make_sample(0.5, Tensor::vec({0.2, -1.0}), Tensor::vec({0.2, -1.0}));
    ok &= std::abs(sr_loss(g, x, x, 1.0, shared) - diff_loss(g, x, shared)) <= 1e-14;

    // regularizer expands through the denoiser definition with zero residual
    RngStream rng(29);
    for (int t = 0; t < 20; ++t) {
        const Tensor p = gaussian(rng, {2});
        const Tensor pa = gaussian(rng, {2});
        const LossSample sr = make_sample(rng.uniform(0.2, 1.0), gaussian(rng, {2}),
                                          gaussian(rng, {2}));
        Tensor u1 = p, u2 = pa;
        axpy(sr.sigma, sr.eps1, u1);
        axpy(sr.sigma, sr.eps2, u2);
        const double lam = 1.7;
        const double expanded = norm2_sq(denoise(m, u1, sr.sigma) - p) +
                                lam * norm2_sq(denoise(m, u1, sr.sigma) - denoise(m, u2, sr.sigma));
        ok &= std::abs(sr_loss(m, p, pa, lam, sr) - expanded) <= 1e-12;
    }

    // frozen fixtures on the unit Gaussian: the denoiser halves (1, 0) at
    // sigma 1, so both hand values come out to exactly 0.25
    ok &= std::abs(diff_loss(g, Tensor::vec({0.0, 0.0}),
                             make_sample(1.0, Tensor::vec({1.0, 0.0}))) -
                   0.25) <= 1e-14;
    const LossSample zz = make_sample(1.0, Tensor::vec({0.0, 0.0}), Tensor::vec({0.0, 0.0}));
    ok &= std::abs(sr_loss(g, Tensor::vec({0.0, 0.0}), Tensor::vec({1.0, 0.0}), 1.0, zz) - 0.25) <=
          1e-14;
    report(3, ok);
}

// --- criterion 4: score-matching training quality ---------------------------
// A two-stage Adam schedule on the stock eight-mode mixture; quality is the
// field-level cosine between learned and analytic scores over noised
// data-region probes (sample-weighted, so well-determined high-magnitude
// regions dominate). Must clear 0.95 at every sigma in [0.1, 0.5] in under
// two minutes single-threaded.
void criterion_4() {
    const auto t0 = std::chrono::steady_clock::now();
    const DatasetKind kind{};
    const GmmModel gmm = gmm_for_kind(kind);
    const LabeledSet train = gen_dataset(kind, 4000, 3);

    RngStream irng(7);
    MlpScoreNet net(2, {96, 96}, irng);
    DsmTrainConfig cfg;
    cfg.sigma_min = 0.08;
    cfg.sigma_max = 0.8;
    cfg.batch = 128;
    cfg.iters = 8000;
    cfg.lr = 2e-3;
    cfg.seed = 5;
    cfg.weight = [](double s) { return 1.0 / (s * s); };
    MlpScoreNet stage1 = train_dsm(std::move(net), train.points, cfg);
    cfg.iters = 6000;
    cfg.lr = 4e-4;
    cfg.seed = 6;
    const MlpScoreNet trained = train_dsm(std::move(stage1), train.points, cfg);
    const double train_secs = seconds_since(t0);

    bool ok = true;
    RngStream prng(11);
    for (double sigma : {0.1, 0.2, 0.3, 0.4, 0.5}) {
        double num = 0.0, nn = 0.0, nt = 0.0;
        for (int i = 0; i < 500; ++i) {
            Tensor x = train.points[static_cast<std::size_t>(prng.uniform01() * train.size())];
            for (std::size_t j = 0; j < x.size(); ++j) x[j] += sigma * prng.normal();
            const Tensor sh = trained.score(x, sigma);
            const Tensor st = gmm.score(x, sigma);
            num += dot(sh, st);
            nn += norm2_sq(sh);
            nt += norm2_sq(st);
        }
        const double cos = num / std::sqrt(nn * nt);
        std::printf("  learned score, sigma %.1f: cosine %.4f\n", sigma, cos);
        ok &= cos >= 0.95;
    }
    std::printf("  training time %.1f s\n", train_secs);
    ok &= train_secs < 120.0;
    report(4, ok);
}

// shared benchmark artifacts for criteria 5-11
struct BenchLab {
    ExperimentSpec spec = toy_benchmark_spec();
    GmmModel prior;
    Classifier clf;
    ResultRecord defended;    // stock iterated purifier
    ResultRecord undefended;  // identity defense

    BenchLab()
        : prior(gmm_for_kind(spec.dataset)), clf(toy_benchmark_classifier(spec)) {}
};

// --- criterion 5: defended robustness on the stock benchmark ---------------
void criterion_5(BenchLab& lab) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentSpec undef = lab.spec;
    undef.defense = DefenseKind::Identity;
    lab.undefended = run_experiment(undef, lab.prior, lab.clf, 4);
    lab.defended = run_experiment(lab.spec, lab.prior, lab.clf, 4);

    std::printf("  clean %.2f%%, attacked undefended %.2f%% (+-%.2f)\n",
                lab.undefended.standard_acc, lab.undefended.robust_acc,
                lab.undefended.robust_std);
    std::printf("  iterated purifier: standard %.2f%% (+-%.2f), robust %.2f%% (+-%.2f), %zu "
                "trials\n",
                lab.defended.standard_acc, lab.defended.standard_std, lab.defended.robust_acc,
                lab.defended.robust_std, lab.spec.trials);

    bool ok = lab.spec.trials == 5;
    ok &= lab.undefended.standard_acc >= 95.0;
    ok &= lab.undefended.robust_acc < 20.0;
    ok &= lab.defended.robust_acc >= 80.0;
    ok &= lab.defended.robust_acc >= lab.defended.standard_acc - 10.0;
    ok &= seconds_since(t0) < 180.0;
    report(5, ok);
}

// --- criterion 6: resilience under the adaptive identity-backward attack ---
void criterion_6(const BenchLab& lab) {
    ExperimentSpec adaptive = lab.spec;
    adaptive.attack = AttackKind::BpdaEot;
    adaptive.attack_cfg = AttackConfig::bpda_eot(adaptive.threat.epsilon);
    const ResultRecord sn = run_experiment(adaptive, lab.prior, lab.clf, 4);

    ExperimentSpec oneshot = adaptive;
    oneshot.defense = DefenseKind::OneShotDenoise;
    const ResultRecord os = run_experiment(oneshot, lab.prior, lab.clf, 4);

    std::printf("  adaptive attack: iterated %.2f%% (+-%.2f) vs one-shot %.2f%% (+-%.2f)\n",
                sn.robust_acc, sn.robust_std, os.robust_acc, os.robust_std);
    report(6, sn.robust_acc >= 50.0 && sn.robust_acc >= os.robust_acc + 5.0);
}

// --- criterion 7: plain denoising loss degrades with long optimization -----
void criterion_7(const BenchLab& lab) {
    ExperimentSpec s7 = lab.spec;
    s7.trials = 2;
    s7.purifier.loss = LossKind::diff();
    s7.purifier.noise = NoiseRange(0.25, 0.25);
    const std::vector<double> steps = {1, 2, 5, 10, 25, 50, 100};
    const auto recs = sweep(s7, "steps", steps, lab.prior, lab.clf, 4);

    double peak = -1.0;
    std::size_t peak_at = 0;
    std::printf("  unanchored loss, robust%% by steps:");
    for (std::size_t i = 0; i < recs.size(); ++i) {
        std::printf(" %.1f", recs[i].robust_acc);
        if (recs[i].robust_acc > peak) {
            peak = recs[i].robust_acc;
            peak_at = i;
        }
    }
    std::printf("\n");
    const double last = recs.back().robust_acc;
    report(7, peak_at < recs.size() - 1 && last <= peak - 10.0);
}

// --- criterion 8: regularized loss is flatter across its weight than the
// anchored loss across its own, paired seeds -------------------------------
void criterion_8(const BenchLab& lab) {
    const std::vector<double> grid = {0.5, 1.0, 2.0, 4.0};
    // at the stock (tiny) noise level neither weight has any leverage, so the
    // sensitivity comparison runs where the prior and anchor forces balance
    ExperimentSpec mse = lab.spec;
    mse.trials = 2;
    mse.purifier.noise = NoiseRange(0.30, 0.30);
    mse.purifier.loss = LossKind::mse(1.0);
    ExperimentSpec sr = mse;
    sr.purifier.loss = LossKind::sr(1.0);

    const auto mrec = sweep(mse, "lambda", grid, lab.prior, lab.clf, 4);
    const auto srec = sweep(sr, "lambda-reg", grid, lab.prior, lab.clf, 4);

    const auto spread = [](const std::vector<ResultRecord>& rs) {
        double lo = rs[0].robust_acc, hi = rs[0].robust_acc;
        for (const auto& r : rs) {
            lo = std::min(lo, r.robust_acc);
            hi = std::max(hi, r.robust_acc);
        }
        return hi - lo;
    };
    const double ms = spread(mrec), ss = spread(srec);
    std::printf("  robust%% spread over the weight grid: anchored %.2f, regularized %.2f\n", ms,
                ss);
    report(8, ss <= ms);
}

// --- criterion 9: robustness is nondecreasing in outer rounds to a plateau -
void criterion_9(const BenchLab& lab) {
    const std::vector<double> steps = {1, 2, 3, 5, 8};
    std::vector<double> mean(steps.size(), 0.0);
    for (std::uint64_t sd = 0; sd < 5; ++sd) {
        ExperimentSpec s9 = toy_benchmark_spec(sd);
        s9.trials = 1;
        const auto recs = sweep(s9, "steps", steps, lab.prior, lab.clf, 4);
        for (std::size_t i = 0; i < recs.size(); ++i) mean[i] += recs[i].robust_acc / 5.0;
    }
    std::printf("  mean robust%% by outer rounds:");
    bool ok = true;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        std::printf(" %.2f", mean[i]);
        if (i > 0) ok &= mean[i] >= mean[i - 1] - 2.0;
    }
    std::printf("\n");
    ok &= *std::max_element(mean.begin(), mean.end()) >= mean.front();
    report(9, ok);
}

// --- criterion 10: per-step cost accounting and few-steps efficacy ---------
void criterion_10(const BenchLab& lab) {
    const std::vector<BenchRow> rows = bench_inference(lab.spec, lab.prior, {5});
    const BenchRow& sn = rows[0];
    const BenchRow& ms = rows[1];
    const double ratio = (sn.seconds_per_sample / static_cast<double>(sn.steps)) /
                         (ms.seconds_per_sample / static_cast<double>(ms.steps));

    ExperimentSpec multi = lab.spec;
    multi.defense = DefenseKind::MultiStep;  // 50-step reverse-process baseline
    const ResultRecord long_run = run_experiment(multi, lab.prior, lab.clf, 4);

    std::printf("  per-step cost ratio at 5 steps: %.2fx; robust%% 5-step %.2f vs 50-step %.2f\n",
                ratio, lab.defended.robust_acc, long_run.robust_acc);
    bool ok = ratio >= 1.5 && ratio <= 3.5;
    ok &= sn.forwards_per_sample == 11.0 && sn.vjps_per_sample == 5.0;
    ok &= ms.forwards_per_sample == 5.0 && ms.vjps_per_sample == 0.0;
    ok &= lab.spec.multi_steps == 50;
    ok &= lab.defended.robust_acc > long_run.robust_acc;
    report(10, ok);
}

// --- criterion 11: bit-exact reruns at any worker count --------------------
void criterion_11(const BenchLab& lab) {
    ExperimentSpec s = lab.spec;
    s.eval_n = 128;
    s.trials = 2;
    const ResultRecord a = run_experiment(s, lab.prior, lab.clf, 1);
    const ResultRecord b = run_experiment(s, lab.prior, lab.clf, 1);
    const ResultRecord c = run_experiment(s, lab.prior, lab.clf, 3);
    const ResultRecord d = run_experiment(s, lab.prior, lab.clf, 8);

    const auto swept_once = sweep(s, "steps", {1.0, 5.0}, lab.prior, lab.clf, 1);
    const auto swept_again = sweep(s, "steps", {1.0, 5.0}, lab.prior, lab.clf, 4);

    report(11, a == b && a == c && a == d && swept_once == swept_again &&
                   lab.defended.robust_acc == run_experiment(lab.spec, lab.prior, lab.clf, 2)
                                                  .robust_acc);
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();

    BenchLab lab;
    criterion_5(lab);
    criterion_6(lab);
    criterion_7(lab);
    criterion_8(lab);
    criterion_9(lab);
    criterion_10(lab);
    criterion_11(lab);

    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
