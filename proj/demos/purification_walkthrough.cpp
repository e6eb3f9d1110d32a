// Follows one evaluation point through the whole pipeline: attack it with
// Transfer-PGD against a brittle classifier, then watch ScoreOpt-N walk it
// back toward its mixture mode round by round.

#include <cstdio>

#include "scoreopt/attacks.hpp"
#include "scoreopt/dataset.hpp"
#include "scoreopt/harness.hpp"
#include "scoreopt/purify.hpp"

using namespace scoreopt;

namespace {

double dist(const Tensor& a, const Tensor& b) {
    Tensor d = a;
    d -= b;
    return norm2(d);
}

const Tensor& nearest_mean(const GmmModel& gmm, const Tensor& x) {
    const std::vector<Tensor>& mu = gmm.means();
    std::size_t best = 0;
    for (std::size_t k = 1; k < mu.size(); ++k)
        if (dist(x, mu[k]) < dist(x, mu[best])) best = k;
    return mu[best];
}

}  // namespace

int main() {
    const ExperimentSpec bench = toy_benchmark_spec();
    const GmmModel prior = gmm_for_kind(bench.dataset);
    const Classifier clf = toy_benchmark_classifier(bench);

    const LabeledSet eval = gen_dataset(bench.dataset, 16, bench.seed);

    // pick the first point the attack actually fools
    RngStream rng(7);
    const GradOracle oracle = make_classifier_oracle(clf);
    for (std::size_t i = 0; i < eval.size(); ++i) {
        const Tensor& x = eval.points[i];
        const int y = eval.labels[i];
        RngStream attack_rng = rng.substream(i);
        const Tensor x_adv = pgd(oracle, x, y, bench.threat, bench.attack_cfg, attack_rng);
        if (clf.predict(x_adv) == y || clf.predict(x) != y) continue;

        const Tensor& mu = nearest_mean(prior, x);
        std::printf("point %zu, true class %d\n", i, y);
        std::printf("  clean    (%+.4f, %+.4f)  predicted %d, dist to mode %.4f\n", x[0], x[1],
                    clf.predict(x), dist(x, mu));
        std::printf("  attacked (%+.4f, %+.4f)  predicted %d, dist to mode %.4f\n", x_adv[0],
                    x_adv[1], clf.predict(x_adv), dist(x_adv, mu));

        PurifierConfig cfg = bench.purifier;
        cfg.record_iterates = true;
        RngStream purify_rng = rng.substream(1000 + i);
        const auto [purified, trace] = score_opt_n(prior, x_adv, cfg, purify_rng);
        for (std::size_t r = 0; r < trace.iterates.size(); ++r) {
            const Tensor& it = trace.iterates[r];
            std::printf("  round %zu  (%+.4f, %+.4f)  predicted %d, dist to mode %.4f\n", r + 1,
                        it[0], it[1], clf.predict(it), dist(it, mu));
        }
        std::printf("  purified prediction %d (loss evaluations: %zu, score forwards: %llu)\n",
                    clf.predict(purified), trace.losses.size(),
                    static_cast<unsigned long long>(trace.counts.forwards));
        return 0;
    }
    std::printf("the attack fooled no sampled point; try another seed\n");
    return 0;
}
