#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "scoreopt/classifier.hpp"
#include "scoreopt/dataset.hpp"
#include "scoreopt/finite_diff.hpp"
#include "scoreopt/rng.hpp"

using namespace scoreopt;

namespace {

Classifier linear_fixture() {
    // logits(x) = (x0, -x0)
    Tensor W({2, 2});
    W.at(0, 0) = 1.0;
    W.at(1, 0) = -1.0;
    return Classifier(2, 2, 0, {W}, {Tensor({2})});
}

LabeledSet two_blobs(std::size_t n, std::uint64_t seed) {
    RngStream rng(seed);
    LabeledSet set;
    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % 2);
        Tensor x = gaussian(rng, {2});
        x *= 0.5;
        const double shift = c == 0 ? 2.0 : -2.0;
        x[0] += shift;
        x[1] += shift;
        set.points.push_back(std::move(x));
        set.labels.push_back(c);
    }
    return set;
}

std::string dump(const Classifier& clf) {
    std::ostringstream os;
    clf.save(os);
    return os.str();
}

}  // namespace

TEST_CASE("classifier construction validates shapes") {
    RngStream rng(0);
    REQUIRE_THROWS_AS(Classifier(0, 2, 0, rng), ContractViolation);
    REQUIRE_THROWS_AS(Classifier(2, 1, 0, rng), ContractViolation);
    // weight matrix does not chain with the declared dimensions
    REQUIRE_THROWS_AS(Classifier(2, 2, 0, {Tensor({3, 2})}, {Tensor({3})}), ContractViolation);
    REQUIRE_THROWS_AS(Classifier(2, 2, 4, {Tensor({4, 2})}, {Tensor({4})}), ContractViolation);
    Tensor bad({2, 2});
    bad[0] = std::nan("");
    REQUIRE_THROWS_AS(Classifier(2, 2, 0, {bad}, {Tensor({2})}), ContractViolation);
}

TEST_CASE("softmax-linear fixture: probabilities, loss, input gradient") {
    const Classifier clf = linear_fixture();
    const Tensor x = Tensor::vec({0.5, 3.0});

    const Tensor p = clf.probs(x);
    const double p0 = 1.0 / (1.0 + std::exp(-1.0));
    REQUIRE(p[0] == Catch::Approx(p0).epsilon(1e-14));
    REQUIRE(p[1] == Catch::Approx(1.0 - p0).epsilon(1e-14));

    REQUIRE(clf.ce_loss(x, 0) == Catch::Approx(std::log(1.0 + std::exp(-1.0))).margin(1e-14));
    REQUIRE(clf.ce_loss(x, 1) == Catch::Approx(std::log(1.0 + std::exp(1.0))).margin(1e-14));

    // grad_x CE = W^T (p - onehot(y)); second coordinate never enters
    const Tensor g = clf.loss_input_grad(x, 0);
    REQUIRE(g[0] == Catch::Approx(2.0 * (p0 - 1.0)).epsilon(1e-12));
    REQUIRE(g[1] == 0.0);
}

TEST_CASE("softmax probabilities are positive and sum to one") {
    RngStream rng(7);
    const Classifier clf(3, 5, 8, rng);
    for (int t = 0; t < 10; ++t) {
        const Tensor x = gaussian(rng, {3});
        const Tensor p = clf.probs(x);
        double sum = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            REQUIRE(p[i] > 0.0);
            sum += p[i];
        }
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
        REQUIRE(clf.ce_loss(x, 2) ==
                Catch::Approx(-std::log(p[2])).epsilon(1e-12));
    }
}

TEST_CASE("prediction is invariant under a constant logit shift") {
    RngStream rng(9);
    Tensor W = gaussian(rng, {4, 3});
    Tensor b = gaussian(rng, {4});
    Tensor b_shift = b;
    for (std::size_t i = 0; i < b_shift.size(); ++i) b_shift[i] += 37.5;
    const Classifier a(3, 4, 0, {W}, {b});
    const Classifier c(3, 4, 0, {W}, {b_shift});
    for (int t = 0; t < 20; ++t) {
        const Tensor x = gaussian(rng, {3});
        REQUIRE(a.predict(x) == c.predict(x));
        const Tensor pa = a.probs(x);
        const Tensor pc = c.probs(x);
        for (std::size_t i = 0; i < pa.size(); ++i)
            REQUIRE(pa[i] == Catch::Approx(pc[i]).margin(1e-12));
    }
}

TEST_CASE("prediction ties break toward the lowest class index") {
    const Classifier flat(2, 3, 0, {Tensor({3, 2})}, {Tensor({3})});
    REQUIRE(flat.predict(Tensor::vec({1.0, -2.0})) == 0);

    Tensor b({3});
    b[1] = 1.0;
    b[2] = 1.0;
    const Classifier two_way(2, 3, 0, {Tensor({3, 2})}, {b});
    REQUIRE(two_way.predict(Tensor::vec({0.3, 0.4})) == 1);
}

TEST_CASE("input gradient matches finite differences for both architectures") {
    RngStream rng(21);
    for (std::size_t hidden : {std::size_t{0}, std::size_t{6}}) {
        const Classifier clf(3, 4, hidden, rng);
        for (int t = 0; t < 5; ++t) {
            const Tensor x = gaussian(rng, {3});
            const int y = t % 4;
            const Tensor g = clf.loss_input_grad(x, y);
            const Tensor fd = finite_diff_grad(
                [&](const Tensor& p) { return clf.ce_loss(p, y); }, x, 1e-6);
            for (std::size_t i = 0; i < g.size(); ++i)
                REQUIRE(g[i] == Catch::Approx(fd[i]).margin(1e-6 + 1e-4 * std::abs(fd[i])));
        }
    }
}

TEST_CASE("parameter gradients match finite differences") {
    RngStream rng(33);
    Classifier clf(2, 3, 5, rng);
    const Tensor x = gaussian(rng, {2});
    const int y = 1;

    std::vector<Tensor> gw, gb;
    for (std::size_t l = 0; l < clf.weights().size(); ++l) {
        gw.push_back(Tensor::zeros_like(clf.weights()[l]));
        gb.push_back(Tensor::zeros_like(clf.biases()[l]));
    }
    clf.ce_param_grads(x, y, gw, gb);

    const double h = 1e-6;
    auto probe = [&](Tensor& param, std::size_t i, double expected) {
        const double keep = param[i];
        param[i] = keep + h;
        const double up = clf.ce_loss(x, y);
        param[i] = keep - h;
        const double dn = clf.ce_loss(x, y);
        param[i] = keep;
        const double fd = (up - dn) / (2.0 * h);
        REQUIRE(expected == Catch::Approx(fd).margin(1e-6 + 1e-4 * std::abs(fd)));
    };
    for (std::size_t l = 0; l < clf.weights().size(); ++l) {
        for (std::size_t i = 0; i < clf.weights()[l].size(); i += 2)
            probe(clf.weights()[l], i, gw[l][i]);
        for (std::size_t i = 0; i < clf.biases()[l].size(); ++i)
            probe(clf.biases()[l], i, gb[l][i]);
    }
}

TEST_CASE("training separates two blobs with either architecture") {
    const LabeledSet train = two_blobs(200, 1);
    const LabeledSet eval = two_blobs(400, 2);

    const Classifier lin = train_classifier(train, 2, 0, 40, 0.05, 3);
    REQUIRE(accuracy(lin, eval) >= 0.99);

    const Classifier mlp = train_classifier(train, 2, 8, 40, 0.05, 3);
    REQUIRE(accuracy(mlp, eval) >= 0.99);
}

TEST_CASE("one hidden layer separates eight modes collapsed onto four classes") {
    const DatasetKind kind = DatasetKind::gmm_classes(8, 4, 6.0);
    const LabeledSet train = gen_dataset(kind, 1600, 11);
    const LabeledSet eval = gen_dataset(kind, 800, 12);

    const Classifier clf = train_classifier(train, 4, 24, 80, 0.02, 5);
    REQUIRE(accuracy(clf, eval) >= 0.95);

    // opposite modes share a class, so no linear model can do well
    const Classifier lin = train_classifier(train, 4, 0, 80, 0.02, 5);
    REQUIRE(accuracy(lin, eval) < 0.80);
}

TEST_CASE("training is deterministic per seed") {
    const LabeledSet train = two_blobs(120, 4);
    const Classifier a = train_classifier(train, 2, 6, 10, 0.03, 17);
    const Classifier b = train_classifier(train, 2, 6, 10, 0.03, 17);
    REQUIRE(dump(a) == dump(b));
    const Classifier c = train_classifier(train, 2, 6, 10, 0.03, 18);
    REQUIRE(dump(a) != dump(c));
}

TEST_CASE("zero epochs returns the freshly initialized classifier") {
    const LabeledSet train = two_blobs(64, 5);
    const Classifier trained = train_classifier(train, 2, 4, 0, 0.05, 23);
    RngStream rng(23);
    const Classifier fresh(2, 2, 4, rng);
    REQUIRE(dump(trained) == dump(fresh));
}

TEST_CASE("diverging classifier training reports the epoch") {
    const LabeledSet train = two_blobs(200, 6);
    try {
        (void)train_classifier(train, 2, 0, 3, 1e308, 7);
        FAIL("expected TrainingDiverged");
    } catch (const TrainingDiverged& e) {
        REQUIRE(e.iteration == 0);
    }
}

TEST_CASE("classifier training validates inputs") {
    REQUIRE_THROWS_AS(train_classifier(LabeledSet{}, 2, 0, 1, 0.1, 0), ContractViolation);
    LabeledSet bad = two_blobs(10, 0);
    bad.labels[3] = 9;
    REQUIRE_THROWS_AS(train_classifier(bad, 2, 0, 1, 0.1, 0), ContractViolation);
    bad.labels.pop_back();
    REQUIRE_THROWS_AS(bad.validate(2), ContractViolation);
    const LabeledSet ok = two_blobs(10, 0);
    REQUIRE_THROWS_AS(train_classifier(ok, 2, 0, 1, 0.0, 0), ConfigError);
}

TEST_CASE("classifier serialization round-trips exactly") {
    const LabeledSet train = two_blobs(100, 8);
    const Classifier clf = train_classifier(train, 2, 5, 6, 0.05, 31);

    std::ostringstream os;
    clf.save(os);
    std::istringstream is(os.str());
    textio::TokenReader r(is);
    r.expect("kind");
    r.expect("clf");
    const Classifier back = Classifier::load(r);

    RngStream rng(99);
    for (int t = 0; t < 5; ++t) {
        const Tensor x = gaussian(rng, {2});
        const Tensor a = clf.logits(x);
        const Tensor b = back.logits(x);
        REQUIRE(a == b);
    }
}

TEST_CASE("classifier arch strings parse") {
    REQUIRE(parse_classifier_arch("linear") == ClassifierArch{0, 1.0});
    REQUIRE(parse_classifier_arch("mlp:16") == ClassifierArch{16, 1.0});
    REQUIRE(parse_classifier_arch("mlp:64:20") == ClassifierArch{64, 20.0});
    REQUIRE(parse_classifier_arch("mlp:8:0.5") == ClassifierArch{8, 0.5});
    REQUIRE_THROWS_AS(parse_classifier_arch("mlp:0"), ConfigError);
    REQUIRE_THROWS_AS(parse_classifier_arch("mlp:16x"), ConfigError);
    REQUIRE_THROWS_AS(parse_classifier_arch("mlp:16:"), ConfigError);
    REQUIRE_THROWS_AS(parse_classifier_arch("mlp:16:-2"), ConfigError);
    REQUIRE_THROWS_AS(parse_classifier_arch("cnn"), ConfigError);
}

TEST_CASE("hidden-layer init gain sharpens features without changing shapes") {
    RngStream a(11);
    RngStream b(11);
    const Classifier plain(2, 4, 16, a);
    const Classifier sharp(2, 4, 16, b, 25.0);
    REQUIRE(sharp.weights()[0].shape() == plain.weights()[0].shape());
    // hidden weights are exactly the plain draw scaled by the gain
    for (std::size_t i = 0; i < plain.weights()[0].size(); ++i)
        REQUIRE(sharp.weights()[0][i] == 25.0 * plain.weights()[0][i]);
    // hidden biases move off zero so the sharp units spread over the data
    double bias_mag = 0.0;
    for (std::size_t i = 0; i < sharp.biases()[0].size(); ++i)
        bias_mag += std::abs(sharp.biases()[0][i]);
    REQUIRE(bias_mag > 0.0);
    for (std::size_t i = 0; i < plain.biases()[0].size(); ++i)
        REQUIRE(plain.biases()[0][i] == 0.0);
    // gain without a hidden layer is a contract violation, as is gain <= 0
    RngStream c(3);
    REQUIRE_THROWS_AS(Classifier(2, 4, 0, c, 5.0), ContractViolation);
    REQUIRE_THROWS_AS(Classifier(2, 4, 8, c, 0.0), ContractViolation);
}

TEST_CASE("out-of-range labels are rejected by loss and gradient") {
    const Classifier clf = linear_fixture();
    const Tensor x = Tensor::vec({0.0, 0.0});
    REQUIRE_THROWS_AS(clf.ce_loss(x, -1), ContractViolation);
    REQUIRE_THROWS_AS(clf.ce_loss(x, 2), ContractViolation);
    REQUIRE_THROWS_AS(clf.loss_input_grad(x, 5), ContractViolation);
    REQUIRE_THROWS_AS(clf.logits(Tensor::vec({1.0, 2.0, 3.0})), ContractViolation);
}
