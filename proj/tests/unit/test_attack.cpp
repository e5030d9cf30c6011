#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "bnnprobe/attack.hpp"
#include "bnnprobe/dataset.hpp"
#include "bnnprobe/diagnostics.hpp"
#include "bnnprobe/error.hpp"
#include "bnnprobe/loss.hpp"
#include "bnnprobe/rng.hpp"
#include "bnnprobe/training.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace bnnprobe;
namespace fs = std::filesystem;

namespace {

struct Trained {
    Dataset train;
    Dataset test;
    Network net;
};

// Small binarized model on 16-feature blobs, trained once per process.
const Trained& small_bc() {
    static const Trained t = [] {
        SyntheticSpec s;
        s.n = 600;
        s.dim = 16;
        s.classes = 4;
        s.noise = 0.25;
        s.seed = 21;
        auto [tr, te] = split(gen_synthetic(s), 0.75, 21);
        Network net = Network::mlp({16, 32, 4}, Activation::relu, QuantMode::weights_binary, true, 21);
        TrainConfig cfg;
        cfg.learning_rate = 0.01;
        cfg.epochs = 15;
        cfg.seed = 21;
        train(net, tr, cfg, 1);
        return Trained{tr, te, net};
    }();
    return t;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

AttackConfig pgd(double eps, double step, int iters) {
    AttackConfig c;
    c.epsilon = eps;
    c.step = step;
    c.iterations = iters;
    c.input_box = std::make_pair(0.0, 1.0);
    c.seed = 3;
    return c;
}

}  // namespace

TEST_SUITE("attack") {

TEST_CASE("project_ball") {
    const Tensor a = project_ball(Tensor::vector({0.25, -0.05}), Norm::linf, 0.1);
    CHECK(a[0] == 0.1);
    CHECK(a[1] == -0.05);
    const Tensor b = project_ball(Tensor::vector({3, 4}), Norm::l2, 1.0);
    CHECK(b[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(b[1] == doctest::Approx(0.8).epsilon(1e-15));
    const Tensor inside = Tensor::vector({0.01, -0.02, 0.03});
    CHECK(bitwise_equal(project_ball(inside, Norm::linf, 0.05), inside));
    CHECK(bitwise_equal(project_ball(inside, Norm::l2, 0.05), inside));
}

TEST_CASE("random_init") {
    const Tensor x0 = Tensor::vector({0.2, 0.5, 0.9});
    Rng r0(1);
    CHECK(bitwise_equal(random_init(x0, Norm::linf, 0.0, r0), x0));
    Rng a(7), b(7);
    CHECK(bitwise_equal(random_init(x0, Norm::l2, 0.3, a), random_init(x0, Norm::l2, 0.3, b)));
    Rng c(8);
    for (int i = 0; i < 200; ++i) {
        const Tensor x = random_init(x0, Norm::l2, 0.3, c, std::make_pair(0.0, 1.0));
        CHECK(l2_norm(sub(x, x0)) <= 0.3 + 1e-12);
        for (double v : x.data()) CHECK_UNARY(v >= 0.0 && v <= 1.0);
    }
}

TEST_CASE("linf start is uniform per coordinate") {
    Rng rng(9);
    const Tensor x0 = Tensor::zeros({1});
    oracle::Vec draws;
    for (int i = 0; i < 10000; ++i) draws.push_back(random_init(x0, Norm::linf, 0.2, rng)[0]);
    CHECK(oracle::ks_uniform(draws, -0.2, 0.2) < 0.05);
}

TEST_CASE("config invariants") {
    AttackConfig c;
    CHECK_NOTHROW(c.validate());
    c.iterations = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = AttackConfig{};
    c.step = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c.epsilon = 0.0;
    CHECK_NOTHROW(c.validate());
    c = AttackConfig::fgsm(Norm::linf, 0.1);
    CHECK(c.iterations == 1);
    CHECK(c.step == 0.1);
    CHECK_FALSE(c.random_init);
    c.step = 0.05;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = AttackConfig{};
    c.input_box = std::make_pair(1.0, 0.0);
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("FGSM on a linear classifier follows the closed form") {
    Rng rng(10);
    const Tensor w = fixtures::random_matrix(2, 6, rng);
    const Network net = fixtures::linear_net(w, Tensor::zeros({2}));
    const Tensor x0 = fixtures::random_vector(6, rng);
    const int label = static_cast<int>(argmax(net.forward(x0).logits()));
    const double eps = 0.05;
    const AttackResult r = perturb(net, x0, label, AttackConfig::fgsm(Norm::linf, eps), 1);
    // Loss ascent moves along w_other - w_label.
    for (std::size_t i = 0; i < 6; ++i) {
        const double dir = w.at(1 - label, i) - w.at(label, i);
        const double expect = x0[i] + eps * (dir > 0 ? 1.0 : -1.0);
        CHECK(r.x_adv[i] == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("one-step PGD without random start is FGSM") {
    const Trained& t = small_bc();
    AttackConfig p = pgd(0.1, 0.1, 1);
    p.random_init = false;
    AttackConfig f = AttackConfig::fgsm(Norm::linf, 0.1);
    f.input_box = p.input_box;
    for (std::size_t i = 0; i < 10; ++i) {
        const AttackResult a = perturb(t.net, t.test.sample(i), t.test.labels[i], p, 5);
        const AttackResult b = perturb(t.net, t.test.sample(i), t.test.labels[i], f, 5);
        CHECK(bitwise_equal(a.x_adv, b.x_adv));
    }
}

TEST_CASE("zero radius keeps clean accuracy") {
    const Trained& t = small_bc();
    const AttackReport r = evaluate_attack(t.net, t.test, pgd(0.0, 0.0, 5), 1);
    CHECK(r.adversarial_accuracy == r.clean_accuracy);
}

TEST_CASE("iterates stay in the ball and the box") {
    const Trained& t = small_bc();
    for (Norm norm : {Norm::linf, Norm::l2}) {
        for (BetaPolicy pol : {BetaPolicy::none, BetaPolicy::njs, BetaPolicy::hns}) {
            AttackConfig c = pgd(norm == Norm::linf ? 0.1 : 0.4, norm == Norm::linf ? 0.03 : 0.1, 5);
            c.norm = norm;
            c.beta_policy = pol;
            c.njs_beta = 0.05;
            const AttackReport r = evaluate_attack(t.net, t.test, c, 1);
            CHECK(r.adversarial_accuracy <= r.clean_accuracy);
            for (const SampleOutcome& s : r.samples) CHECK(s.perturbation_norm <= c.epsilon + 1e-9);
            for (std::size_t i = 0; i < 10; ++i) {
                const AttackResult a = perturb(t.net, t.test.sample(i), t.test.labels[i], c, 2);
                for (double v : a.x_adv.data()) CHECK_UNARY(v >= 0.0 && v <= 1.0);
            }
        }
    }
}

TEST_CASE("misclassified samples are skipped") {
    const Network net = fixtures::linear_net(Tensor::identity(2), Tensor::zeros({2}));
    const Tensor x0 = Tensor::vector({0.2, 0.9});
    const AttackResult r = attack(net, x0, 0, pgd(0.1, 0.05, 3), 1);
    CHECK(bitwise_equal(r.x_adv, x0));
    CHECK(r.prediction == 1);
    CHECK(r.trace.predictions.empty());
}

TEST_CASE("njs needs a model beta") {
    const Network net = fixtures::linear_net(Tensor::identity(2), Tensor::zeros({2}));
    AttackConfig c = pgd(0.1, 0.05, 3);
    c.beta_policy = BetaPolicy::njs;
    CHECK_THROWS_AS(perturb(net, Tensor::vector({0.9, 0.1}), 0, c, 1), InvalidArgument);
}

TEST_CASE("temperature does not change predictions") {
    const Trained& t = small_bc();
    const Tensor z = t.net.logits(t.test.features);
    for (std::size_t i = 0; i < t.test.size(); ++i) {
        const Tensor row = z.row(i);
        for (double beta : {1e-3, 0.1, 10.0, 1e3}) CHECK(argmax(softmax(scale(row, beta))) == argmax(row));
    }
}

TEST_CASE("reports do not depend on the thread count") {
    const Trained& t = small_bc();
    AttackConfig c = pgd(0.1, 0.03, 5);
    c.beta_policy = BetaPolicy::njs;
    c.calibration_samples = 20;
    const AttackReport a = evaluate_attack(t.net, t.test, c, 1);
    const AttackReport b = evaluate_attack(t.net, t.test, c, 3);
    CHECK(a.summary_json(c) == b.summary_json(c));
    const fs::path dir = fs::temp_directory_path() / "bnnprobe_attack_threads";
    fs::create_directories(dir);
    a.write_csv(dir / "a.csv");
    b.write_csv(dir / "b.csv");
    CHECK(read_file(dir / "a.csv") == read_file(dir / "b.csv"));
    fs::remove_all(dir);
}

TEST_CASE("extreme rho fires the safeguard every iteration") {
    const Trained& t = small_bc();
    AttackConfig c = pgd(0.1, 0.03, 6);
    c.beta_policy = BetaPolicy::njs;
    c.njs_beta = 1.0;
    c.rho = 0.75 - 1e-9;
    c.random_init = false;
    for (std::size_t i = 0; i < t.test.size(); ++i) {
        if (t.net.predict_one(t.test.sample(i)) != t.test.labels[i]) continue;
        const AttackResult r = perturb(t.net, t.test.sample(i), t.test.labels[i], c, 1);
        // Every iterate still classified correctly has label mass >= 1/4.
        std::size_t correct = 1;
        for (std::size_t k = 0; k + 1 < r.trace.predictions.size(); ++k) {
            if (r.trace.predictions[k] != t.test.labels[i]) break;
            ++correct;
        }
        CHECK(r.trace.safeguard_fires >= correct);
        CHECK(r.trace.predictions.size() == 6);
    }
}

TEST_CASE("a singleton rho grid reproduces the default attack") {
    const Trained& t = small_bc();
    AttackConfig c = pgd(0.1, 0.03, 5);
    c.beta_policy = BetaPolicy::njs;
    c.calibration_samples = 20;
    const RhoAblation ab = rho_ablation(t.net, t.test, c, {0.01}, 1);
    const AttackReport r = evaluate_attack(t.net, t.test, c, 1);
    REQUIRE(ab.rows.size() == 1);
    CHECK(ab.rows[0].adversarial_accuracy == r.adversarial_accuracy);
    CHECK(ab.rows[0].accuracy_among_correct == r.accuracy_among_correct);
    CHECK(ab.spread == 0.0);
    CHECK_THROWS_AS(rho_ablation(t.net, t.test, c, {0.0}, 1), InvalidArgument);
    CHECK_THROWS_AS(rho_ablation(t.net, t.test, c, {0.9}, 1), InvalidArgument);
}

TEST_CASE("scaling the loss keeps the sign step") {
    const Trained& t = small_bc();
    const Tensor x0 = t.test.sample(0);
    const int label = t.test.labels[0];
    auto sign_grad = [&](double c) {
        Tape tape;
        const Var x = tape.leaf(x0.reshaped({1, 16}));
        const Var l = ops::scale(ops::softmax_cross_entropy(t.net.forward(tape, x), std::vector<int>{label},
                                                            ops::HeadPrecision::double_),
                                 c);
        const Tensor g = grad(l, std::vector<Var>{x})[0];
        std::vector<double> s(g.size());
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = g[i] > 0 ? 1.0 : (g[i] < 0 ? -1.0 : 0.0);
        return Tensor::vector(s);
    };
    CHECK(bitwise_equal(sign_grad(1.0), sign_grad(37.0)));
}

}  // TEST_SUITE

TEST_SUITE("diagnostics") {

TEST_CASE("sign norm") {
    CHECK(sign_norm(Tensor::zeros({64})) == 0.0);
    CHECK(sign_norm(Tensor::filled({64}, -0.3)) == 8.0);
    CHECK(sign_norm(Tensor::vector({0, 1, 0, -2})) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("self-transfer coincides with white-box") {
    const Trained& t = small_bc();
    MaskingOptions o;
    o.iterations = {1, 5};
    o.radius_factors = {1.0};
    o.policies = {BetaPolicy::none};
    o.threads = 1;
    const MaskingReport r = masking_diagnostics(t.net, t.net, t.test, pgd(0.1, 0.03, 5), o);
    CHECK(r.white_box_accuracy == r.black_box_accuracy);
    CHECK_FALSE(r.masking);
    CHECK(r.iteration_sweep.size() == 2);
    CHECK(r.radius_sweep.size() == 2);
}

TEST_CASE("signal table needs enough correct samples") {
    const Trained& t = small_bc();
    CHECK_THROWS_AS(signal_table({{"q", &t.net}}, t.test, t.test.size() + 1), InvalidArgument);
    const auto rows = signal_table({{"q", &t.net}}, t.test, 10);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].mode == "orig");
    CHECK(rows[0].beta_mean == 1.0);
    CHECK(rows[1].jsv_mean == doctest::Approx(1.0).epsilon(1e-12));
}

}  // TEST_SUITE
