#include <cmath>
#include <vector>

#include "bnnprobe/autodiff.hpp"
#include "bnnprobe/error.hpp"
#include "bnnprobe/network.hpp"
#include "bnnprobe/rng.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace bnnprobe;

TEST_SUITE("autodiff") {

TEST_CASE("gradient of a sum is ones") {
    Tape tape;
    const Var x = tape.leaf(Tensor::vector({1, 2, 3, 4, 5}));
    const auto g = grad(ops::sum(x), std::vector<Var>{x});
    for (double v : g[0].data()) CHECK(v == 1.0);
}

TEST_CASE("gradient of x^T x") {
    Tape tape;
    const Var x = tape.leaf(Tensor::vector({1, -2}));
    const auto g = grad(ops::sum(ops::mul(x, x)), std::vector<Var>{x});
    CHECK(g[0][0] == 2.0);
    CHECK(g[0][1] == -4.0);
}

TEST_CASE("leaves off the path get zeros") {
    Tape tape;
    const Var x = tape.leaf(Tensor::vector({1, 2}));
    const Var y = tape.leaf(Tensor::vector({3, 4, 5}));
    const auto g = grad(ops::sum(x), std::vector<Var>{x, y});
    CHECK(g[1].shape() == Shape{3});
    for (double v : g[1].data()) CHECK(v == 0.0);
}

TEST_CASE("root must be scalar") {
    Tape tape;
    const Var x = tape.leaf(Tensor::vector({1, 2}));
    CHECK_THROWS_AS(grad(ops::scale(x, 2.0), std::vector<Var>{x}), ShapeError);
}

TEST_CASE("gradient is linear in the root") {
    Rng rng(4);
    const Tensor x0 = fixtures::random_vector(6, rng);
    auto f = [](const Var& x) { return ops::sum(ops::tanh(ops::mul(x, x))); };
    auto h = [](const Var& x) { return ops::sum(ops::mul(ops::tanh(x), x)); };
    Tape tape;
    const Var x = tape.leaf(x0);
    const std::vector<Var> leaves{x};
    const Tensor gf = grad(f(x), leaves)[0];
    const Tensor gh = grad(h(x), leaves)[0];
    const Tensor gc = grad(ops::add(ops::scale(f(x), 2.5), ops::scale(h(x), -0.75)), leaves)[0];
    for (std::size_t i = 0; i < 6; ++i) CHECK(gc[i] == doctest::Approx(2.5 * gf[i] - 0.75 * gh[i]).epsilon(1e-14));
}

TEST_CASE("tanh MLP loss matches central differences") {
    Rng rng(8);
    const Network net = fixtures::tanh_mlp({5, 7, 6, 3}, 12);
    const int label = 1;
    auto loss = [&](const oracle::Vec& xv) {
        Tape t;
        const Var x = t.constant(Tensor::matrix(1, xv.size(), xv));
        return ops::softmax_cross_entropy(net.forward(t, x), std::vector<int>{label}).value().item();
    };
    for (int trial = 0; trial < 10; ++trial) {
        const oracle::Vec x0 = fixtures::random_vector(5, rng).to_vector();
        Tape t;
        const Var x = t.leaf(Tensor::matrix(1, 5, x0));
        const Var l = ops::softmax_cross_entropy(net.forward(t, x), std::vector<int>{label});
        const Tensor g = grad(l, std::vector<Var>{x})[0];
        CHECK(oracle::rel_err(g.to_vector(), oracle::fd_gradient(loss, x0)) < 1e-6);
    }
}

TEST_CASE("second derivatives through the graph") {
    // f = sum(tanh(x)); d2f/dx2 is diagonal with -2 tanh(x) (1 - tanh(x)^2).
    Tape tape;
    const Tensor x0 = Tensor::vector({0.3, -0.8, 1.2});
    const Var x = tape.leaf(x0);
    const std::vector<Var> leaves{x};
    const Var g = grad_graph(ops::sum(ops::tanh(x)), leaves)[0];
    for (std::size_t i = 0; i < 3; ++i) {
        std::vector<double> e(3, 0.0);
        e[i] = 1.0;
        const Tensor row = vjp(g, Tensor::vector(e), leaves)[0];
        const double t = std::tanh(x0[i]);
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(row[j] == doctest::Approx(i == j ? -2.0 * t * (1.0 - t * t) : 0.0).epsilon(1e-13));
        }
    }
}

TEST_CASE("sign_ste forward and clipped window") {
    Tape tape;
    const Var h = tape.leaf(Tensor::vector({0.4, -2.0}));
    const Var a = ops::sign_ste(h);
    CHECK(a.value()[0] == 1.0);
    CHECK(a.value()[1] == -1.0);
    const Tensor g = vjp(a, Tensor::vector({1, 1}), std::vector<Var>{h})[0];
    CHECK(g[0] == 1.0);
    CHECK(g[1] == 0.0);
}

TEST_CASE("binarize_ste is sign with an identity gradient") {
    Tape tape;
    const Var w = tape.leaf(Tensor::vector({0.0, -0.0, 3.0, -0.2}));
    const Var b = ops::binarize_ste(w);
    const std::vector<double> expect{1, 1, 1, -1};
    for (std::size_t i = 0; i < 4; ++i) CHECK(b.value()[i] == expect[i]);
    const Tensor g = vjp(b, Tensor::vector({1, 2, 3, 4}), std::vector<Var>{w})[0];
    for (std::size_t i = 0; i < 4; ++i) CHECK(g[i] == static_cast<double>(i + 1));
}

TEST_CASE("relu derivative is zero at the kink") {
    Tape tape;
    const Var h = tape.leaf(Tensor::vector({0.0, 1.0, -1.0}));
    const Tensor g = vjp(ops::relu(h), Tensor::vector({1, 1, 1}), std::vector<Var>{h})[0];
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 1.0);
    CHECK(g[2] == 0.0);
}

TEST_CASE("cross-entropy stays finite at large logits") {
    Tape tape;
    const Var z = tape.leaf(Tensor::matrix(1, 3, {1000.0, -1000.0, 0.0}));
    const std::vector<int> y{1};
    const Var l = ops::softmax_cross_entropy(z, y);
    CHECK(l.value().item() == doctest::Approx(2000.0));
    const Tensor g = grad(l, std::vector<Var>{z})[0];
    CHECK(g[0] == doctest::Approx(1.0));
    CHECK(g[1] == doctest::Approx(-1.0));
}

TEST_CASE("single-precision head rounds like float32") {
    Tape tape;
    const Var z = tape.leaf(Tensor::matrix(1, 2, {20.0, 0.0}));
    const std::vector<int> y{0};
    const Tensor gs = ops::error_signal(z, y, ops::HeadPrecision::single).value();
    const Tensor gd = ops::error_signal(z, y, ops::HeadPrecision::double_).value();
    // exp(-20) ~ 2e-9 is below float epsilon next to 1, so p_0 - 1 rounds to 0.
    CHECK(gs[0] == 0.0);
    CHECK(gd[0] == doctest::Approx(-std::exp(-20.0)).epsilon(1e-6));
    CHECK(gd[1] == doctest::Approx(std::exp(-20.0)).epsilon(1e-6));
}

}  // TEST_SUITE
