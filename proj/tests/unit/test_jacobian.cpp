#include <cmath>
#include <vector>

#include "bnnprobe/autodiff.hpp"
#include "bnnprobe/error.hpp"
#include "bnnprobe/jacobian.hpp"
#include "bnnprobe/loss.hpp"
#include "bnnprobe/rng.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace bnnprobe;

namespace {

oracle::Mat fd_logit_jacobian(const Network& net, const Tensor& x) {
    return oracle::fd_jacobian([&](const oracle::Vec& v) { return net.forward(Tensor::vector(v)).logits().to_vector(); },
                               x.to_vector());
}

}  // namespace

TEST_SUITE("jacobian") {

TEST_CASE("linear layer Jacobian is the weight") {
    Rng rng(1);
    const Tensor w = fixtures::random_matrix(3, 5, rng);
    const Network net = fixtures::linear_net(w, Tensor::zeros({3}));
    CHECK(bitwise_equal(input_output_jacobian(net, fixtures::random_vector(5, rng)), w));
}

TEST_CASE("tanh layer against central differences") {
    const Network net = fixtures::tanh_mlp({5, 4, 3}, 2);
    Rng rng(2);
    for (int t = 0; t < 5; ++t) {
        const Tensor x = fixtures::random_vector(5, rng);
        const Tensor j = input_output_jacobian(net, x);
        CHECK(oracle::rel_err(j.to_vector(), oracle::flatten(fd_logit_jacobian(net, x))) < 1e-6);
    }
}

TEST_CASE("ReLU net away from kinks") {
    const Network net = Network::mlp({6, 10, 10, 4}, Activation::relu, QuantMode::float_ref, true, 3);
    Rng rng(3);
    int checked = 0;
    while (checked < 5) {
        const Tensor x = fixtures::random_vector(6, rng);
        const ForwardCache c = net.forward(x);
        double closest = INFINITY;
        for (std::size_t l = 0; l + 1 < c.pre.size(); ++l)
            for (double h : c.pre[l].data()) closest = std::min(closest, std::abs(h));
        if (closest < 1e-3) continue;  // finite differences would cross a kink
        const Tensor j = input_output_jacobian(net, x);
        CHECK(oracle::rel_err(j.to_vector(), oracle::flatten(fd_logit_jacobian(net, x))) < 1e-8);
        ++checked;
    }
}

TEST_CASE("identity map statistics") {
    const Network net = fixtures::linear_net(Tensor::identity(4), Tensor::zeros({4}));
    Rng rng(4);
    std::vector<Tensor> xs;
    for (int i = 0; i < 6; ++i) xs.push_back(fixtures::random_vector(4, rng));
    const JsvReport r = jsv_stats(net, xs);
    CHECK(r.samples == 6);
    CHECK(r.mean == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.stddev < 1e-14);
    CHECK(njs_beta(net, xs).beta == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("scaling doubles the mean") {
    const Network net = fixtures::tanh_mlp({5, 6, 3}, 5);
    Rng rng(5);
    std::vector<Tensor> xs;
    for (int i = 0; i < 4; ++i) xs.push_back(fixtures::random_vector(5, rng));
    TemperatureScale one, two;
    two.beta = 2.0;
    const double m1 = jsv_stats(net, xs, one).mean;
    CHECK(jsv_stats(net, xs, two).mean == doctest::Approx(2.0 * m1).epsilon(1e-14));
}

TEST_CASE("beta from singular values {2, 0.5}") {
    const Tensor j = Tensor::matrix({{2, 0, 0}, {0, 0.5, 0}});
    const TemperatureScale ts = njs_beta_from_jacobians({j});
    CHECK(ts.beta == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(ts.source == BetaSource::njs);
}

TEST_CASE("calibrated beta gives unit mean on the calibration set") {
    const Network net = Network::mlp({8, 12, 12, 4}, Activation::relu, QuantMode::weights_binary, true, 6);
    Rng rng(6);
    std::vector<Tensor> xs;
    for (int i = 0; i < 20; ++i) xs.push_back(fixtures::random_vector(8, rng, 0.0, 1.0));
    const TemperatureScale ts = njs_beta(net, xs);
    CHECK(std::abs(jsv_stats(net, xs, ts).mean - 1.0) < 1e-12);
}

TEST_CASE("beta is scale-equivariant") {
    Rng rng(7);
    const Tensor w = fixtures::random_matrix(3, 4, rng);
    const Network a = fixtures::linear_net(w, Tensor::zeros({3}));
    const Network b = fixtures::linear_net(scale(w, 5.0), Tensor::zeros({3}));
    std::vector<Tensor> xs{fixtures::random_vector(4, rng)};
    CHECK(njs_beta(b, xs).beta == doctest::Approx(njs_beta(a, xs).beta / 5.0).epsilon(1e-13));
}

TEST_CASE("degenerate inputs") {
    const Network zero = fixtures::linear_net(Tensor::zeros({2, 3}), Tensor::zeros({2}));
    std::vector<Tensor> xs{Tensor::vector({1, 2, 3})};
    CHECK_THROWS_AS(njs_beta(zero, xs), InvalidArgument);
    CHECK_THROWS_AS(jsv_stats(zero, {}), InvalidArgument);
}

TEST_CASE("gradient factorizes as psi times beta J") {
    const Network net = fixtures::tanh_mlp({5, 6, 4}, 8);
    Rng rng(8);
    for (int t = 0; t < 10; ++t) {
        const Tensor x = fixtures::random_vector(5, rng);
        const int label = static_cast<int>(rng.below(4));
        const double beta = std::exp(rng.uniform(-3.0, 3.0));
        const Tensor j = input_output_jacobian(net, x);
        const Tensor p = softmax(scale(net.forward(x).logits(), beta));
        const Tensor psi = error_signal(p, label).psi;
        const Tensor expect = scale(matmul(psi.reshaped({1, 4}), j), beta);

        Tape tape;
        const Var xv = tape.leaf(x.reshaped({1, 5}));
        const Var loss = ops::softmax_cross_entropy(ops::scale(net.forward(tape, xv), beta), std::vector<int>{label});
        const Tensor g = grad(loss, std::vector<Var>{xv})[0];
        CHECK(max_abs_diff(g, expect) < 1e-10);
    }
}

TEST_CASE("held-out band warning") {
    JsvReport r = jsv_from_jacobians({Tensor::matrix({{3, 0}, {0, 3}})});
    CHECK_FALSE(check_jsv_band(r));
    CHECK(r.warnings.size() == 1);
    JsvReport ok = jsv_from_jacobians({Tensor::identity(2)});
    CHECK(check_jsv_band(ok));
    CHECK(ok.warnings.empty());
}

}  // TEST_SUITE
