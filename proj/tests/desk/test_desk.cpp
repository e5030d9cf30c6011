// Desk-scale behavior of the digits model pair. Slower than the unit suites:
// both models are trained once per process.

#include <cmath>
#include <cstdio>
#include <vector>

#include "bnnprobe/attack.hpp"
#include "bnnprobe/autodiff.hpp"
#include "bnnprobe/diagnostics.hpp"
#include "bnnprobe/jacobian.hpp"
#include "desk.hpp"
#include "doctest.h"

using namespace bnnprobe;

namespace {

const desk::Models& models() {
    static const desk::Models m = desk::build(DIGITS_CSV);
    return m;
}

std::vector<Tensor> correct_samples(const Network& net, const Dataset& data, std::size_t m) {
    std::vector<Tensor> out;
    for (std::size_t i = 0; i < data.size() && out.size() < m; ++i)
        if (net.predict_one(data.sample(i)) == data.labels[i]) out.push_back(data.sample(i));
    return out;
}

Tensor input_gradient(const Network& net, const Tensor& x, int label, ops::HeadPrecision head) {
    Tape tape;
    const Var xv = tape.leaf(x.reshaped({1, x.size()}));
    const Var l = ops::softmax_cross_entropy(net.forward(tape, xv), std::vector<int>{label}, head);
    return grad(l, std::vector<Var>{xv})[0];
}

}  // namespace

TEST_CASE("binarized net has larger Jacobian singular values than its float twin") {
    const auto& m = models();
    const double ref = jsv_stats(m.ref, correct_samples(m.ref, m.test, 100)).mean;
    const double bc = jsv_stats(m.bc, correct_samples(m.bc, m.test, 100)).mean;
    MESSAGE("mean JSV float " << ref << ", binarized " << bc);
    CHECK(bc > ref);
}

TEST_CASE("temperature scaling enlarges the error signal on the binarized net") {
    const auto& m = models();
    const auto rows = signal_table({{"bc", &m.bc}}, m.test, 100);
    REQUIRE(rows.size() == 3);
    MESSAGE("psi norm orig " << rows[0].psi_norm << ", njs " << rows[1].psi_norm << ", hns " << rows[2].psi_norm);
    CHECK(rows[1].psi_norm > rows[0].psi_norm);
    CHECK(rows[2].psi_norm > rows[0].psi_norm);
}

TEST_CASE("saturated samples: plain PGD is stuck, PGD++ flips them") {
    const auto& m = models();
    std::vector<std::size_t> saturated;
    for (std::size_t i = 0; i < m.test.size(); ++i) {
        if (m.bc.predict_one(m.test.sample(i)) != m.test.labels[i]) continue;
        const Tensor g = input_gradient(m.bc, m.test.sample(i), m.test.labels[i], ops::HeadPrecision::single);
        if (linf_norm(g) == 0.0) saturated.push_back(i);
    }
    MESSAGE(saturated.size() << " correctly classified samples have a zero gradient");
    REQUIRE(saturated.size() >= 10);

    AttackConfig plain = desk::pgd();
    plain.random_init = false;
    for (std::size_t i : saturated) {
        const AttackResult r = perturb(m.bc, m.test.sample(i), m.test.labels[i], plain, 1);
        CHECK(bitwise_equal(r.x_adv, m.test.sample(i)));
    }
    for (BetaPolicy pol : {BetaPolicy::njs, BetaPolicy::hns}) {
        AttackConfig c = desk::pgd(Norm::linf, pol);
        c.njs_beta = calibrate_njs(m.bc, m.test, 100);
        std::size_t flipped = 0;
        for (std::size_t i : saturated) {
            const AttackResult r = perturb(m.bc, m.test.sample(i), m.test.labels[i], c, derive_seed(c.seed, i));
            flipped += r.prediction != m.test.labels[i];
        }
        const double rate = static_cast<double>(flipped) / static_cast<double>(saturated.size());
        MESSAGE(to_string(pol) << " flips " << rate);
        CHECK(rate >= 0.95);
    }
}

TEST_CASE("masking diagnostics on the desk pair") {
    const auto& m = models();
    MaskingOptions o;
    o.iterations = {1, 5, 10, 20, 50, 100};
    o.radius_factors = {0.25, 1.0, 4.0};
    const MaskingReport r = masking_diagnostics(m.ref, m.bc, m.test, desk::pgd(), o);

    auto sweep = [&](const std::string& policy) {
        std::vector<double> acc;
        for (const SweepRow& row : r.iteration_sweep)
            if (row.policy == policy) acc.push_back(row.adversarial_accuracy);
        return acc;
    };
    const auto plain = sweep("none");
    MESSAGE("plain PGD over T: " << plain.front() << " ... " << plain.back());
    // Plain PGD plateaus above zero on the binarized net.
    CHECK(plain.back() > 0.05);
    for (const std::string policy : {"njs", "hns"}) {
        const auto acc = sweep(policy);
        REQUIRE(acc.size() == 6);
        for (std::size_t k = 1; k < acc.size(); ++k) CHECK(acc[k] <= acc[k - 1]);
        CHECK(acc.back() <= 0.02);
    }

    // The float net's accuracy reaches zero at the largest radius.
    for (const SweepRow& row : r.radius_sweep)
        if (row.model == "float" && row.value == r.radius_sweep.back().value) CHECK(row.adversarial_accuracy <= 0.01);
    MESSAGE("white-box " << r.white_box_accuracy << ", transfer " << r.black_box_accuracy);
    CHECK(r.masking == (r.white_box_accuracy > r.black_box_accuracy));
}
