#include "bnnprobe/loss.hpp"

#include <algorithm>
#include <cmath>

#include "bnnprobe/error.hpp"

namespace bnnprobe {

Tensor softmax(const Tensor& logits) {
    const std::span<const double> z = logits.data();
    const double mx = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double total = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
        p[j] = std::exp(z[j] - mx);
        total += p[j];
    }
    for (double& v : p) v /= total;
    return Tensor::vector(std::move(p));
}

SoftmaxCe softmax_ce(const Tensor& logits, int label) {
    const std::size_t d = logits.size();
    if (d < 2) throw InvalidArgument("softmax_ce needs at least two logits");
    if (label < 0 || static_cast<std::size_t>(label) >= d) throw InvalidArgument("label out of range");
    Tape tape;
    const std::vector<int> labels{label};
    Var z = tape.constant(logits.reshaped({1, d}));
    const double loss = ops::softmax_cross_entropy(z, labels).value().item();
    return {loss, softmax(logits)};
}

std::string to_string(BetaSource s) {
    switch (s) {
        case BetaSource::unit: return "unit";
        case BetaSource::njs: return "njs";
        case BetaSource::prop1: return "prop1";
        case BetaSource::hns: return "hns";
    }
    return "?";
}

void TemperatureScale::validate() const {
    if (!(std::isfinite(beta) && beta > 0.0)) {
        throw InvalidArgument("temperature beta must be finite and positive");
    }
}

double scaled_loss(const Network& net, const Tensor& x, int label, const TemperatureScale& ts) {
    ts.validate();
    return softmax_ce(scale(net.forward(x).logits(), ts.beta), label).loss;
}

ErrorSignal error_signal(const Tensor& p, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= p.size()) {
        throw InvalidArgument("label out of range");
    }
    std::vector<double> psi = p.to_vector();
    double rest = 0.0;
    for (std::size_t j = 0; j < psi.size(); ++j)
        if (j != static_cast<std::size_t>(label)) rest += psi[j];
    psi[label] = -rest;
    Tensor t = Tensor::vector(std::move(psi));
    const double n = l2_norm(t);
    return {std::move(t), n};
}

double logit_gap(const Tensor& logits, GapMode mode) {
    if (logits.size() < 2) throw InvalidArgument("logit gap needs at least two logits");
    std::vector<double> z = logits.to_vector();
    std::sort(z.begin(), z.end(), std::greater<>());
    return z.front() - (mode == GapMode::top_bottom ? z.back() : z[1]);
}

double prop1_beta_bound(std::size_t d, double rho, double gamma) {
    if (d < 2) throw InvalidArgument("need at least two classes");
    const double dm1 = static_cast<double>(d - 1);
    if (!(rho > 0.0 && rho < dm1 / static_cast<double>(d))) {
        throw InvalidArgument("rho must lie in (0, (d-1)/d)");
    }
    if (!(gamma > 0.0)) throw InvalidArgument("logit gap must be positive (all logits equal)");
    // log1p keeps precision for rho near 0.
    return (std::log(dm1) + std::log1p(-rho) - std::log(rho)) / gamma;
}

}  // namespace bnnprobe
