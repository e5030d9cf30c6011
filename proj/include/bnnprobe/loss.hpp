#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "bnnprobe/network.hpp"
#include "bnnprobe/tensor.hpp"

namespace bnnprobe {

/// Row softmax of a 1-D logit vector, max-subtracted.
Tensor softmax(const Tensor& logits);

struct SoftmaxCe {
    double loss;
    Tensor p;
};

/// -log softmax(logits)_k. Accurate when p_k is close to 1.
SoftmaxCe softmax_ce(const Tensor& logits, int label);

enum class BetaSource { unit, njs, prop1, hns };
std::string to_string(BetaSource s);

struct TemperatureScale {
    double beta = 1.0;
    BetaSource source = BetaSource::unit;
    std::optional<double> rho;
    std::optional<double> gamma;
    // Set when a degenerate case forced a fallback value.
    bool fallback = false;

    /// Throws InvalidArgument unless beta is finite and positive.
    void validate() const;
};

/// Softmax cross-entropy of beta * f(x) for the label.
double scaled_loss(const Network& net, const Tensor& x, int label, const TemperatureScale& ts);

struct ErrorSignal {
    Tensor psi;
    double norm2;
};

/// psi = p - y. The label entry is evaluated as -(sum of the others) so psi
/// sums to zero up to rounding even when p_k rounds to 1.
ErrorSignal error_signal(const Tensor& p, int label);

enum class GapMode { top_bottom, top_runner_up };

/// Largest logit minus the smallest (top_bottom) or minus the second largest.
double logit_gap(const Tensor& logits, GapMode mode);

/// -log(rho / ((d-1)(1-rho))) / gamma. Every beta below the bound keeps
/// 1 - softmax(beta a)_1 > rho for logits whose top-bottom gap is gamma.
double prop1_beta_bound(std::size_t d, double rho, double gamma);

}  // namespace bnnprobe
