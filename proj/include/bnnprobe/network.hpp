#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bnnprobe/autodiff.hpp"
#include "bnnprobe/tensor.hpp"

namespace bnnprobe {

enum class Activation { relu, tanh, sign, none };
enum class QuantMode { float_ref, weights_binary, weights_activations_binary };

std::string to_string(Activation a);
std::string to_string(QuantMode m);
Activation parse_activation(const std::string& name);
QuantMode parse_quant_mode(const std::string& name);

struct LayerSpec {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Activation activation = Activation::none;
    bool quantize_weights = false;
    // Sign activation with the clipped straight-through gradient.
    bool quantize_activation = false;
};

struct LayerParams {
    Tensor weight;  // [out x in], auxiliary (float) values
    Tensor bias;    // [out], never binarized
};

/// Elementwise sign into {-1, +1}; sign(0) = +1 (also for -0).
Tensor project_binary(const Tensor& w);

struct ForwardCache {
    std::vector<Tensor> pre;   // h^l, each [1 x out]
    std::vector<Tensor> post;  // a^l, each [1 x out]; post.back() are the logits
    Tensor logits() const { return post.back().reshaped({post.back().size()}); }
};

/// Dense feed-forward stack.
///
/// The network owns auxiliary float weights; quantized layers use
/// project_binary(weight) as the effective weight in every forward pass.
/// A Network is immutable during inference and safe to share across threads.
class Network {
public:
    Network(std::vector<LayerSpec> layers, std::vector<LayerParams> params, QuantMode mode);

    /// widths = {N, hidden..., d}. Hidden layers use `hidden`, or sign for
    /// weights_activations_binary. Glorot-uniform weights, zero biases.
    static Network mlp(const std::vector<std::size_t>& widths, Activation hidden, QuantMode mode,
                       bool binarize_last, std::uint64_t seed);

    const std::vector<LayerSpec>& layers() const { return layers_; }
    const std::vector<LayerParams>& params() const { return params_; }
    QuantMode mode() const { return mode_; }
    std::size_t input_dim() const { return layers_.front().in_dim; }
    std::size_t output_dim() const { return layers_.back().out_dim; }

    /// Replace auxiliary parameters; shapes must match.
    void set_params(std::vector<LayerParams> params);
    /// Weights as used by the forward pass.
    std::vector<Tensor> effective_weights() const;

    /// Single sample x [N] with cached pre/post activations.
    ForwardCache forward(const Tensor& x) const;
    /// Batch logits for x [m x N].
    Tensor logits(const Tensor& batch) const;
    std::vector<int> predict(const Tensor& batch) const;
    int predict_one(const Tensor& x) const;

    /// Taped forward on x [m x N]. With `param_leaves` (weight, bias pairs in
    /// layer order) gradients flow to the auxiliary weights through the
    /// straight-through estimator; otherwise parameters are constants.
    Var forward(Tape& tape, const Var& x, const std::vector<Var>* param_leaves = nullptr) const;

    /// True when the logits are piecewise linear in the input, so their
    /// second input derivatives vanish almost everywhere.
    bool piecewise_linear() const;

private:
    Tensor batch_forward(const Tensor& batch, const std::vector<Tensor>& weights,
                         ForwardCache* cache) const;

    std::vector<LayerSpec> layers_;
    std::vector<LayerParams> params_;
    QuantMode mode_;
};

}  // namespace bnnprobe
