#include "bnnprobe/network.hpp"

#include <cmath>

#include "bnnprobe/error.hpp"
#include "bnnprobe/rng.hpp"

namespace bnnprobe {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::sign: return "sign";
        case Activation::none: return "none";
    }
    return "?";
}

std::string to_string(QuantMode m) {
    switch (m) {
        case QuantMode::float_ref: return "float";
        case QuantMode::weights_binary: return "weights_binary";
        case QuantMode::weights_activations_binary: return "weights_activations_binary";
    }
    return "?";
}

Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "sign") return Activation::sign;
    if (name == "none") return Activation::none;
    throw ConfigError("unknown activation '" + name + "'");
}

QuantMode parse_quant_mode(const std::string& name) {
    if (name == "float") return QuantMode::float_ref;
    if (name == "weights_binary" || name == "bc") return QuantMode::weights_binary;
    if (name == "weights_activations_binary" || name == "waq") {
        return QuantMode::weights_activations_binary;
    }
    throw ConfigError("unknown quantization mode '" + name + "'");
}

Tensor project_binary(const Tensor& w) {
    std::vector<double> out(w.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = w[i] >= 0.0 ? 1.0 : -1.0;
    return Tensor(w.shape(), std::move(out));
}

Network::Network(std::vector<LayerSpec> layers, std::vector<LayerParams> params, QuantMode mode)
    : layers_(std::move(layers)), mode_(mode) {
    if (layers_.empty()) throw InvalidArgument("network needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const LayerSpec& s = layers_[l];
        if (s.in_dim == 0 || s.out_dim == 0) throw ShapeError("layer dimensions must be positive");
        if (l + 1 < layers_.size() && s.out_dim != layers_[l + 1].in_dim) {
            throw ShapeError("layer " + std::to_string(l) + " output does not feed layer " +
                             std::to_string(l + 1));
        }
        if (s.quantize_activation != (s.activation == Activation::sign)) {
            throw InvalidArgument("sign activation and activation quantization go together");
        }
    }
    if (layers_.back().activation != Activation::none) {
        throw InvalidArgument("final layer must produce logits (activation none)");
    }
    if (layers_.back().out_dim < 2) throw InvalidArgument("need at least two classes");
    set_params(std::move(params));
}

Network Network::mlp(const std::vector<std::size_t>& widths, Activation hidden, QuantMode mode,
                     bool binarize_last, std::uint64_t seed) {
    if (widths.size() < 2) throw InvalidArgument("mlp needs input and output widths");
    if (mode == QuantMode::weights_activations_binary) hidden = Activation::sign;
    if (hidden == Activation::sign && mode != QuantMode::weights_activations_binary) {
        throw InvalidArgument("sign activations require weights_activations_binary mode");
    }
    Rng rng(seed);
    std::vector<LayerSpec> layers;
    std::vector<LayerParams> params;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const bool last = l + 2 == widths.size();
        LayerSpec s;
        s.in_dim = widths[l];
        s.out_dim = widths[l + 1];
        s.activation = last ? Activation::none : hidden;
        s.quantize_activation = s.activation == Activation::sign;
        s.quantize_weights = mode != QuantMode::float_ref && (!last || binarize_last);
        layers.push_back(s);

        const double limit = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
        std::vector<double> w(s.in_dim * s.out_dim);
        for (double& v : w) v = rng.uniform(-limit, limit);
        params.push_back({Tensor::matrix(s.out_dim, s.in_dim, std::move(w)),
                          Tensor::zeros({s.out_dim})});
    }
    return Network(std::move(layers), std::move(params), mode);
}

void Network::set_params(std::vector<LayerParams> params) {
    if (params.size() != layers_.size()) throw ShapeError("parameter count does not match layers");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const LayerSpec& s = layers_[l];
        if (params[l].weight.shape() != Shape{s.out_dim, s.in_dim} ||
            params[l].bias.shape() != Shape{s.out_dim}) {
            throw ShapeError("parameter shapes of layer " + std::to_string(l) + " do not match spec");
        }
    }
    params_ = std::move(params);
}

std::vector<Tensor> Network::effective_weights() const {
    std::vector<Tensor> w;
    w.reserve(params_.size());
    for (std::size_t l = 0; l < params_.size(); ++l) {
        w.push_back(layers_[l].quantize_weights ? project_binary(params_[l].weight)
                                                : params_[l].weight);
    }
    return w;
}

namespace {

double activate(Activation a, double h) {
    switch (a) {
        case Activation::relu: return h > 0.0 ? h : 0.0;
        case Activation::tanh: return std::tanh(h);
        case Activation::sign: return h >= 0.0 ? 1.0 : -1.0;
        case Activation::none: return h;
    }
    return h;
}

}  // namespace

Tensor Network::batch_forward(const Tensor& batch, const std::vector<Tensor>& weights,
                              ForwardCache* cache) const {
    if (batch.rank() != 2 || batch.cols() != input_dim()) {
        throw ShapeError("input " + shape_string(batch.shape()) + " does not match network input " +
                         std::to_string(input_dim()));
    }
    Tensor a = batch;
    const std::size_t m = batch.rows();
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        // Same operation order as the taped path so both are bitwise equal.
        Tensor h = matmul(a, transpose(weights[l]));
        const std::size_t out = layers_[l].out_dim;
        std::vector<double> hv(h.begin(), h.end());
        std::vector<double> av(hv.size());
        for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t j = 0; j < out; ++j) {
                hv[r * out + j] += params_[l].bias[j];
                av[r * out + j] = activate(layers_[l].activation, hv[r * out + j]);
            }
        }
        h = Tensor::matrix(m, out, std::move(hv));
        a = Tensor::matrix(m, out, std::move(av));
        if (cache) {
            cache->pre.push_back(h);
            cache->post.push_back(a);
        }
    }
    return a;
}

ForwardCache Network::forward(const Tensor& x) const {
    ForwardCache cache;
    batch_forward(x.reshaped({1, x.size()}), effective_weights(), &cache);
    return cache;
}

Tensor Network::logits(const Tensor& batch) const {
    return batch_forward(batch, effective_weights(), nullptr);
}

std::vector<int> Network::predict(const Tensor& batch) const {
    const Tensor z = logits(batch);
    const std::size_t m = z.rows(), d = z.cols();
    std::vector<int> out(m);
    for (std::size_t r = 0; r < m; ++r) {
        out[r] = static_cast<int>(argmax(std::span<const double>(z.begin() + r * d, d)));
    }
    return out;
}

int Network::predict_one(const Tensor& x) const {
    return predict(x.reshaped({1, x.size()})).front();
}

Var Network::forward(Tape& tape, const Var& x, const std::vector<Var>* param_leaves) const {
    if (x.value().rank() != 2 || x.value().cols() != input_dim()) {
        throw ShapeError("input " + shape_string(x.shape()) + " does not match network input " +
                         std::to_string(input_dim()));
    }
    if (param_leaves && param_leaves->size() != 2 * layers_.size()) {
        throw InvalidArgument("expected a weight and a bias leaf per layer");
    }
    Var a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const LayerSpec& s = layers_[l];
        Var w, b;
        if (param_leaves) {
            w = (*param_leaves)[2 * l];
            b = (*param_leaves)[2 * l + 1];
            if (s.quantize_weights) w = ops::binarize_ste(w);
        } else {
            w = tape.constant(s.quantize_weights ? project_binary(params_[l].weight)
                                                 : params_[l].weight);
            b = tape.constant(params_[l].bias);
        }
        Var h = ops::affine(a, w, b);
        switch (s.activation) {
            case Activation::relu: a = ops::relu(h); break;
            case Activation::tanh: a = ops::tanh(h); break;
            case Activation::sign: a = ops::sign_ste(h); break;
            case Activation::none: a = h; break;
        }
    }
    return a;
}

bool Network::piecewise_linear() const {
    for (const LayerSpec& s : layers_) {
        if (s.activation == Activation::tanh) return false;
    }
    return true;
}

}  // namespace bnnprobe
