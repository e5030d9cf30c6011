#pragma once

// Small helpers shared by the unit tests.

#include <cstdint>
#include <vector>

#include "bnnprobe/network.hpp"
#include "bnnprobe/rng.hpp"
#include "bnnprobe/tensor.hpp"
#include "oracles.hpp"

namespace fixtures {

inline oracle::Vec to_vec(const bnnprobe::Tensor& t) { return t.to_vector(); }

inline bnnprobe::Tensor to_tensor(const oracle::Vec& v) { return bnnprobe::Tensor::vector(v); }

inline oracle::Mat to_mat(const bnnprobe::Tensor& t) {
    oracle::Mat m(t.rows(), oracle::Vec(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
    return m;
}

inline bnnprobe::Tensor random_matrix(std::size_t r, std::size_t c, bnnprobe::Rng& rng,
                                      double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(r * c);
    for (double& x : v) x = rng.uniform(lo, hi);
    return bnnprobe::Tensor::matrix(r, c, std::move(v));
}

inline bnnprobe::Tensor random_vector(std::size_t n, bnnprobe::Rng& rng, double lo = -1.0,
                                      double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return bnnprobe::Tensor::vector(std::move(v));
}

/// Straight-line copy of a network's effective weights for the forward oracle.
inline std::vector<oracle::Layer> oracle_layers(const bnnprobe::Network& net) {
    std::vector<oracle::Layer> out;
    const auto w = net.effective_weights();
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const auto& spec = net.layers()[l];
        int act = 0;
        switch (spec.activation) {
            case bnnprobe::Activation::tanh: act = 1; break;
            case bnnprobe::Activation::relu: act = 2; break;
            case bnnprobe::Activation::sign: act = 3; break;
            case bnnprobe::Activation::none: act = 0; break;
        }
        out.push_back({to_mat(w[l]), net.params()[l].bias.to_vector(), act});
    }
    return out;
}

/// One linear layer with the given weight and bias.
inline bnnprobe::Network linear_net(const bnnprobe::Tensor& w, const bnnprobe::Tensor& b,
                                    bool binarize = false) {
    bnnprobe::LayerSpec s{w.cols(), w.rows(), bnnprobe::Activation::none, binarize, false};
    return bnnprobe::Network({s}, {{w, b}},
                             binarize ? bnnprobe::QuantMode::weights_binary : bnnprobe::QuantMode::float_ref);
}

inline bnnprobe::Network tanh_mlp(const std::vector<std::size_t>& widths, std::uint64_t seed) {
    return bnnprobe::Network::mlp(widths, bnnprobe::Activation::tanh, bnnprobe::QuantMode::float_ref, false,
                                  seed);
}

}  // namespace fixtures
