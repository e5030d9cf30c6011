#pragma once

// The desk model pair on the digits preset: a float reference and its
// weights-binarized twin, 64-128-128-10 ReLU.

#include <cmath>
#include <string>

#include "bnnprobe/attack.hpp"
#include "bnnprobe/dataset.hpp"
#include "bnnprobe/network.hpp"
#include "bnnprobe/training.hpp"

namespace desk {

inline constexpr std::uint64_t split_seed = 7;
inline constexpr std::uint64_t init_seed = 1;
inline constexpr std::uint64_t train_seed = 3;
inline constexpr std::uint64_t attack_seed = 11;

struct Models {
    bnnprobe::Dataset train;
    bnnprobe::Dataset test;
    bnnprobe::Network ref;
    bnnprobe::Network bc;
};

inline bnnprobe::Network train_model(const bnnprobe::Dataset& data, bnnprobe::QuantMode mode, double lr) {
    using namespace bnnprobe;
    Network net = Network::mlp({64, 128, 128, 10}, Activation::relu, mode, true, init_seed);
    TrainConfig cfg;
    cfg.learning_rate = lr;
    cfg.epochs = 50;
    cfg.batch_size = 32;
    cfg.seed = train_seed;
    train(net, data, cfg, 1);
    return net;
}

inline Models build(const std::string& digits_csv) {
    using namespace bnnprobe;
    auto [tr, te] = split(load_csv(digits_csv, 10), 0.75, split_seed);
    Network ref = train_model(tr, QuantMode::float_ref, 0.05);
    Network bc = train_model(tr, QuantMode::weights_binary, 0.003);
    return Models{std::move(tr), std::move(te), std::move(ref), std::move(bc)};
}

/// PGD at the 8/255 and 2/255 equivalents for 64 features, T = 20, in [0, 1].
inline bnnprobe::AttackConfig pgd(bnnprobe::Norm norm = bnnprobe::Norm::linf,
                                  bnnprobe::BetaPolicy policy = bnnprobe::BetaPolicy::none) {
    using namespace bnnprobe;
    AttackConfig c;
    c.norm = norm;
    const auto [eps, step] = default_radius(norm, 64);
    c.epsilon = eps;
    c.step = step;
    c.iterations = 20;
    c.beta_policy = policy;
    c.input_box = std::make_pair(0.0, 1.0);
    c.seed = attack_seed;
    return c;
}

inline bnnprobe::AttackConfig fgsm(bnnprobe::BetaPolicy policy = bnnprobe::BetaPolicy::none) {
    using namespace bnnprobe;
    AttackConfig c = AttackConfig::fgsm(Norm::linf, default_radius(Norm::linf, 64).first);
    c.beta_policy = policy;
    c.input_box = std::make_pair(0.0, 1.0);
    c.seed = attack_seed;
    return c;
}

}  // namespace desk
