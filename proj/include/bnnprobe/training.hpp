#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bnnprobe/attack.hpp"
#include "bnnprobe/dataset.hpp"
#include "bnnprobe/network.hpp"

namespace bnnprobe {

struct TrainConfig {
    double learning_rate = 0.05;
    int epochs = 50;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    // Replace each batch by inner-attack examples before the step.
    std::optional<AttackConfig> adversarial;

    void validate() const;
};

struct EpochRecord {
    int epoch;
    double mean_loss;
    double train_accuracy;
};

struct TrainTrace {
    std::vector<EpochRecord> epochs;
};

/// One SGD step on the auxiliary weights with the gradient taken at the
/// effective (projected) weights. Returns the batch loss before the step.
/// Throws DivergenceError on a non-finite loss or update.
double train_step(Network& net, const Tensor& batch, const std::vector<int>& labels,
                  double learning_rate);

/// Deterministic per seed: the batch order comes from a seeded shuffle per
/// epoch and inner attacks use seeds derived from (seed, epoch, sample).
TrainTrace train(Network& net, const Dataset& data, const TrainConfig& cfg, unsigned threads = 0);

double accuracy(const Network& net, const Dataset& data);

}  // namespace bnnprobe
