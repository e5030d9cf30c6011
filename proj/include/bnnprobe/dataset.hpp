#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bnnprobe/tensor.hpp"

namespace bnnprobe {

struct Dataset {
    Tensor features;  // [n x N]
    std::vector<int> labels;
    int num_classes = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t input_dim() const { return features.cols(); }
    Tensor sample(std::size_t i) const { return features.row(i); }
    /// Rows selected by index, in the given order.
    Dataset subset(const std::vector<std::size_t>& idx) const;
};

/// CSV rows: integer label, then N features. A header line is not allowed.
/// `num_classes` is max label + 1 unless given.
Dataset load_csv(const std::filesystem::path& path, int num_classes = 0);
void save_csv(const Dataset& data, const std::filesystem::path& path);

enum class SyntheticKind { blobs, moons };

SyntheticKind parse_synthetic_kind(const std::string& name);

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::blobs;
    std::size_t n = 2000;
    std::size_t dim = 16;
    int classes = 4;
    double noise = 0.1;
    std::uint64_t seed = 0;
};

/// Labels are assigned round-robin, so class counts differ by at most one.
/// Features are affinely mapped into [0, 1] using the generated range.
Dataset gen_synthetic(const SyntheticSpec& spec);

/// Deterministic shuffled split; the first `train_fraction` goes to train.
std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed);

}  // namespace bnnprobe
