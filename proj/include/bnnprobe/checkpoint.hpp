#pragma once

#include <cstdint>
#include <filesystem>

#include "bnnprobe/network.hpp"

namespace bnnprobe {

inline constexpr int checkpoint_version = 1;

/// JSON document: version, quant mode, layer specs, row-major weights with
/// round-trip precision, and the training seed.
void save_checkpoint(const Network& net, std::uint64_t seed, const std::filesystem::path& path);

struct Checkpoint {
    Network network;
    std::uint64_t seed;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bnnprobe
