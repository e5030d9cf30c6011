#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bnnprobe/attack.hpp"
#include "bnnprobe/config.hpp"
#include "bnnprobe/dataset.hpp"
#include "bnnprobe/diagnostics.hpp"
#include "bnnprobe/network.hpp"
#include "bnnprobe/training.hpp"

namespace bnnprobe {

struct DataSpec {
    bool synthetic = false;
    std::filesystem::path path;
    int num_classes = 0;
    SyntheticSpec synth;
    double train_fraction = 0.75;
    bool input_box = true;
};

struct ModelSpec {
    std::string name;
    std::vector<std::size_t> hidden;
    Activation activation = Activation::relu;
    QuantMode mode = QuantMode::float_ref;
    bool binarize_last = true;
    std::uint64_t init_seed = 0;
    TrainConfig train;
};

struct AttackSpec {
    std::string name;
    std::vector<std::string> models;
    AttackConfig config;
};

struct DiagnosticsSpec {
    std::optional<std::pair<std::string, std::string>> masking;  // float, quantized
    MaskingOptions masking_options;
    std::vector<std::string> signal_models;
    std::size_t signal_samples = 100;
    std::optional<std::string> rho_model;
    std::vector<double> rho_grid = default_rho_grid;
    AttackConfig base;
};

struct ExperimentSpec {
    std::uint64_t seed = 0;
    std::filesystem::path output;
    unsigned threads = 0;
    DataSpec data;
    std::vector<ModelSpec> models;
    std::vector<AttackSpec> attacks;
    DiagnosticsSpec diagnostics;
};

/// Validates the whole document, including that input files exist, so a
/// failing config never produces artifacts. Relative paths resolve against
/// the config file's directory.
ExperimentSpec parse_experiment(const Config& cfg);

struct RunOptions {
    bool force = false;
    std::optional<unsigned> threads;
    // Replaces [experiment] output.
    std::optional<std::filesystem::path> output;
};

/// Trains, attacks, and diagnoses as configured. Writes checkpoints, CSV
/// reports, summary.json, and manifest.json into the output directory; an
/// INCOMPLETE marker stays behind if the run fails part way. An existing
/// output directory is replaced only with `force`. Returns summary.json.
std::string run_experiment(const Config& cfg, const RunOptions& opts = {});

}  // namespace bnnprobe
