#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bnnprobe/attack.hpp"
#include "bnnprobe/dataset.hpp"
#include "bnnprobe/network.hpp"

namespace bnnprobe {

struct SweepRow {
    std::string model;   // "float" or "quant"
    std::string policy;  // beta policy name
    double value;        // iterations or epsilon
    double adversarial_accuracy;
};

struct MaskingOptions {
    std::vector<int> iterations{1, 5, 10, 20, 50, 100};
    // Multiples of the base epsilon; the step scales along.
    std::vector<double> radius_factors{0.25, 0.5, 1.0, 2.0, 4.0};
    std::vector<BetaPolicy> policies{BetaPolicy::none, BetaPolicy::njs, BetaPolicy::hns};
    unsigned threads = 0;
};

struct MaskingReport {
    std::vector<SweepRow> iteration_sweep;  // quantized net, every policy
    std::vector<SweepRow> radius_sweep;     // both nets, plain attack
    double white_box_accuracy = 0.0;        // plain attack on the quantized net
    double black_box_accuracy = 0.0;        // transferred from the float net
    // White-box accuracy above black-box accuracy: gradients are uninformative.
    bool masking = false;

    void write_csv(const std::filesystem::path& dir) const;
};

/// Iteration sweep, radius sweep, and float-to-quantized transfer check.
MaskingReport masking_diagnostics(const Network& net_float, const Network& net_quant,
                                  const Dataset& data, const AttackConfig& base,
                                  const MaskingOptions& opts = {});

struct SignalRow {
    std::string model;
    std::string mode;  // orig, njs, hns
    double beta_mean;
    double jsv_mean;
    double jsv_std;
    double psi_norm;   // mean ||p(beta) - y||
    double grad_norm;  // mean ||d loss / dx||
    double sign_norm;  // mean sqrt(number of nonzero gradient coordinates)
};

/// Rows for each (model, mode) over the first `m` correctly classified
/// samples. Throws InvalidArgument if fewer are available.
std::vector<SignalRow> signal_table(const std::vector<std::pair<std::string, const Network*>>& nets,
                                    const Dataset& data, std::size_t m,
                                    ops::HeadPrecision head = ops::HeadPrecision::single,
                                    std::size_t hns_points = 100);

void write_signal_csv(const std::vector<SignalRow>& rows, const std::filesystem::path& path);

/// sqrt(count of nonzero entries).
double sign_norm(const Tensor& gradient);

struct RhoRow {
    double rho;
    double adversarial_accuracy;
    double accuracy_among_correct;
    std::size_t safeguard_fires;
};

struct RhoAblation {
    std::vector<RhoRow> rows;
    double spread = 0.0;  // max - min adversarial accuracy
    double njs_beta = 0.0;

    void write_csv(const std::filesystem::path& path) const;
};

inline const std::vector<double> default_rho_grid{1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 2e-1};

/// NJS attack per rho, sharing one calibrated model beta.
RhoAblation rho_ablation(const Network& net, const Dataset& data, const AttackConfig& base,
                         const std::vector<double>& rhos, unsigned threads = 0);

}  // namespace bnnprobe
