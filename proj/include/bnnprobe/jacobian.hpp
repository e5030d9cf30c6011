#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bnnprobe/loss.hpp"
#include "bnnprobe/network.hpp"

namespace bnnprobe {

/// d(logits)/dx as [d x N], one reverse pass per logit.
Tensor input_output_jacobian(const Network& net, const Tensor& x);

struct JsvReport {
    std::vector<std::vector<double>> singular_values;  // per sample, descending
    double mean = 0.0;
    double stddev = 0.0;  // population, over all pooled values
    std::size_t samples = 0;
    double scale = 1.0;
    std::vector<std::string> warnings;

    /// Columns sample_id,j,singular_value, then rows "summary,mean,<v>" and
    /// "summary,std,<v>".
    void write_csv(const std::filesystem::path& path) const;
};

/// Pools the singular values of scale * J_i.
JsvReport jsv_from_jacobians(const std::vector<Tensor>& jacobians, double scale = 1.0);
JsvReport jsv_stats(const Network& net, const std::vector<Tensor>& samples,
                    const std::optional<TemperatureScale>& ts = std::nullopt);

/// beta = M d / sum of all singular values over the calibration set.
TemperatureScale njs_beta_from_jacobians(const std::vector<Tensor>& jacobians);
TemperatureScale njs_beta(const Network& net, const std::vector<Tensor>& calibration);

/// Attaches a warning when the mean JSV lies outside [lo, hi]. Returns true
/// when inside.
bool check_jsv_band(JsvReport& report, double lo = 0.5, double hi = 2.0);

}  // namespace bnnprobe
