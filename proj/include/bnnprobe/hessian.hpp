#pragma once

#include <filesystem>
#include <vector>

#include "bnnprobe/loss.hpp"
#include "bnnprobe/network.hpp"

namespace bnnprobe {

/// Largest input dimension accepted for dense Hessians.
inline constexpr std::size_t max_hessian_inputs = 256;

/// Beta-independent pieces of the input Hessian at one point.
struct LogitDerivatives {
    Tensor logits;                       // [d]
    Tensor jacobian;                     // [d x N]
    std::vector<Tensor> logit_hessians;  // d matrices [N x N]; empty if piecewise linear
};

/// Second derivatives come from double backprop for smooth networks and are
/// exactly zero for piecewise-linear ones.
LogitDerivatives logit_derivatives(const Network& net, const Tensor& x);

/// beta [ sum_j psi_j d2a_j/dx2 + beta J^T (diag(p) - p p^T) J ] with
/// p = softmax(beta a) and psi = p - y. Throws Error if the result is not
/// symmetric to 1e-8 relative.
Tensor input_hessian(const LogitDerivatives& ld, int label, double beta);
Tensor input_hessian(const Network& net, const Tensor& x, int label, const TemperatureScale& ts);

double hessian_fro_norm(const Tensor& h);

struct HessianProfile {
    std::vector<double> betas;  // strictly increasing
    std::vector<double> norms;
    std::size_t best = 0;       // first index attaining the maximum
    bool degenerate = false;    // zero logit gap; beta fell back to 1

    double best_beta() const { return betas[best]; }
    void write_csv(const std::filesystem::path& path) const;
};

/// Evaluates the Frobenius norm at every grid point.
HessianProfile hessian_profile(const LogitDerivatives& ld, int label, const std::vector<double>& grid);

/// `points` equally spaced values between the bounds for
/// rho = 1 - 1/d - 0.01 and rho = 1e-72, using the top minus runner-up gap.
std::vector<double> hns_grid(std::size_t d, double gamma, std::size_t points = 100);

struct HnsResult {
    TemperatureScale scale;
    HessianProfile profile;
};

HnsResult hns_grid_search(const Network& net, const Tensor& x, int label, std::size_t points = 100);
HnsResult hns_grid_search(const LogitDerivatives& ld, int label, std::size_t points = 100);

}  // namespace bnnprobe
