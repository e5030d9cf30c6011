#pragma once

#include <vector>

#include "bnnprobe/tensor.hpp"

namespace bnnprobe {

/// Singular values of a 2-D tensor, descending.
///
/// One-sided Jacobi on the shorter side. Throws ConvergenceError when the
/// sweep cap is reached before every column pair is orthogonal to `tol`.
/// Singular values below tol * ||m||_F are resolved to that absolute accuracy
/// only; rank-deficient input is handled this way.
std::vector<double> singular_values(const Tensor& m, double tol = 1e-12, int max_sweeps = 100);

}  // namespace bnnprobe
