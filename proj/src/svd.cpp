#include "bnnprobe/svd.hpp"

#include <algorithm>
#include <cmath>

#include "bnnprobe/error.hpp"

namespace bnnprobe {

std::vector<double> singular_values(const Tensor& m, double tol, int max_sweeps) {
    if (m.rank() != 2) throw ShapeError("singular_values expects a 2-D tensor");
    // Work on rows of the wide orientation so the k vectors being
    // orthogonalized are the short dimension: k <= len.
    const bool wide = m.rows() <= m.cols();
    const Tensor a = wide ? m : transpose(m);
    const std::size_t k = a.rows(), len = a.cols();
    std::vector<double> u(a.begin(), a.end());

    auto row = [&](std::size_t i) { return u.data() + i * len; };

    // Vectors below this squared norm are numerically zero; rotating them
    // against others only reshuffles rounding noise and never settles.
    const double fro = frobenius_norm(m);
    const double negligible = (tol * fro) * (tol * fro);

    bool converged = k < 2;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        converged = true;
        for (std::size_t p = 0; p + 1 < k; ++p) {
            for (std::size_t q = p + 1; q < k; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                const double* up = row(p);
                const double* uq = row(q);
                for (std::size_t i = 0; i < len; ++i) {
                    alpha += up[i] * up[i];
                    beta += uq[i] * uq[i];
                    gamma += up[i] * uq[i];
                }
                if (gamma == 0.0 || alpha <= negligible || beta <= negligible ||
                    std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta)) {
                    continue;
                }
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::abs(zeta) > 1e150
                                     ? 0.5 / zeta
                                     : std::copysign(1.0, zeta) /
                                           (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                double* wp = row(p);
                double* wq = row(q);
                for (std::size_t i = 0; i < len; ++i) {
                    const double x = wp[i], y = wq[i];
                    wp[i] = c * x - s * y;
                    wq[i] = s * x + c * y;
                }
            }
        }
    }
    if (!converged) throw ConvergenceError("one-sided Jacobi SVD did not converge");

    std::vector<double> sv(k);
    for (std::size_t i = 0; i < k; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < len; ++j) s += row(i)[j] * row(i)[j];
        sv[i] = std::sqrt(s);
    }
    std::sort(sv.begin(), sv.end(), std::greater<>());
    return sv;
}

}  // namespace bnnprobe
