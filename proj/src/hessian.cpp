#include "bnnprobe/hessian.hpp"

#include <cmath>
#include <fstream>

#include "bnnprobe/error.hpp"
#include "bnnprobe/jacobian.hpp"

namespace bnnprobe {

LogitDerivatives logit_derivatives(const Network& net, const Tensor& x) {
    const std::size_t n = net.input_dim(), d = net.output_dim();
    if (x.size() != n) throw ShapeError("input length does not match network");
    if (n > max_hessian_inputs) {
        throw InvalidArgument("dense input Hessian refused for " + std::to_string(n) +
                              " inputs (limit " + std::to_string(max_hessian_inputs) + ")");
    }
    LogitDerivatives ld;
    ld.logits = net.forward(x).logits();
    ld.jacobian = input_output_jacobian(net, x);
    if (net.piecewise_linear()) return ld;

    Tape tape;
    Var xv = tape.leaf(x.reshaped({1, n}));
    Var z = net.forward(tape, xv);
    const std::vector<Var> leaves{xv};
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> seed(d, 0.0);
        seed[j] = 1.0;
        Var g = vjp_graph(z, Tensor::matrix(1, d, std::move(seed)), leaves).front();
        std::vector<double> h(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> e(n, 0.0);
            e[i] = 1.0;
            const Tensor row = vjp(g, Tensor::matrix(1, n, std::move(e)), leaves).front();
            std::copy(row.begin(), row.end(), h.begin() + i * n);
        }
        ld.logit_hessians.push_back(Tensor::matrix(n, n, std::move(h)));
    }
    return ld;
}

Tensor input_hessian(const LogitDerivatives& ld, int label, double beta) {
    if (!(std::isfinite(beta) && beta > 0.0)) throw InvalidArgument("beta must be positive");
    const std::size_t d = ld.jacobian.rows(), n = ld.jacobian.cols();
    const Tensor p = softmax(scale(ld.logits, beta));
    const ErrorSignal psi = error_signal(p, label);

    // J^T (diag(p) - p p^T) J = D^T D with D_j = sqrt(p_j) (J_j - sum_i p_i J_i).
    // Centering on the most probable row keeps D accurate when p is nearly
    // one-hot, and D^T D is symmetric by construction.
    const std::size_t top = argmax(p);
    const double* jac = ld.jacobian.begin();
    std::vector<double> shift(n, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        if (i == top) continue;
        for (std::size_t c = 0; c < n; ++c) shift[c] += p[i] * (jac[i * n + c] - jac[top * n + c]);
    }
    std::vector<double> dm(d * n);
    for (std::size_t j = 0; j < d; ++j) {
        const double w = std::sqrt(p[j]);
        for (std::size_t c = 0; c < n; ++c) {
            dm[j * n + c] = w * (jac[j * n + c] - jac[top * n + c] - shift[c]);
        }
    }
    const Tensor dmat = Tensor::matrix(d, n, std::move(dm));
    const Tensor second = matmul(transpose(dmat), dmat);

    std::vector<double> h(n * n);
    for (std::size_t i = 0; i < n * n; ++i) h[i] = beta * beta * second[i];
    for (std::size_t j = 0; j < ld.logit_hessians.size(); ++j) {
        const double w = beta * psi.psi[j];
        if (w == 0.0) continue;
        const Tensor& hj = ld.logit_hessians[j];
        for (std::size_t i = 0; i < n * n; ++i) h[i] += w * hj[i];
    }
    Tensor out = Tensor::matrix(n, n, std::move(h));

    const double rel = frobenius_norm(sub(out, transpose(out))) / std::max(1.0, frobenius_norm(out));
    if (rel >= 1e-8) {
        throw Error("input Hessian is not symmetric (relative asymmetry " + std::to_string(rel) + ")");
    }
    return out;
}

Tensor input_hessian(const Network& net, const Tensor& x, int label, const TemperatureScale& ts) {
    ts.validate();
    return input_hessian(logit_derivatives(net, x), label, ts.beta);
}

double hessian_fro_norm(const Tensor& h) {
    if (h.rank() != 2 || h.rows() != h.cols()) throw ShapeError("Hessian must be square");
    return frobenius_norm(h);
}

HessianProfile hessian_profile(const LogitDerivatives& ld, int label, const std::vector<double>& grid) {
    if (grid.empty()) throw InvalidArgument("empty beta grid");
    HessianProfile prof;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (i > 0 && !(grid[i] > grid[i - 1])) throw InvalidArgument("beta grid must increase");
        prof.betas.push_back(grid[i]);
        prof.norms.push_back(hessian_fro_norm(input_hessian(ld, label, grid[i])));
        if (prof.norms.back() > prof.norms[prof.best]) prof.best = i;
    }
    return prof;
}

std::vector<double> hns_grid(std::size_t d, double gamma, std::size_t points) {
    if (points == 0) throw InvalidArgument("grid needs at least one point");
    const double dd = static_cast<double>(d);
    const double a = prop1_beta_bound(d, 1.0 - 1.0 / dd - 1e-2, gamma);
    const double b = prop1_beta_bound(d, 1e-72, gamma);
    const double lo = std::min(a, b), hi = std::max(a, b);
    std::vector<double> grid(points);
    if (points == 1) {
        grid[0] = lo;
        return grid;
    }
    for (std::size_t i = 0; i < points; ++i) {
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    }
    return grid;
}

HnsResult hns_grid_search(const LogitDerivatives& ld, int label, std::size_t points) {
    const double gamma = logit_gap(ld.logits, GapMode::top_runner_up);
    HnsResult r;
    r.scale.source = BetaSource::hns;
    r.scale.gamma = gamma;
    if (!(gamma > 0.0)) {
        r.scale.beta = 1.0;
        r.scale.fallback = true;
        r.profile = hessian_profile(ld, label, {1.0});
        r.profile.degenerate = true;
        return r;
    }
    r.profile = hessian_profile(ld, label, hns_grid(ld.logits.size(), gamma, points));
    r.scale.beta = r.profile.best_beta();
    return r;
}

HnsResult hns_grid_search(const Network& net, const Tensor& x, int label, std::size_t points) {
    return hns_grid_search(logit_derivatives(net, x), label, points);
}

void HessianProfile::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.precision(17);
    out << "beta,frobenius_norm\n";
    for (std::size_t i = 0; i < betas.size(); ++i) out << betas[i] << ',' << norms[i] << '\n';
}

}  // namespace bnnprobe
