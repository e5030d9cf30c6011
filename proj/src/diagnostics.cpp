#include "bnnprobe/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "bnnprobe/error.hpp"
#include "bnnprobe/hessian.hpp"
#include "bnnprobe/jacobian.hpp"
#include "bnnprobe/svd.hpp"

namespace bnnprobe {

MaskingReport masking_diagnostics(const Network& net_float, const Network& net_quant,
                                  const Dataset& data, const AttackConfig& base,
                                  const MaskingOptions& opts) {
    if (net_float.input_dim() != net_quant.input_dim() ||
        net_float.output_dim() != net_quant.output_dim()) {
        throw ShapeError("float and quantized nets do not share input/output dimensions");
    }
    MaskingReport rep;
    AttackConfig cfg = base;
    cfg.family = AttackFamily::pgd;
    cfg.njs_beta.reset();

    AttackConfig njs_cfg = cfg;
    njs_cfg.njs_beta = calibrate_njs(net_quant, data, cfg.calibration_samples);

    for (BetaPolicy policy : opts.policies) {
        for (int t : opts.iterations) {
            AttackConfig c = policy == BetaPolicy::njs ? njs_cfg : cfg;
            c.beta_policy = policy;
            c.iterations = t;
            rep.iteration_sweep.push_back(
                {"quant", to_string(policy), static_cast<double>(t),
                 evaluate_attack(net_quant, data, c, opts.threads).adversarial_accuracy});
        }
    }

    for (const auto& [name, net] : {std::pair<std::string, const Network*>{"float", &net_float},
                                    std::pair<std::string, const Network*>{"quant", &net_quant}}) {
        for (double f : opts.radius_factors) {
            AttackConfig c = cfg;
            c.beta_policy = BetaPolicy::none;
            c.epsilon = base.epsilon * f;
            c.step = base.step * f;
            rep.radius_sweep.push_back(
                {name, "none", c.epsilon, evaluate_attack(*net, data, c, opts.threads).adversarial_accuracy});
        }
    }

    AttackConfig plain = cfg;
    plain.beta_policy = BetaPolicy::none;
    rep.white_box_accuracy = evaluate_attack(net_quant, data, plain, opts.threads).adversarial_accuracy;
    rep.black_box_accuracy =
        evaluate_transfer(net_float, net_quant, data, plain, opts.threads).adversarial_accuracy;
    rep.masking = rep.white_box_accuracy > rep.black_box_accuracy;
    return rep;
}

void MaskingReport::write_csv(const std::filesystem::path& dir) const {
    auto sweep = [&](const std::filesystem::path& path, const char* column,
                     const std::vector<SweepRow>& rows) {
        std::ofstream out(path);
        if (!out) throw ConfigError("cannot write " + path.string());
        out.precision(17);
        out << "model,policy," << column << ",adversarial_accuracy\n";
        for (const SweepRow& r : rows) {
            out << r.model << ',' << r.policy << ',' << r.value << ',' << r.adversarial_accuracy << '\n';
        }
    };
    sweep(dir / "iteration_sweep.csv", "iterations", iteration_sweep);
    sweep(dir / "radius_sweep.csv", "epsilon", radius_sweep);
    std::ofstream out(dir / "transfer.csv");
    if (!out) throw ConfigError("cannot write transfer.csv");
    out.precision(17);
    out << "white_box_accuracy,black_box_accuracy,masking\n";
    out << white_box_accuracy << ',' << black_box_accuracy << ',' << masking << '\n';
}

double sign_norm(const Tensor& gradient) {
    std::size_t nz = 0;
    for (double v : gradient.data()) nz += v != 0.0;
    return std::sqrt(static_cast<double>(nz));
}

namespace {

struct SampleSignal {
    double psi_norm;
    double grad_norm;
    double sign_norm;
};

SampleSignal sample_signal(const Network& net, const Tensor& x, int label, double beta,
                           ops::HeadPrecision head) {
    const std::size_t n = net.input_dim();
    Tape tape;
    Var xv = tape.leaf(x.reshaped({1, n}));
    Var z = ops::scale(net.forward(tape, xv), beta);
    const std::vector<int> labels{label};
    const double psi = l2_norm(ops::error_signal(z, labels, head).value());
    const Tensor g = grad(ops::softmax_cross_entropy(z, labels, head), std::vector<Var>{xv}).front();
    return {psi, l2_norm(g), sign_norm(g)};
}

}  // namespace

std::vector<SignalRow> signal_table(const std::vector<std::pair<std::string, const Network*>>& nets,
                                    const Dataset& data, std::size_t m, ops::HeadPrecision head,
                                    std::size_t hns_points) {
    if (m == 0) throw InvalidArgument("signal table needs at least one sample");
    std::vector<SignalRow> rows;
    for (const auto& [name, net] : nets) {
        const std::vector<int> pred = net->predict(data.features);
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < data.size() && idx.size() < m; ++i) {
            if (pred[i] == data.labels[i]) idx.push_back(i);
        }
        if (idx.size() < m) {
            throw InvalidArgument("model " + name + " has only " + std::to_string(idx.size()) +
                                  " correctly classified samples, need " + std::to_string(m));
        }
        std::vector<LogitDerivatives> ld;
        std::vector<Tensor> jac;
        for (std::size_t i : idx) {
            ld.push_back(logit_derivatives(*net, data.sample(i)));
            jac.push_back(ld.back().jacobian);
        }
        const double njs = njs_beta_from_jacobians(jac).beta;

        for (const std::string mode : {"orig", "njs", "hns"}) {
            std::vector<double> betas;
            for (std::size_t s = 0; s < idx.size(); ++s) {
                if (mode == "orig") {
                    betas.push_back(1.0);
                } else if (mode == "njs") {
                    betas.push_back(njs);
                } else {
                    betas.push_back(hns_grid_search(ld[s], data.labels[idx[s]], hns_points).scale.beta);
                }
            }
            std::vector<double> pooled;
            double beta_sum = 0.0, psi = 0.0, gn = 0.0, sn = 0.0;
            for (std::size_t s = 0; s < idx.size(); ++s) {
                for (double v : singular_values(scale(jac[s], betas[s]))) pooled.push_back(v);
                const SampleSignal sig =
                    sample_signal(*net, data.sample(idx[s]), data.labels[idx[s]], betas[s], head);
                beta_sum += betas[s];
                psi += sig.psi_norm;
                gn += sig.grad_norm;
                sn += sig.sign_norm;
            }
            double mean = 0.0;
            for (double v : pooled) mean += v;
            mean /= static_cast<double>(pooled.size());
            double var = 0.0;
            for (double v : pooled) var += (v - mean) * (v - mean);
            const double k = static_cast<double>(idx.size());
            rows.push_back({name, mode, beta_sum / k, mean,
                            std::sqrt(var / static_cast<double>(pooled.size())), psi / k, gn / k,
                            sn / k});
        }
    }
    return rows;
}

void write_signal_csv(const std::vector<SignalRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.precision(17);
    out << "model,mode,beta_mean,jsv_mean,jsv_std,psi_norm,grad_norm,sign_norm\n";
    for (const SignalRow& r : rows) {
        out << r.model << ',' << r.mode << ',' << r.beta_mean << ',' << r.jsv_mean << ','
            << r.jsv_std << ',' << r.psi_norm << ',' << r.grad_norm << ',' << r.sign_norm << '\n';
    }
}

RhoAblation rho_ablation(const Network& net, const Dataset& data, const AttackConfig& base,
                         const std::vector<double>& rhos, unsigned threads) {
    if (rhos.empty()) throw InvalidArgument("empty rho grid");
    const double d = static_cast<double>(net.output_dim());
    for (double r : rhos) {
        if (!(r > 0.0 && r < (d - 1.0) / d)) {
            throw InvalidArgument("rho " + std::to_string(r) + " outside (0, (d-1)/d)");
        }
    }
    AttackConfig cfg = base;
    cfg.beta_policy = BetaPolicy::njs;
    if (!cfg.njs_beta) cfg.njs_beta = calibrate_njs(net, data, cfg.calibration_samples);

    RhoAblation out;
    out.njs_beta = *cfg.njs_beta;
    double lo = 1.0, hi = 0.0;
    for (double r : rhos) {
        cfg.rho = r;
        const AttackReport rep = evaluate_attack(net, data, cfg, threads);
        std::size_t fires = 0;
        for (const SampleOutcome& s : rep.samples) fires += s.safeguard_fires;
        out.rows.push_back({r, rep.adversarial_accuracy, rep.accuracy_among_correct, fires});
        lo = std::min(lo, rep.adversarial_accuracy);
        hi = std::max(hi, rep.adversarial_accuracy);
    }
    out.spread = hi - lo;
    return out;
}

void RhoAblation::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.precision(17);
    out << "rho,adversarial_accuracy,accuracy_among_correct,safeguard_fires\n";
    for (const RhoRow& r : rows) {
        out << r.rho << ',' << r.adversarial_accuracy << ',' << r.accuracy_among_correct << ','
            << r.safeguard_fires << '\n';
    }
    out << "spread," << spread << ",,\n";
}

}  // namespace bnnprobe
