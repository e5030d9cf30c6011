#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bnnprobe/attack.hpp"
#include "bnnprobe/checkpoint.hpp"
#include "bnnprobe/config.hpp"
#include "bnnprobe/dataset.hpp"
#include "bnnprobe/diagnostics.hpp"
#include "bnnprobe/error.hpp"
#include "bnnprobe/experiment.hpp"
#include "bnnprobe/hessian.hpp"
#include "bnnprobe/loss.hpp"
#include "bnnprobe/training.hpp"
#include "bnnprobe/version.hpp"

namespace fs = std::filesystem;
using namespace bnnprobe;

namespace {

// Exit codes.
constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_config = 2;

// Attack flags as strings so unset values fall back to per-dataset defaults.
struct AttackFlags {
    std::string family = "pgd";
    std::string norm = "linf";
    std::optional<double> epsilon;
    std::optional<double> step;
    int iterations = 20;
    bool no_random_init = false;
    std::string beta_policy = "none";
    double rho = 0.01;
    std::size_t hns_points = 100;
    std::size_t calibration_samples = 100;
    std::optional<double> njs_beta;
    bool no_box = false;
    std::uint64_t seed = 0;
    std::string head = "single";

    void add_to(CLI::App* app) {
        app->add_option("--family", family, "pgd or fgsm")->capture_default_str();
        app->add_option("--norm", norm, "linf or l2")->capture_default_str();
        app->add_option("--epsilon", epsilon, "radius (default scales with input dimension)");
        app->add_option("--step", step, "step size (pgd)");
        app->add_option("--iterations", iterations, "pgd iterations")->capture_default_str();
        app->add_flag("--no-random-init", no_random_init, "start pgd at the clean input");
        app->add_option("--beta-policy", beta_policy, "none, njs or hns")->capture_default_str();
        app->add_option("--rho", rho, "njs safeguard threshold")->capture_default_str();
        app->add_option("--hns-points", hns_points, "hns grid size")->capture_default_str();
        app->add_option("--calibration-samples", calibration_samples, "njs calibration set size")
            ->capture_default_str();
        app->add_option("--njs-beta", njs_beta, "fixed njs beta instead of calibrating");
        app->add_flag("--no-box", no_box, "do not clamp inputs to [0, 1]");
        app->add_option("--seed", seed, "attack seed")->capture_default_str();
        app->add_option("--head", head, "single or double softmax head")->capture_default_str();
    }

    AttackConfig build(std::size_t input_dim) const {
        AttackConfig c;
        c.family = parse_attack_family(family);
        c.norm = parse_norm(norm);
        const auto [eps, eta] = default_radius(c.norm, input_dim);
        c.epsilon = epsilon.value_or(eps);
        if (c.family == AttackFamily::fgsm) {
            c = AttackConfig::fgsm(c.norm, c.epsilon);
        } else {
            c.step = step.value_or(eta);
            c.iterations = iterations;
            c.random_init = !no_random_init;
        }
        c.beta_policy = parse_beta_policy(beta_policy);
        c.rho = rho;
        c.hns_points = hns_points;
        c.calibration_samples = calibration_samples;
        c.njs_beta = njs_beta;
        if (!no_box) c.input_box = std::make_pair(0.0, 1.0);
        c.seed = seed;
        c.head = parse_head_precision(head);
        c.validate();
        return c;
    }
};

Network load_model(const std::string& path) { return load_checkpoint(path).network; }

Dataset load_data(const std::string& path, const Network& net) {
    Dataset d = load_csv(path, static_cast<int>(net.output_dim()));
    if (d.input_dim() != net.input_dim()) {
        throw ConfigError(path + ": " + std::to_string(d.input_dim()) + " features, model expects " +
                          std::to_string(net.input_dim()));
    }
    return d;
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string item = text.substr(pos, comma - pos);
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size() || v == 0) {
            throw ConfigError("bad width list '" + text + "'");
        }
        out.push_back(v);
        pos = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Train quantized MLPs, probe gradient masking, and run temperature-scaled attacks."};
    app.set_version_flag("--version", version);
    app.require_subcommand(1);
    app.fallthrough();
    unsigned threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = all cores)");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
    SyntheticSpec synth;
    std::string kind = "blobs", gen_out;
    gen->add_option("--kind", kind, "blobs or moons")->capture_default_str();
    gen->add_option("--n", synth.n, "samples")->capture_default_str();
    gen->add_option("--dim", synth.dim, "features")->capture_default_str();
    gen->add_option("--classes", synth.classes, "classes")->capture_default_str();
    gen->add_option("--noise", synth.noise, "noise level")->capture_default_str();
    gen->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
    gen->add_option("--out", gen_out, "output CSV")->required();

    // train
    auto* tr = app.add_subcommand("train", "Train an MLP and write a checkpoint");
    std::string tr_data, tr_out, tr_trace, hidden = "128,128", activation = "relu", quant = "float";
    bool binarize_last = true;
    std::uint64_t init_seed = 1;
    TrainConfig tc;
    bool adversarial = false;
    AttackFlags adv;
    adv.iterations = 7;
    tr->add_option("--data", tr_data, "training CSV")->required()->check(CLI::ExistingFile);
    tr->add_option("--out", tr_out, "checkpoint path")->required();
    tr->add_option("--trace", tr_trace, "per-epoch CSV");
    tr->add_option("--hidden", hidden, "hidden widths, comma separated")->capture_default_str();
    tr->add_option("--activation", activation, "relu, tanh or sign")->capture_default_str();
    tr->add_option("--quant", quant, "float, bc (weights_binary) or waq (weights_activations_binary)")
        ->capture_default_str();
    tr->add_option("--binarize-last", binarize_last, "binarize the output layer too")->capture_default_str();
    tr->add_option("--init-seed", init_seed, "weight initialization seed")->capture_default_str();
    tr->add_option("--learning-rate", tc.learning_rate, "SGD step")->capture_default_str();
    tr->add_option("--epochs", tc.epochs, "epochs")->capture_default_str();
    tr->add_option("--batch-size", tc.batch_size, "batch size")->capture_default_str();
    tr->add_option("--seed", tc.seed, "shuffle seed")->capture_default_str();
    tr->add_flag("--adversarial", adversarial, "train on inner-attack examples");
    tr->add_option("--adv-epsilon", adv.epsilon, "inner attack radius");
    tr->add_option("--adv-step", adv.step, "inner attack step");
    tr->add_option("--adv-iterations", adv.iterations, "inner attack iterations")->capture_default_str();
    tr->add_option("--adv-head", adv.head, "inner attack head precision")->capture_default_str();

    // attack
    auto* at = app.add_subcommand("attack", "Attack a checkpoint on a dataset");
    std::string at_model, at_data, at_out, at_summary, at_target;
    AttackFlags af;
    at->add_option("--model", at_model, "checkpoint")->required()->check(CLI::ExistingFile);
    at->add_option("--target", at_target, "classify with this checkpoint instead (transfer)")
        ->check(CLI::ExistingFile);
    at->add_option("--data", at_data, "evaluation CSV")->required()->check(CLI::ExistingFile);
    at->add_option("--out", at_out, "per-sample CSV")->required();
    at->add_option("--summary", at_summary, "summary JSON (default: stdout)");
    af.add_to(at);

    // diagnose
    auto* dg = app.add_subcommand("diagnose", "Masking sweeps, transfer check and signal table");
    std::string dg_float, dg_quant, dg_data, dg_out;
    std::vector<int> dg_iters{1, 5, 10, 20, 50, 100};
    std::vector<double> dg_factors{0.25, 0.5, 1.0, 2.0, 4.0};
    std::size_t dg_m = 100;
    AttackFlags df;
    dg->add_option("--float-model", dg_float, "float checkpoint")->required()->check(CLI::ExistingFile);
    dg->add_option("--quant-model", dg_quant, "quantized checkpoint")->required()->check(CLI::ExistingFile);
    dg->add_option("--data", dg_data, "evaluation CSV")->required()->check(CLI::ExistingFile);
    dg->add_option("--out", dg_out, "output directory")->required();
    dg->add_option("--iterations-sweep", dg_iters, "iteration counts")->delimiter(',');
    dg->add_option("--radius-factors", dg_factors, "multiples of epsilon")->delimiter(',');
    dg->add_option("--signal-samples", dg_m, "correct samples per signal row")->capture_default_str();
    df.add_to(dg);

    // ablate-rho
    auto* ab = app.add_subcommand("ablate-rho", "NJS attack accuracy across rho values");
    std::string ab_model, ab_data, ab_out;
    std::vector<double> rhos = default_rho_grid;
    AttackFlags abf;
    ab->add_option("--model", ab_model, "checkpoint")->required()->check(CLI::ExistingFile);
    ab->add_option("--data", ab_data, "evaluation CSV")->required()->check(CLI::ExistingFile);
    ab->add_option("--out", ab_out, "output CSV")->required();
    ab->add_option("--rho-grid", rhos, "rho grid")->delimiter(',');
    abf.add_to(ab);

    // beta-profile
    auto* bp = app.add_subcommand("beta-profile", "Hessian norm over the HNS beta grid for one sample");
    std::string bp_model, bp_data, bp_out;
    std::size_t bp_index = 0, bp_points = 100;
    bp->add_option("--model", bp_model, "checkpoint")->required()->check(CLI::ExistingFile);
    bp->add_option("--data", bp_data, "CSV")->required()->check(CLI::ExistingFile);
    bp->add_option("--sample", bp_index, "row index")->capture_default_str();
    bp->add_option("--points", bp_points, "grid size")->capture_default_str();
    bp->add_option("--out", bp_out, "output CSV")->required();

    // run
    auto* rn = app.add_subcommand("run", "Run a full experiment from a config file");
    std::string rn_config;
    bool force = false;
    rn->add_option("config", rn_config, "experiment config")->required();
    rn->add_flag("--force", force, "replace a previous run's output directory");
    std::string rn_output;
    rn->add_option("--output", rn_output, "output directory (overrides the config)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            synth.kind = parse_synthetic_kind(kind);
            save_csv(gen_synthetic(synth), gen_out);
        } else if (*tr) {
            const QuantMode mode = parse_quant_mode(quant);
            const Dataset data = load_csv(tr_data);
            std::vector<std::size_t> widths{data.input_dim()};
            for (std::size_t w : parse_sizes(hidden)) widths.push_back(w);
            widths.push_back(static_cast<std::size_t>(data.num_classes));
            Network net = Network::mlp(widths, parse_activation(activation), mode, binarize_last, init_seed);
            if (adversarial) {
                AttackConfig inner = adv.build(data.input_dim());
                inner.seed = tc.seed;
                tc.adversarial = inner;
            }
            const TrainTrace trace = train(net, data, tc, threads);
            save_checkpoint(net, tc.seed, tr_out);
            if (!tr_trace.empty()) {
                std::ofstream out(tr_trace);
                out.precision(17);
                out << "epoch,mean_loss,train_accuracy\n";
                for (const EpochRecord& e : trace.epochs)
                    out << e.epoch << ',' << e.mean_loss << ',' << e.train_accuracy << '\n';
            }
            std::printf("train accuracy %.4f, final loss %.6g\n", accuracy(net, data),
                        trace.epochs.back().mean_loss);
        } else if (*at) {
            const Network source = load_model(at_model);
            const Dataset data = load_data(at_data, source);
            const AttackConfig cfg = af.build(data.input_dim());
            AttackReport rep;
            if (at_target.empty()) {
                rep = evaluate_attack(source, data, cfg, threads);
            } else {
                rep = evaluate_transfer(source, load_model(at_target), data, cfg, threads);
            }
            rep.write_csv(at_out);
            const std::string json = rep.summary_json(cfg);
            if (at_summary.empty()) {
                std::cout << json << '\n';
            } else {
                write_file(at_summary, json + "\n");
            }
        } else if (*dg) {
            const Network nf = load_model(dg_float);
            const Network nq = load_model(dg_quant);
            const Dataset data = load_data(dg_data, nq);
            const AttackConfig base = df.build(data.input_dim());
            MaskingOptions mo;
            mo.iterations = dg_iters;
            mo.radius_factors = dg_factors;
            mo.threads = threads;
            if (data.input_dim() > max_hessian_inputs) mo.policies = {BetaPolicy::none, BetaPolicy::njs};
            fs::create_directories(dg_out);
            const MaskingReport rep = masking_diagnostics(nf, nq, data, base, mo);
            rep.write_csv(dg_out);
            const auto rows = signal_table({{"float", &nf}, {"quant", &nq}}, data, dg_m, base.head,
                                           base.hns_points);
            write_signal_csv(rows, fs::path(dg_out) / "signal_table.csv");
            std::printf("white-box %.4f, black-box %.4f, masking %s\n", rep.white_box_accuracy,
                        rep.black_box_accuracy, rep.masking ? "yes" : "no");
        } else if (*ab) {
            const Network net = load_model(ab_model);
            const Dataset data = load_data(ab_data, net);
            AttackConfig base = abf.build(data.input_dim());
            base.beta_policy = BetaPolicy::njs;
            const RhoAblation rep = rho_ablation(net, data, base, rhos, threads);
            rep.write_csv(ab_out);
            std::printf("njs beta %.6g, spread %.4f\n", rep.njs_beta, rep.spread);
        } else if (*bp) {
            const Network net = load_model(bp_model);
            const Dataset data = load_data(bp_data, net);
            if (bp_index >= data.size()) throw InvalidArgument("sample index out of range");
            const HnsResult r = hns_grid_search(net, data.sample(bp_index), data.labels[bp_index], bp_points);
            r.profile.write_csv(bp_out);
            std::printf("best beta %.6g%s\n", r.scale.beta, r.profile.degenerate ? " (degenerate gap)" : "");
        } else if (*rn) {
            const Config cfg = Config::load(rn_config);
            RunOptions opts;
            opts.force = force;
            if (app.count("--threads")) opts.threads = threads;
            if (!rn_output.empty()) opts.output = rn_output;
            std::cout << run_experiment(cfg, opts);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_failure;
    }
    return exit_ok;
}
