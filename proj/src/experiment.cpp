#include "bnnprobe/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json.hpp"

#include "bnnprobe/checkpoint.hpp"
#include "bnnprobe/error.hpp"
#include "bnnprobe/hessian.hpp"
#include "bnnprobe/version.hpp"

namespace bnnprobe {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

const std::set<std::string> attack_keys{"model",  "family",     "norm",       "epsilon",
                                        "step",   "iterations", "random_init", "beta_policy",
                                        "rho",    "hns_points", "calibration_samples",
                                        "head",   "seed",       "input_box"};

fs::path resolve(const Config& cfg, const fs::path& p) {
    if (p.is_absolute() || cfg.origin().empty() || cfg.origin().front() == '<') return p;
    return fs::path(cfg.origin()).parent_path() / p;
}

template <class F>
auto field(const Config& cfg, const std::string& section, const std::string& key, F parse) {
    const std::string value = cfg.get_string(section, key);
    try {
        return parse(value);
    } catch (const ConfigError& e) {
        cfg.fail(section, key, e.what());
    }
}

// Attack fields shared by [attack.*] sections and [diagnostics].
AttackConfig parse_attack(const Config& cfg, const std::string& sec, std::size_t input_dim,
                          bool box_default, std::uint64_t seed) {
    AttackConfig a;
    if (cfg.has(sec, "family")) a.family = field(cfg, sec, "family", parse_attack_family);
    if (cfg.has(sec, "norm")) a.norm = field(cfg, sec, "norm", parse_norm);
    const auto [eps, step] = default_radius(a.norm, input_dim);
    a.epsilon = cfg.get_double(sec, "epsilon", eps);
    if (a.family == AttackFamily::fgsm) {
        a.step = a.epsilon;
        a.iterations = 1;
        a.random_init = false;
        if (cfg.has(sec, "step") && cfg.get_double(sec, "step") != a.epsilon) {
            cfg.fail(sec, "step", "fgsm step size equals epsilon");
        }
        if (cfg.has(sec, "iterations") && cfg.get_int(sec, "iterations") != 1) {
            cfg.fail(sec, "iterations", "fgsm takes exactly one iteration");
        }
        if (cfg.get_bool(sec, "random_init", false)) cfg.fail(sec, "random_init", "fgsm has no random start");
    } else {
        a.step = cfg.get_double(sec, "step", step);
        const long long t = cfg.get_int(sec, "iterations", 20);
        if (t < 1 || t > 100000) cfg.fail(sec, "iterations", "must be in [1, 100000]");
        a.iterations = static_cast<int>(t);
        a.random_init = cfg.get_bool(sec, "random_init", true);
    }
    if (cfg.has(sec, "beta_policy")) a.beta_policy = field(cfg, sec, "beta_policy", parse_beta_policy);
    a.rho = cfg.get_double(sec, "rho", 0.01);
    const long long pts = cfg.get_int(sec, "hns_points", 100);
    if (pts < 1) cfg.fail(sec, "hns_points", "must be positive");
    a.hns_points = static_cast<std::size_t>(pts);
    const long long m = cfg.get_int(sec, "calibration_samples", 100);
    if (m < 1) cfg.fail(sec, "calibration_samples", "must be positive");
    a.calibration_samples = static_cast<std::size_t>(m);
    if (cfg.has(sec, "head")) a.head = field(cfg, sec, "head", parse_head_precision);
    a.seed = cfg.get_u64(sec, "seed", seed);
    if (cfg.get_bool(sec, "input_box", box_default)) a.input_box = std::make_pair(0.0, 1.0);
    try {
        a.validate();
    } catch (const InvalidArgument& e) {
        cfg.fail(sec, "epsilon", e.what());
    }
    return a;
}

std::vector<std::size_t> parse_widths(const Config& cfg, const std::string& sec) {
    std::vector<std::size_t> out;
    for (double v : cfg.get_doubles(sec, "hidden", std::vector<double>{128, 128})) {
        if (!(v >= 1 && v == static_cast<double>(static_cast<std::size_t>(v)))) {
            cfg.fail(sec, "hidden", "widths must be positive integers");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::size_t csv_input_dim(const fs::path& path) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        return static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    }
    return 0;
}

}  // namespace

ExperimentSpec parse_experiment(const Config& cfg) {
    ExperimentSpec spec;
    for (const std::string& s : cfg.sections()) {
        if (s != "experiment" && s != "data" && s != "diagnostics" && s.rfind("model.", 0) != 0 &&
            s.rfind("attack.", 0) != 0) {
            cfg.fail(s, "", "unknown section");
        }
    }
    cfg.require_known("experiment", {"seed", "output", "threads"});
    spec.seed = cfg.get_u64("experiment", "seed", 0);
    spec.output = resolve(cfg, cfg.get_string("experiment", "output"));
    const long long threads = cfg.get_int("experiment", "threads", 0);
    if (threads < 0) cfg.fail("experiment", "threads", "must be nonnegative");
    spec.threads = static_cast<unsigned>(threads);

    // Data.
    cfg.require_known("data", {"source", "path", "num_classes", "n", "dim", "classes", "noise",
                               "train_fraction", "input_box"});
    DataSpec& data = spec.data;
    const std::string source = cfg.get_string("data", "source");
    std::size_t input_dim = 0;
    if (source == "csv") {
        data.path = resolve(cfg, cfg.get_string("data", "path"));
        if (!fs::is_regular_file(data.path)) {
            cfg.fail("data", "path", "dataset file " + data.path.string() + " does not exist");
        }
        data.num_classes = static_cast<int>(cfg.get_int("data", "num_classes", 0));
        input_dim = csv_input_dim(data.path);
        if (input_dim == 0) cfg.fail("data", "path", "dataset file has no features");
    } else if (source == "blobs" || source == "moons") {
        data.synthetic = true;
        data.synth.kind = parse_synthetic_kind(source);
        const long long n = cfg.get_int("data", "n", 2000);
        const long long dim = cfg.get_int("data", "dim", source == "moons" ? 2 : 16);
        const long long classes = cfg.get_int("data", "classes", source == "moons" ? 2 : 4);
        if (n < 1) cfg.fail("data", "n", "must be positive");
        if (dim < 1) cfg.fail("data", "dim", "must be positive");
        if (classes < 2) cfg.fail("data", "classes", "need at least 2 classes");
        data.synth.n = static_cast<std::size_t>(n);
        data.synth.dim = static_cast<std::size_t>(dim);
        data.synth.classes = static_cast<int>(classes);
        data.synth.noise = cfg.get_double("data", "noise", 0.1);
        data.synth.seed = spec.seed;
        if (data.synth.n < static_cast<std::size_t>(classes) * 10) {
            cfg.fail("data", "n", "need at least 10 samples per class");
        }
        if (source == "moons" && (dim != 2 || classes != 2)) {
            cfg.fail("data", "source", "moons is defined for dim = 2 and classes = 2");
        }
        data.num_classes = data.synth.classes;
        input_dim = data.synth.dim;
    } else {
        cfg.fail("data", "source", "expected csv, blobs, or moons");
    }
    data.train_fraction = cfg.get_double("data", "train_fraction", 0.75);
    if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0)) {
        cfg.fail("data", "train_fraction", "must be in (0, 1)");
    }
    data.input_box = cfg.get_bool("data", "input_box", !data.synthetic);

    // Models.
    std::set<std::string> names;
    for (const std::string& sec : cfg.sections()) {
        if (sec.rfind("model.", 0) != 0) continue;
        cfg.require_known(sec, {"hidden", "activation", "quant", "binarize_last", "seed", "train_seed",
                                "learning_rate", "epochs", "batch_size", "adversarial",
                                "adv_epsilon", "adv_step", "adv_iterations", "adv_head"});
        ModelSpec m;
        m.name = sec.substr(6);
        if (m.name.empty()) cfg.fail(sec, "", "model needs a name");
        names.insert(m.name);
        m.hidden = parse_widths(cfg, sec);
        m.mode = cfg.has(sec, "quant") ? field(cfg, sec, "quant", parse_quant_mode) : QuantMode::float_ref;
        m.activation = cfg.has(sec, "activation") ? field(cfg, sec, "activation", parse_activation)
                                                  : Activation::relu;
        if (m.activation == Activation::none) cfg.fail(sec, "activation", "hidden layers need a nonlinearity");
        if ((m.activation == Activation::sign) != (m.mode == QuantMode::weights_activations_binary)) {
            cfg.fail(sec, "activation", "sign activations go with quant = weights_activations_binary");
        }
        m.binarize_last = cfg.get_bool(sec, "binarize_last", true);
        m.init_seed = cfg.get_u64(sec, "seed", spec.seed);
        m.train.seed = cfg.get_u64(sec, "train_seed", m.init_seed);
        m.train.learning_rate = cfg.get_double(sec, "learning_rate", 0.05);
        const long long epochs = cfg.get_int(sec, "epochs", 50);
        if (epochs < 1) cfg.fail(sec, "epochs", "must be >= 1");
        m.train.epochs = static_cast<int>(epochs);
        const long long batch = cfg.get_int(sec, "batch_size", 32);
        if (batch < 1) cfg.fail(sec, "batch_size", "must be positive");
        m.train.batch_size = static_cast<std::size_t>(batch);
        if (!(m.train.learning_rate >= 0.0)) cfg.fail(sec, "learning_rate", "must be nonnegative");
        if (cfg.get_bool(sec, "adversarial", false)) {
            AttackConfig inner;
            const auto [eps, step] = default_radius(Norm::linf, input_dim);
            inner.epsilon = cfg.get_double(sec, "adv_epsilon", eps);
            inner.step = cfg.get_double(sec, "adv_step", step);
            inner.iterations = static_cast<int>(cfg.get_int(sec, "adv_iterations", 7));
            inner.seed = m.train.seed;
            if (cfg.has(sec, "adv_head")) inner.head = field(cfg, sec, "adv_head", parse_head_precision);
            if (data.input_box) inner.input_box = std::make_pair(0.0, 1.0);
            try {
                inner.validate();
            } catch (const InvalidArgument& e) {
                cfg.fail(sec, "adversarial", e.what());
            }
            m.train.adversarial = inner;
        }
        spec.models.push_back(std::move(m));
    }
    if (spec.models.empty()) cfg.fail("model.<name>", "", "at least one model section is required");

    auto check_model = [&](const std::string& sec, const std::string& key, const std::string& name) {
        if (!names.count(name)) cfg.fail(sec, key, "unknown model '" + name + "'");
    };

    // Attacks.
    for (const std::string& sec : cfg.sections()) {
        if (sec.rfind("attack.", 0) != 0) continue;
        cfg.require_known(sec, attack_keys);
        AttackSpec a;
        a.name = sec.substr(7);
        if (a.name.empty()) cfg.fail(sec, "", "attack needs a name");
        a.models = cfg.get_strings(sec, "model", std::vector<std::string>{"all"});
        if (a.models.size() == 1 && a.models.front() == "all") {
            a.models.clear();
            for (const ModelSpec& m : spec.models) a.models.push_back(m.name);
        }
        for (const std::string& m : a.models) check_model(sec, "model", m);
        a.config = parse_attack(cfg, sec, input_dim, data.input_box, spec.seed);
        if (a.config.beta_policy == BetaPolicy::hns && input_dim > max_hessian_inputs) {
            cfg.fail(sec, "beta_policy", "input dimension too large for Hessian analysis");
        }
        spec.attacks.push_back(std::move(a));
    }

    // Diagnostics.
    if (cfg.has_section("diagnostics")) {
        std::set<std::string> keys = attack_keys;
        keys.erase("model");
        keys.insert({"masking", "sweep_iterations", "radius_factors", "signal_models",
                     "signal_samples", "rho_model", "rho_grid"});
        cfg.require_known("diagnostics", keys);
        DiagnosticsSpec& d = spec.diagnostics;
        d.base = parse_attack(cfg, "diagnostics", input_dim, data.input_box, spec.seed);
        if (cfg.has("diagnostics", "masking")) {
            const auto pair = cfg.get_strings("diagnostics", "masking");
            if (pair.size() != 2) cfg.fail("diagnostics", "masking", "expected 'float_model, quantized_model'");
            check_model("diagnostics", "masking", pair[0]);
            check_model("diagnostics", "masking", pair[1]);
            d.masking = std::make_pair(pair[0], pair[1]);
        }
        if (cfg.has("diagnostics", "sweep_iterations")) {
            d.masking_options.iterations.clear();
            for (double t : cfg.get_doubles("diagnostics", "sweep_iterations")) {
                if (!(t >= 1 && t == static_cast<int>(t))) {
                    cfg.fail("diagnostics", "sweep_iterations", "iterations must be positive integers");
                }
                d.masking_options.iterations.push_back(static_cast<int>(t));
            }
        }
        d.masking_options.radius_factors =
            cfg.get_doubles("diagnostics", "radius_factors", d.masking_options.radius_factors);
        d.signal_models = cfg.get_strings("diagnostics", "signal_models", std::vector<std::string>{});
        for (const std::string& m : d.signal_models) check_model("diagnostics", "signal_models", m);
        const long long m = cfg.get_int("diagnostics", "signal_samples", 100);
        if (m < 1) cfg.fail("diagnostics", "signal_samples", "must be positive");
        d.signal_samples = static_cast<std::size_t>(m);
        if (cfg.has("diagnostics", "rho_model")) {
            d.rho_model = cfg.get_string("diagnostics", "rho_model");
            check_model("diagnostics", "rho_model", *d.rho_model);
        }
        d.rho_grid = cfg.get_doubles("diagnostics", "rho_grid", default_rho_grid);
        const double classes = static_cast<double>(std::max(data.num_classes, 2));
        for (double r : d.rho_grid) {
            if (!(r > 0.0 && (data.num_classes == 0 || r < (classes - 1.0) / classes))) {
                cfg.fail("diagnostics", "rho_grid", "rho must lie in (0, (d-1)/d)");
            }
        }
        if (input_dim > max_hessian_inputs && !d.signal_models.empty()) {
            cfg.fail("diagnostics", "signal_models", "input dimension too large for Hessian analysis");
        }
    }
    return spec;
}

namespace {

bool looks_like_run_dir(const fs::path& dir) {
    return fs::exists(dir / "manifest.json") || fs::exists(dir / "INCOMPLETE");
}

void prepare_output(const fs::path& dir, bool force) {
    if (fs::exists(dir) && !fs::is_empty(dir)) {
        if (!force) {
            throw ConfigError("output directory " + dir.string() + " is not empty (use --force)");
        }
        if (!looks_like_run_dir(dir)) {
            throw ConfigError("refusing to replace " + dir.string() +
                              ": it does not contain a previous run");
        }
        fs::remove_all(dir);
    }
    fs::create_directories(dir / "models");
    fs::create_directories(dir / "attacks");
    std::ofstream(dir / "INCOMPLETE") << "run in progress or failed\n";
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("failed writing " + path.string());
}

void write_trace(const TrainTrace& trace, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.precision(17);
    out << "epoch,mean_loss,train_accuracy\n";
    for (const EpochRecord& e : trace.epochs) {
        out << e.epoch << ',' << e.mean_loss << ',' << e.train_accuracy << '\n';
    }
}

}  // namespace

std::string run_experiment(const Config& cfg, const RunOptions& opts) {
    const ExperimentSpec spec = parse_experiment(cfg);
    const unsigned threads = opts.threads.value_or(spec.threads);

    // Load data before touching the output directory.
    const Dataset all = spec.data.synthetic ? gen_synthetic(spec.data.synth)
                                            : load_csv(spec.data.path, spec.data.num_classes);
    const auto [train_set, test_set] = split(all, spec.data.train_fraction, spec.seed);

    const fs::path out = opts.output.value_or(spec.output);
    prepare_output(out, opts.force);

    const std::string hash = fnv1a_hex(cfg.text());
    Json summary;
    summary["version"] = version;
    summary["seed"] = spec.seed;
    summary["config_hash"] = hash;
    summary["data"] = {{"train_size", train_set.size()},
                       {"test_size", test_set.size()},
                       {"input_dim", all.input_dim()},
                       {"num_classes", all.num_classes}};

    std::vector<std::pair<std::string, Network>> nets;
    summary["models"] = Json::array();
    for (const ModelSpec& m : spec.models) {
        std::vector<std::size_t> widths{all.input_dim()};
        widths.insert(widths.end(), m.hidden.begin(), m.hidden.end());
        widths.push_back(static_cast<std::size_t>(all.num_classes));
        Network net = Network::mlp(widths, m.activation, m.mode, m.binarize_last, m.init_seed);
        const TrainTrace trace = train(net, train_set, m.train, threads);
        save_checkpoint(net, m.train.seed, out / "models" / (m.name + ".json"));
        write_trace(trace, out / "models" / (m.name + "_trace.csv"));
        summary["models"].push_back({{"name", m.name},
                                     {"quant_mode", to_string(m.mode)},
                                     {"adversarial_training", m.train.adversarial.has_value()},
                                     {"final_loss", trace.epochs.back().mean_loss},
                                     {"train_accuracy", accuracy(net, train_set)},
                                     {"test_accuracy", accuracy(net, test_set)}});
        nets.emplace_back(m.name, std::move(net));
    }
    auto net_by_name = [&](const std::string& name) -> const Network& {
        for (const auto& [n, net] : nets)
            if (n == name) return net;
        throw InvalidArgument("unknown model " + name);
    };

    summary["attacks"] = Json::array();
    for (const AttackSpec& a : spec.attacks) {
        for (const std::string& model : a.models) {
            const AttackReport rep = evaluate_attack(net_by_name(model), test_set, a.config, threads);
            rep.write_csv(out / "attacks" / (a.name + "__" + model + ".csv"));
            Json j;
            j["attack"] = a.name;
            j["model"] = model;
            j["report"] = Json::parse(rep.summary_json(a.config));
            summary["attacks"].push_back(std::move(j));
        }
    }

    const DiagnosticsSpec& d = spec.diagnostics;
    Json diag = Json::object();
    if (d.masking || !d.signal_models.empty() || d.rho_model) fs::create_directories(out / "diagnostics");
    if (d.masking) {
        MaskingOptions mo = d.masking_options;
        mo.threads = threads;
        const MaskingReport rep = masking_diagnostics(net_by_name(d.masking->first),
                                                      net_by_name(d.masking->second), test_set, d.base, mo);
        rep.write_csv(out / "diagnostics");
        Json iter = Json::array();
        for (const SweepRow& r : rep.iteration_sweep) {
            iter.push_back({{"policy", r.policy}, {"iterations", r.value}, {"adversarial_accuracy", r.adversarial_accuracy}});
        }
        Json radius = Json::array();
        for (const SweepRow& r : rep.radius_sweep) {
            radius.push_back({{"model", r.model}, {"epsilon", r.value}, {"adversarial_accuracy", r.adversarial_accuracy}});
        }
        diag["masking"] = {{"float_model", d.masking->first},
                           {"quantized_model", d.masking->second},
                           {"iteration_sweep", iter},
                           {"radius_sweep", radius},
                           {"white_box_accuracy", rep.white_box_accuracy},
                           {"black_box_accuracy", rep.black_box_accuracy},
                           {"masking", rep.masking}};
    }
    if (!d.signal_models.empty()) {
        std::vector<std::pair<std::string, const Network*>> sel;
        for (const std::string& m : d.signal_models) sel.emplace_back(m, &net_by_name(m));
        const auto rows = signal_table(sel, test_set, d.signal_samples, d.base.head, d.base.hns_points);
        write_signal_csv(rows, out / "diagnostics" / "signal_table.csv");
        Json t = Json::array();
        for (const SignalRow& r : rows) {
            t.push_back({{"model", r.model}, {"mode", r.mode}, {"beta_mean", r.beta_mean},
                         {"jsv_mean", r.jsv_mean}, {"jsv_std", r.jsv_std}, {"psi_norm", r.psi_norm},
                         {"grad_norm", r.grad_norm}, {"sign_norm", r.sign_norm}});
        }
        diag["signal_table"] = t;
    }
    if (d.rho_model) {
        const RhoAblation ab = rho_ablation(net_by_name(*d.rho_model), test_set, d.base, d.rho_grid, threads);
        ab.write_csv(out / "diagnostics" / "rho_ablation.csv");
        Json rows = Json::array();
        for (const RhoRow& r : ab.rows) {
            rows.push_back({{"rho", r.rho}, {"adversarial_accuracy", r.adversarial_accuracy},
                            {"accuracy_among_correct", r.accuracy_among_correct}});
        }
        diag["rho_ablation"] = {{"model", *d.rho_model}, {"njs_beta", ab.njs_beta},
                                {"rows", rows}, {"spread", ab.spread}};
    }
    summary["diagnostics"] = diag;

    const std::string summary_text = summary.dump(2) + "\n";
    write_text(out / "summary.json", summary_text);

    Json manifest;
    manifest["version"] = version;
    manifest["seed"] = spec.seed;
    manifest["config_hash"] = hash;
    manifest["config"] = cfg.text();
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(out)) {
        if (e.is_regular_file() && e.path().filename() != "INCOMPLETE") {
            files.push_back(fs::relative(e.path(), out).generic_string());
        }
    }
    std::sort(files.begin(), files.end());
    manifest["files"] = files;
    write_text(out / "manifest.json", manifest.dump(2) + "\n");
    fs::remove(out / "INCOMPLETE");
    return summary_text;
}

}  // namespace bnnprobe
