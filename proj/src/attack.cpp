#include "bnnprobe/attack.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "bnnprobe/error.hpp"
#include "bnnprobe/hessian.hpp"
#include "bnnprobe/jacobian.hpp"

namespace bnnprobe {

std::string to_string(AttackFamily f) { return f == AttackFamily::fgsm ? "fgsm" : "pgd"; }
std::string to_string(Norm n) { return n == Norm::linf ? "linf" : "l2"; }

std::string to_string(BetaPolicy p) {
    switch (p) {
        case BetaPolicy::none: return "none";
        case BetaPolicy::njs: return "njs";
        case BetaPolicy::hns: return "hns";
    }
    return "?";
}

std::string to_string(ops::HeadPrecision h) {
    return h == ops::HeadPrecision::single ? "single" : "double";
}

AttackFamily parse_attack_family(const std::string& s) {
    if (s == "fgsm") return AttackFamily::fgsm;
    if (s == "pgd") return AttackFamily::pgd;
    throw ConfigError("unknown attack family '" + s + "'");
}

Norm parse_norm(const std::string& s) {
    if (s == "linf") return Norm::linf;
    if (s == "l2") return Norm::l2;
    throw ConfigError("unknown norm '" + s + "'");
}

BetaPolicy parse_beta_policy(const std::string& s) {
    if (s == "none") return BetaPolicy::none;
    if (s == "njs") return BetaPolicy::njs;
    if (s == "hns") return BetaPolicy::hns;
    throw ConfigError("unknown beta policy '" + s + "'");
}

ops::HeadPrecision parse_head_precision(const std::string& s) {
    if (s == "single") return ops::HeadPrecision::single;
    if (s == "double") return ops::HeadPrecision::double_;
    throw ConfigError("unknown head precision '" + s + "'");
}

AttackConfig AttackConfig::fgsm(Norm norm, double epsilon) {
    AttackConfig c;
    c.family = AttackFamily::fgsm;
    c.norm = norm;
    c.epsilon = epsilon;
    c.step = epsilon;
    c.iterations = 1;
    c.random_init = false;
    return c;
}

void AttackConfig::validate() const {
    if (!(std::isfinite(epsilon) && epsilon >= 0.0)) throw InvalidArgument("epsilon must be >= 0");
    if (epsilon > 0.0 && !(std::isfinite(step) && step > 0.0)) {
        throw InvalidArgument("step size must be positive");
    }
    if (iterations < 1) throw InvalidArgument("iterations must be >= 1");
    if (family == AttackFamily::fgsm) {
        if (iterations != 1) throw InvalidArgument("fgsm takes exactly one iteration");
        if (step != epsilon) throw InvalidArgument("fgsm step size must equal epsilon");
        if (random_init) throw InvalidArgument("fgsm has no random start");
    }
    if (beta_policy == BetaPolicy::njs && !(rho > 0.0 && rho < 1.0)) {
        throw InvalidArgument("rho must lie in (0, (d-1)/d)");
    }
    if (beta_policy == BetaPolicy::hns && hns_points == 0) {
        throw InvalidArgument("hns grid needs at least one point");
    }
    if (njs_beta && !(std::isfinite(*njs_beta) && *njs_beta > 0.0)) {
        throw InvalidArgument("njs beta must be positive");
    }
    if (input_box && !(input_box->first < input_box->second)) {
        throw InvalidArgument("input box must satisfy lo < hi");
    }
}

std::pair<double, double> default_radius(Norm norm, std::size_t n) {
    if (n == 0) throw InvalidArgument("input dimension must be positive");
    if (norm == Norm::l2) return {120.0 / 255.0, 15.0 / 255.0};
    const double k = std::sqrt(3072.0 / static_cast<double>(n));
    return {8.0 / 255.0 * k, 2.0 / 255.0 * k};
}

Tensor project_ball(const Tensor& delta, Norm norm, double epsilon) {
    if (norm == Norm::linf) {
        if (linf_norm(delta) <= epsilon) return delta;
        std::vector<double> out(delta.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(delta[i], -epsilon, epsilon);
        return Tensor(delta.shape(), std::move(out));
    }
    const double n = l2_norm(delta);
    if (n <= epsilon) return delta;
    return scale(delta, epsilon / n);
}

namespace {

Tensor clamp_box(const Tensor& x, const std::optional<std::pair<double, double>>& box) {
    if (!box) return x;
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(x[i], box->first, box->second);
    return Tensor(x.shape(), std::move(out));
}

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double attack_norm(const Tensor& delta, Norm norm) {
    return norm == Norm::linf ? linf_norm(delta) : l2_norm(delta);
}

}  // namespace

Tensor random_init(const Tensor& x0, Norm norm, double epsilon, Rng& rng,
                   const std::optional<std::pair<double, double>>& box) {
    std::vector<double> delta(x0.size());
    if (norm == Norm::linf) {
        for (double& v : delta) v = rng.uniform(-epsilon, epsilon);
    } else {
        double n2 = 0.0;
        for (double& v : delta) {
            v = rng.normal();
            n2 += v * v;
        }
        const double radius =
            epsilon * std::pow(rng.uniform(), 1.0 / static_cast<double>(x0.size()));
        const double k = n2 > 0.0 ? radius / std::sqrt(n2) : 0.0;
        for (double& v : delta) v *= k;
    }
    std::vector<double> x(x0.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = x0[i] + delta[i];
    return clamp_box(Tensor(x0.shape(), std::move(x)), box);
}

AttackResult perturb(const Network& net, const Tensor& x0, int label, const AttackConfig& cfg,
                     std::uint64_t seed) {
    cfg.validate();
    const std::size_t n = net.input_dim(), d = net.output_dim();
    if (x0.size() != n) throw ShapeError("input length does not match network");
    if (label < 0 || static_cast<std::size_t>(label) >= d) throw InvalidArgument("label out of range");
    if (cfg.beta_policy == BetaPolicy::njs && !cfg.njs_beta) {
        throw InvalidArgument("njs policy needs a calibrated model beta");
    }
    if (cfg.beta_policy == BetaPolicy::njs && !(cfg.rho < static_cast<double>(d - 1) / d)) {
        throw InvalidArgument("rho must lie in (0, (d-1)/d)");
    }

    AttackResult r;
    switch (cfg.beta_policy) {
        case BetaPolicy::none: r.beta = 1.0; break;
        case BetaPolicy::njs: r.beta = *cfg.njs_beta; break;
        case BetaPolicy::hns: r.beta = hns_grid_search(net, x0, label, cfg.hns_points).scale.beta; break;
    }

    Rng rng(seed);
    Tensor x = cfg.random_init ? random_init(x0, cfg.norm, cfg.epsilon, rng, cfg.input_box) : x0;
    const std::vector<int> labels{label};
    const bool sign_step = cfg.family == AttackFamily::fgsm || cfg.norm == Norm::linf;

    for (int t = 0; t < cfg.iterations; ++t) {
        Tape tape;
        Var xv = tape.leaf(x.reshaped({1, n}));
        Var z = net.forward(tape, xv);
        double beta = r.beta;
        if (cfg.beta_policy == BetaPolicy::njs) {
            const Tensor scaled = scale(z.value().reshaped({d}), r.beta);
            const Tensor p = softmax(scaled);
            double rest = 0.0;
            for (std::size_t j = 0; j < d; ++j)
                if (j != static_cast<std::size_t>(label)) rest += p[j];
            if (rest <= cfg.rho) {
                const double gamma = logit_gap(scaled, GapMode::top_bottom);
                beta *= gamma > 0.0 ? prop1_beta_bound(d, cfg.rho, gamma) : 1.0;
                ++r.trace.safeguard_fires;
            }
        }

        std::vector<double> step(n, 0.0);
        try {
            Var loss = ops::softmax_cross_entropy(ops::scale(z, beta), labels, cfg.head);
            const Tensor g = grad(loss, std::vector<Var>{xv}).front();
            for (std::size_t i = 0; i < n; ++i) step[i] = cfg.step * (sign_step ? sign0(g[i]) : g[i]);
        } catch (const NonFiniteError&) {
            ++r.trace.nonfinite_steps;
        }

        std::vector<double> delta(n);
        for (std::size_t i = 0; i < n; ++i) delta[i] = x[i] + step[i] - x0[i];
        const Tensor pd = project_ball(Tensor(x0.shape(), std::move(delta)), cfg.norm, cfg.epsilon);
        x = clamp_box(add(x0, pd), cfg.input_box);
        r.trace.predictions.push_back(net.predict_one(x));
    }
    r.x_adv = x;
    r.prediction = r.trace.predictions.back();
    return r;
}

AttackResult attack(const Network& net, const Tensor& x0, int label, const AttackConfig& cfg,
                    std::uint64_t seed) {
    const int clean = net.predict_one(x0);
    if (clean != label) {
        cfg.validate();
        AttackResult r;
        r.x_adv = x0;
        r.prediction = clean;
        return r;
    }
    return perturb(net, x0, label, cfg, seed);
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& f) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

double calibrate_njs(const Network& net, const Dataset& data, std::size_t m) {
    if (m == 0) throw InvalidArgument("calibration needs at least one sample");
    const std::vector<int> pred = net.predict(data.features);
    std::vector<Tensor> calib;
    for (std::size_t i = 0; i < data.size() && calib.size() < m; ++i) {
        if (pred[i] == data.labels[i]) calib.push_back(data.sample(i));
    }
    if (calib.empty()) throw InvalidArgument("no correctly classified samples for calibration");
    return njs_beta(net, calib).beta;
}

namespace {

AttackReport aggregate(std::vector<SampleOutcome> samples) {
    AttackReport rep;
    std::size_t correct = 0, robust = 0;
    for (const SampleOutcome& s : samples) {
        correct += s.initially_correct;
        robust += !s.success;
    }
    const double n = static_cast<double>(samples.size());
    rep.clean_accuracy = static_cast<double>(correct) / n;
    rep.adversarial_accuracy = static_cast<double>(robust) / n;
    rep.accuracy_among_correct = correct ? static_cast<double>(robust) / static_cast<double>(correct) : 0.0;
    rep.samples = std::move(samples);
    return rep;
}

AttackConfig with_calibration(const Network& net, const Dataset& data, AttackConfig cfg) {
    cfg.validate();
    if (cfg.beta_policy == BetaPolicy::njs && !cfg.njs_beta) {
        cfg.njs_beta = calibrate_njs(net, data, cfg.calibration_samples);
    }
    return cfg;
}

}  // namespace

AttackReport evaluate_attack(const Network& net, const Dataset& data, const AttackConfig& config,
                             unsigned threads) {
    return evaluate_transfer(net, net, data, config, threads);
}

AttackReport evaluate_transfer(const Network& source, const Network& target, const Dataset& data,
                               const AttackConfig& config, unsigned threads) {
    if (data.size() == 0) throw InvalidArgument("empty dataset");
    const AttackConfig cfg = with_calibration(source, data, config);
    const std::vector<int> clean = target.predict(data.features);
    std::vector<SampleOutcome> out(data.size());
    parallel_for(data.size(), threads, [&](std::size_t i) {
        SampleOutcome& s = out[i];
        const int label = data.labels[i];
        s.initially_correct = clean[i] == label;
        s.prediction = clean[i];
        s.success = !s.initially_correct;
        if (!s.initially_correct) return;
        const Tensor x0 = data.sample(i);
        const AttackResult r = perturb(source, x0, label, cfg, derive_seed(cfg.seed, i));
        s.prediction = &source == &target ? r.prediction : target.predict_one(r.x_adv);
        s.success = s.prediction != label;
        s.perturbation_norm = attack_norm(sub(r.x_adv, x0), cfg.norm);
        s.beta = r.beta;
        s.nonfinite_steps = r.trace.nonfinite_steps;
        s.safeguard_fires = r.trace.safeguard_fires;
    });
    AttackReport rep = aggregate(std::move(out));
    rep.njs_beta = cfg.njs_beta;
    return rep;
}

void AttackReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.precision(17);
    out << "sample_id,initially_correct,prediction,success,perturbation_norm,beta,"
           "nonfinite_steps,safeguard_fires\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const SampleOutcome& s = samples[i];
        out << i << ',' << s.initially_correct << ',' << s.prediction << ',' << s.success << ','
            << s.perturbation_norm << ',' << s.beta << ',' << s.nonfinite_steps << ','
            << s.safeguard_fires << '\n';
    }
    out << "summary,clean_accuracy=" << clean_accuracy << ",adversarial_accuracy="
        << adversarial_accuracy << ",accuracy_among_correct=" << accuracy_among_correct
        << ",,,,\n";
}

std::string AttackReport::summary_json(const AttackConfig& cfg) const {
    nlohmann::ordered_json j;
    j["family"] = to_string(cfg.family);
    j["norm"] = to_string(cfg.norm);
    j["epsilon"] = cfg.epsilon;
    j["step"] = cfg.step;
    j["iterations"] = cfg.iterations;
    j["random_init"] = cfg.random_init;
    j["beta_policy"] = to_string(cfg.beta_policy);
    j["rho"] = cfg.rho;
    j["head"] = to_string(cfg.head);
    j["seed"] = cfg.seed;
    j["samples"] = samples.size();
    j["clean_accuracy"] = clean_accuracy;
    j["adversarial_accuracy"] = adversarial_accuracy;
    j["accuracy_among_correct"] = accuracy_among_correct;
    if (njs_beta) j["njs_beta"] = *njs_beta;
    return j.dump(2);
}

}  // namespace bnnprobe
