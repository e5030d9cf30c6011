#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bnnprobe/autodiff.hpp"
#include "bnnprobe/dataset.hpp"
#include "bnnprobe/loss.hpp"
#include "bnnprobe/network.hpp"
#include "bnnprobe/rng.hpp"

namespace bnnprobe {

enum class AttackFamily { fgsm, pgd };
enum class Norm { linf, l2 };
enum class BetaPolicy { none, njs, hns };

std::string to_string(AttackFamily f);
std::string to_string(Norm n);
std::string to_string(BetaPolicy p);
AttackFamily parse_attack_family(const std::string& s);
Norm parse_norm(const std::string& s);
BetaPolicy parse_beta_policy(const std::string& s);
ops::HeadPrecision parse_head_precision(const std::string& s);
std::string to_string(ops::HeadPrecision h);

struct AttackConfig {
    AttackFamily family = AttackFamily::pgd;
    Norm norm = Norm::linf;
    double epsilon = 8.0 / 255.0;
    double step = 2.0 / 255.0;
    int iterations = 20;
    bool random_init = true;
    BetaPolicy beta_policy = BetaPolicy::none;
    double rho = 0.01;               // njs safeguard threshold
    std::size_t hns_points = 100;
    std::size_t calibration_samples = 100;  // njs, when njs_beta is unset
    std::optional<double> njs_beta;  // model-level beta; calibrated if absent
    std::optional<std::pair<double, double>> input_box;
    std::uint64_t seed = 0;
    // Precision of the softmax/cross-entropy head in the attack gradient.
    ops::HeadPrecision head = ops::HeadPrecision::single;

    /// FGSM: one step of size epsilon, no random start.
    static AttackConfig fgsm(Norm norm, double epsilon);
    /// Throws InvalidArgument on any violated invariant. epsilon may be 0.
    void validate() const;
};

/// Default (epsilon, step) for N features in [0, 1]. The linf radius keeps
/// the diameter of an 8/255 ball over 3072 features: 8/255 * sqrt(3072 / N),
/// step 2/255 scaled the same way. The l2 radius is 120/255 with step 15/255.
std::pair<double, double> default_radius(Norm norm, std::size_t n);

/// Clamp (linf) or radially rescale (l2) into the epsilon ball.
Tensor project_ball(const Tensor& delta, Norm norm, double epsilon);

/// Uniform start inside the ball around x0 (per coordinate for linf, uniform
/// in volume for l2), then clamped into `box` if given.
Tensor random_init(const Tensor& x0, Norm norm, double epsilon, Rng& rng,
                   const std::optional<std::pair<double, double>>& box = std::nullopt);

struct AttackTrace {
    std::vector<int> predictions;  // after each iteration
    std::size_t nonfinite_steps = 0;
    std::size_t safeguard_fires = 0;
};

struct AttackResult {
    Tensor x_adv;
    int prediction = -1;
    double beta = 1.0;
    AttackTrace trace;
};

/// Runs the configured update from x0 regardless of the clean prediction.
/// `cfg.njs_beta` must be set for the njs policy.
AttackResult perturb(const Network& net, const Tensor& x0, int label, const AttackConfig& cfg,
                     std::uint64_t seed);

/// As perturb(), but a sample the network already misclassifies is returned
/// unchanged.
AttackResult attack(const Network& net, const Tensor& x0, int label, const AttackConfig& cfg,
                    std::uint64_t seed);

struct SampleOutcome {
    bool initially_correct = false;
    int prediction = -1;
    bool success = false;  // final prediction differs from the label
    double perturbation_norm = 0.0;
    double beta = 1.0;
    std::size_t nonfinite_steps = 0;
    std::size_t safeguard_fires = 0;
};

struct AttackReport {
    std::vector<SampleOutcome> samples;
    double clean_accuracy = 0.0;
    double adversarial_accuracy = 0.0;
    // Adversarial accuracy restricted to initially correct samples.
    double accuracy_among_correct = 0.0;
    std::optional<double> njs_beta;

    void write_csv(const std::filesystem::path& path) const;
    std::string summary_json(const AttackConfig& cfg) const;
};

/// Beta for the njs policy, calibrated on the first `m` correctly classified
/// samples of `data`.
double calibrate_njs(const Network& net, const Dataset& data, std::size_t m);

/// Attacks every sample. Per-sample seeds derive from (cfg.seed, index), so
/// the report does not depend on `threads`.
AttackReport evaluate_attack(const Network& net, const Dataset& data, const AttackConfig& cfg,
                             unsigned threads = 0);

/// Crafts examples on `source` and classifies them with `target`.
AttackReport evaluate_transfer(const Network& source, const Network& target, const Dataset& data,
                               const AttackConfig& cfg, unsigned threads = 0);

/// Runs f(i) for i in [0, n) on up to `threads` workers (0 = hardware).
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& f);

}  // namespace bnnprobe
