#include "bnnprobe/training.hpp"

#include <cmath>
#include <numeric>

#include "bnnprobe/error.hpp"
#include "bnnprobe/rng.hpp"

namespace bnnprobe {

void TrainConfig::validate() const {
    if (!(std::isfinite(learning_rate) && learning_rate >= 0.0)) {
        throw InvalidArgument("learning rate must be nonnegative");
    }
    if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
    if (batch_size == 0) throw InvalidArgument("batch size must be positive");
    if (adversarial) adversarial->validate();
}

double train_step(Network& net, const Tensor& batch, const std::vector<int>& labels,
                  double learning_rate) {
    if (labels.empty()) throw InvalidArgument("empty batch");
    Tape tape;
    std::vector<Var> leaves;
    for (const LayerParams& p : net.params()) {
        leaves.push_back(tape.leaf(p.weight));
        leaves.push_back(tape.leaf(p.bias));
    }
    Var x = tape.constant(batch);
    double loss_value = 0.0;
    std::vector<Tensor> grads;
    try {
        Var loss = ops::softmax_cross_entropy(net.forward(tape, x, &leaves), labels);
        loss_value = loss.value().item();
        grads = grad(loss, leaves);
    } catch (const NonFiniteError& e) {
        throw DivergenceError(std::string("training diverged: ") + e.what());
    }
    if (learning_rate == 0.0) return loss_value;

    std::vector<LayerParams> updated;
    try {
        for (std::size_t l = 0; l < net.params().size(); ++l) {
            const LayerParams& p = net.params()[l];
            updated.push_back({sub(p.weight, scale(grads[2 * l], learning_rate)),
                               sub(p.bias, scale(grads[2 * l + 1], learning_rate))});
        }
    } catch (const NonFiniteError& e) {
        throw DivergenceError(std::string("training diverged: ") + e.what());
    }
    net.set_params(std::move(updated));
    return loss_value;
}

double accuracy(const Network& net, const Dataset& data) {
    const std::vector<int> pred = net.predict(data.features);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == data.labels[i];
    return static_cast<double>(ok) / static_cast<double>(pred.size());
}

TrainTrace train(Network& net, const Dataset& data, const TrainConfig& cfg, unsigned threads) {
    cfg.validate();
    if (data.size() == 0) throw InvalidArgument("empty training set");
    if (data.input_dim() != net.input_dim()) throw ShapeError("dataset does not match network input");
    std::vector<std::size_t> counts(net.output_dim(), 0);
    for (int k : data.labels) {
        if (k < 0 || static_cast<std::size_t>(k) >= counts.size()) {
            throw InvalidArgument("label out of range for network output");
        }
        ++counts[k];
    }
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) throw InvalidArgument("class " + std::to_string(k) + " has no samples");
    }

    const std::size_t n = data.size(), dim = data.input_dim();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed);
    TrainTrace trace;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double total = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t end = std::min(n, start + cfg.batch_size);
            std::vector<double> values((end - start) * dim);
            std::vector<int> labels(end - start);
            if (cfg.adversarial) {
                parallel_for(end - start, threads, [&](std::size_t b) {
                    const std::size_t i = order[start + b];
                    const std::uint64_t s = derive_seed(derive_seed(cfg.seed, epoch + 1), i);
                    const Tensor adv =
                        perturb(net, data.sample(i), data.labels[i], *cfg.adversarial, s).x_adv;
                    std::copy(adv.begin(), adv.end(), values.begin() + b * dim);
                });
            } else {
                for (std::size_t b = 0; b < end - start; ++b) {
                    const std::size_t i = order[start + b];
                    std::copy(data.features.begin() + i * dim, data.features.begin() + (i + 1) * dim,
                              values.begin() + b * dim);
                }
            }
            for (std::size_t b = 0; b < end - start; ++b) labels[b] = data.labels[order[start + b]];
            const double loss = train_step(net, Tensor::matrix(end - start, dim, std::move(values)),
                                           labels, cfg.learning_rate);
            total += loss * static_cast<double>(end - start);
        }
        trace.epochs.push_back({epoch, total / static_cast<double>(n), accuracy(net, data)});
    }
    return trace;
}

}  // namespace bnnprobe
