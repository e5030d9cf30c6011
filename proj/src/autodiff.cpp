#include "bnnprobe/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "bnnprobe/error.hpp"

namespace bnnprobe {

const Tensor& Var::value() const {
    if (!tape_) throw InvalidArgument("use of an empty Var");
    return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

Var Tape::leaf(Tensor value) {
    Node n{std::move(value), {}, {}, true, true};
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
    Node n{std::move(value), {}, {}, false, false};
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

void Tape::truncate(std::size_t mark) {
    while (nodes_.size() > mark) nodes_.pop_back();
}

Var Tape::record(Tensor value, std::vector<Var> parents, BackwardFn backward) {
    bool needs = false;
    for (const Var& p : parents) {
        if (p.tape_ != this) throw InvalidArgument("operands recorded on different tapes");
        needs = needs || nodes_[p.id_].requires_grad;
    }
    Node n;
    n.value = std::move(value);
    if (recording_ && needs) {
        n.requires_grad = true;
        n.parents.reserve(parents.size());
        for (const Var& p : parents) n.parents.push_back(p.id_);
        n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

std::vector<Var> backward_pass(const Var& output, const Tensor& seed, std::span<const Var> leaves,
                               bool create_graph) {
    if (!output.valid()) throw InvalidArgument("backward from an empty Var");
    Tape& tape = output.tape();
    if (seed.shape() != output.shape()) {
        throw ShapeError("seed shape " + shape_string(seed.shape()) + " does not match output " +
                         shape_string(output.shape()));
    }
    for (const Var& leaf : leaves) {
        if (!leaf.valid() || &leaf.tape() != &tape || !tape.nodes_[leaf.id()].is_leaf) {
            throw InvalidArgument("gradient requested for a Var that is not a leaf of this tape");
        }
    }

    RecordingScope scope(tape, create_graph);
    std::vector<std::optional<Var>> grads(output.id() + 1);
    grads[output.id()] = tape.constant(seed);

    for (std::size_t i = output.id() + 1; i-- > 0;) {
        if (!grads[i]) continue;
        const Tape::Node& node = tape.nodes_[i];
        if (!node.requires_grad || !node.backward) continue;
        const std::vector<std::size_t> parents = node.parents;
        const Var self(&tape, i);
        std::vector<Var> pg = node.backward(*grads[i], self);
        for (std::size_t j = 0; j < parents.size(); ++j) {
            const std::size_t p = parents[j];
            if (!tape.nodes_[p].requires_grad) continue;
            if (grads[p]) {
                grads[p] = ops::add(*grads[p], pg[j]);
            } else {
                grads[p] = pg[j];
            }
        }
    }

    std::vector<Var> out;
    out.reserve(leaves.size());
    for (const Var& leaf : leaves) {
        if (leaf.id() < grads.size() && grads[leaf.id()]) {
            out.push_back(*grads[leaf.id()]);
        } else {
            out.push_back(tape.constant(Tensor::zeros(leaf.shape())));
        }
    }
    return out;
}

namespace {

std::vector<Tensor> to_tensors(const Var& output, const Tensor& seed, std::span<const Var> leaves) {
    Tape& tape = output.tape();
    const std::size_t mark = tape.size();
    std::vector<Var> g = backward_pass(output, seed, leaves, false);
    std::vector<Tensor> out;
    out.reserve(g.size());
    for (const Var& v : g) out.push_back(v.value());
    tape.truncate(mark);
    return out;
}

void require_scalar(const Var& root) {
    if (root.value().size() != 1) {
        throw ShapeError("gradient root must be scalar, got " + shape_string(root.shape()));
    }
}

}  // namespace

std::vector<Tensor> grad(const Var& root, std::span<const Var> leaves) {
    require_scalar(root);
    return to_tensors(root, Tensor::filled(root.shape(), 1.0), leaves);
}

std::vector<Var> grad_graph(const Var& root, std::span<const Var> leaves) {
    require_scalar(root);
    return backward_pass(root, Tensor::filled(root.shape(), 1.0), leaves, true);
}

std::vector<Tensor> vjp(const Var& output, const Tensor& seed, std::span<const Var> leaves) {
    return to_tensors(output, seed, leaves);
}

std::vector<Var> vjp_graph(const Var& output, const Tensor& seed, std::span<const Var> leaves) {
    return backward_pass(output, seed, leaves, true);
}

namespace ops {

namespace {

Tape& same_tape(const Var& a, const Var& b) {
    if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
        throw InvalidArgument("operands recorded on different tapes");
    }
    return a.tape();
}

void require_matrix(const Var& a, const char* op) {
    if (a.value().rank() != 2) {
        throw ShapeError(std::string(op) + " expects a 2-D operand, got " + shape_string(a.shape()));
    }
}

template <class F>
Tensor map(const Tensor& a, F f) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i]);
    return Tensor(a.shape(), std::move(out));
}

// Rows of a [m x d] matrix (or a single row for 1-D input).
std::size_t row_count(const Tensor& t) { return t.rank() == 2 ? t.rows() : 1; }
std::size_t row_width(const Tensor& t) { return t.rank() == 2 ? t.cols() : t.size(); }

void check_labels(const Tensor& z, std::span<const int> labels) {
    const std::size_t m = row_count(z), d = row_width(z);
    if (labels.size() != m) throw ShapeError("label count does not match logit rows");
    for (int k : labels) {
        if (k < 0 || static_cast<std::size_t>(k) >= d) throw InvalidArgument("label out of range");
    }
}

Var softmax_backward(const Var& up, const Var& p) {
    const std::size_t d = row_width(p.value());
    return mul(p, sub(up, broadcast_cols(row_sums(mul(up, p)), d)));
}

Tensor error_signal_value(const Tensor& z, std::span<const int> labels, HeadPrecision precision) {
    const std::size_t m = row_count(z), d = row_width(z);
    std::vector<double> out(m * d);
    for (std::size_t r = 0; r < m; ++r) {
        const double* zr = z.begin() + r * d;
        double* o = out.data() + r * d;
        const auto k = static_cast<std::size_t>(labels[r]);
        if (precision == HeadPrecision::single) {
            std::vector<float> zf(zr, zr + d);
            const float mx = *std::max_element(zf.begin(), zf.end());
            float total = 0.0f;
            for (float& v : zf) {
                v = std::exp(v - mx);
                total += v;
            }
            for (std::size_t j = 0; j < d; ++j) {
                const float p = zf[j] / total;
                o[j] = static_cast<double>(p - (j == k ? 1.0f : 0.0f));
            }
        } else {
            const double mx = *std::max_element(zr, zr + d);
            double total = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                o[j] = std::exp(zr[j] - mx);
                total += o[j];
            }
            double rest = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                o[j] /= total;
                if (j != k) rest += o[j];
            }
            o[k] = -rest;
        }
    }
    return Tensor(z.shape(), std::move(out));
}

double cross_entropy_row(const double* zr, std::size_t d, std::size_t k, HeadPrecision precision) {
    if (precision == HeadPrecision::single) {
        std::vector<float> zf(zr, zr + d);
        const float mx = *std::max_element(zf.begin(), zf.end());
        float total = 0.0f;
        for (float v : zf) total += std::exp(v - mx);
        return static_cast<double>(std::log(total) - (zf[k] - mx));
    }
    const double mx = *std::max_element(zr, zr + d);
    if (zr[k] == mx) {
        // log(1 + sum_{j != k} e^{z_j - z_k}) keeps precision when p_k ~ 1.
        double rest = 0.0;
        for (std::size_t j = 0; j < d; ++j)
            if (j != k) rest += std::exp(zr[j] - mx);
        return std::log1p(rest);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) total += std::exp(zr[j] - mx);
    return (mx - zr[k]) + std::log(total);
}

}  // namespace

Var add(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b);
    return t.record(bnnprobe::add(a.value(), b.value()), {a, b},
                    [](const Var& up, const Var&) { return std::vector<Var>{up, up}; });
}

Var sub(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b);
    return t.record(bnnprobe::sub(a.value(), b.value()), {a, b},
                    [](const Var& up, const Var&) { return std::vector<Var>{up, scale(up, -1.0)}; });
}

Var mul(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b);
    return t.record(hadamard(a.value(), b.value()), {a, b}, [a, b](const Var& up, const Var&) {
        return std::vector<Var>{mul(up, b), mul(up, a)};
    });
}

Var scale(const Var& a, double c) {
    return a.tape().record(bnnprobe::scale(a.value(), c), {a}, [c](const Var& up, const Var&) {
        return std::vector<Var>{scale(up, c)};
    });
}

Var matmul(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b);
    return t.record(bnnprobe::matmul(a.value(), b.value()), {a, b},
                    [a, b](const Var& up, const Var&) {
                        return std::vector<Var>{matmul(up, transpose(b)), matmul(transpose(a), up)};
                    });
}

Var transpose(const Var& a) {
    require_matrix(a, "transpose");
    return a.tape().record(bnnprobe::transpose(a.value()), {a}, [](const Var& up, const Var&) {
        return std::vector<Var>{transpose(up)};
    });
}

Var reshape(const Var& a, Shape shape) {
    const Shape original = a.shape();
    return a.tape().record(a.value().reshaped(std::move(shape)), {a},
                           [original](const Var& up, const Var&) {
                               return std::vector<Var>{reshape(up, original)};
                           });
}

Var sum(const Var& a) {
    const Shape original = a.shape();
    return a.tape().record(Tensor::scalar(bnnprobe::sum(a.value())), {a},
                           [original](const Var& up, const Var&) {
                               return std::vector<Var>{expand(up, original)};
                           });
}

Var expand(const Var& s, Shape shape) {
    if (s.value().size() != 1) throw ShapeError("expand expects a single-element tensor");
    const Shape original = s.shape();
    Tensor value = Tensor::filled(std::move(shape), s.value()[0]);
    return s.tape().record(std::move(value), {s}, [original](const Var& up, const Var&) {
        return std::vector<Var>{reshape(sum(up), original)};
    });
}

Var broadcast_rows(const Var& v, std::size_t m) {
    const Tensor& val = v.value();
    const std::size_t n = val.size();
    std::vector<double> out(m * n);
    for (std::size_t r = 0; r < m; ++r) std::copy(val.begin(), val.end(), out.begin() + r * n);
    const Shape original = v.shape();
    return v.tape().record(Tensor::matrix(m, n, std::move(out)), {v},
                           [original](const Var& up, const Var&) {
                               return std::vector<Var>{reshape(sum_rows(up), original)};
                           });
}

Var sum_rows(const Var& a) {
    require_matrix(a, "sum_rows");
    const Tensor& val = a.value();
    const std::size_t m = val.rows(), n = val.cols();
    std::vector<double> out(n, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) out[c] += val[r * n + c];
    return a.tape().record(Tensor::vector(std::move(out)), {a}, [m](const Var& up, const Var&) {
        return std::vector<Var>{broadcast_rows(up, m)};
    });
}

Var broadcast_cols(const Var& v, std::size_t n) {
    const Tensor& val = v.value();
    const std::size_t m = val.size();
    std::vector<double> out(m * n);
    for (std::size_t r = 0; r < m; ++r)
        std::fill(out.begin() + r * n, out.begin() + (r + 1) * n, val[r]);
    const Shape original = v.shape();
    return v.tape().record(Tensor::matrix(m, n, std::move(out)), {v},
                           [original](const Var& up, const Var&) {
                               return std::vector<Var>{reshape(row_sums(up), original)};
                           });
}

Var row_sums(const Var& a) {
    require_matrix(a, "row_sums");
    const Tensor& val = a.value();
    const std::size_t m = val.rows(), n = val.cols();
    std::vector<double> out(m, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) out[r] += val[r * n + c];
    return a.tape().record(Tensor::vector(std::move(out)), {a}, [n](const Var& up, const Var&) {
        return std::vector<Var>{broadcast_cols(up, n)};
    });
}

Var affine(const Var& h, const Var& weight, const Var& bias) {
    require_matrix(h, "affine");
    return add(matmul(h, transpose(weight)), broadcast_rows(bias, h.value().rows()));
}

Var tanh(const Var& a) {
    return a.tape().record(map(a.value(), [](double x) { return std::tanh(x); }), {a},
                           [](const Var& up, const Var& self) {
                               Var ones = self.tape().constant(Tensor::filled(self.shape(), 1.0));
                               return std::vector<Var>{mul(up, sub(ones, mul(self, self)))};
                           });
}

Var relu(const Var& a) {
    return a.tape().record(map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }), {a},
                           [a](const Var& up, const Var&) {
                               Var mask = a.tape().constant(
                                   map(a.value(), [](double x) { return x > 0.0 ? 1.0 : 0.0; }));
                               return std::vector<Var>{mul(up, mask)};
                           });
}

Var sign_ste(const Var& a) {
    return a.tape().record(map(a.value(), [](double x) { return x >= 0.0 ? 1.0 : -1.0; }), {a},
                           [a](const Var& up, const Var&) {
                               Var window = a.tape().constant(map(
                                   a.value(), [](double x) { return std::abs(x) <= 1.0 ? 1.0 : 0.0; }));
                               return std::vector<Var>{mul(up, window)};
                           });
}

Var binarize_ste(const Var& a) {
    return a.tape().record(map(a.value(), [](double x) { return x >= 0.0 ? 1.0 : -1.0; }), {a},
                           [](const Var& up, const Var&) { return std::vector<Var>{up}; });
}

Var softmax(const Var& logits) {
    const Tensor& z = logits.value();
    const std::size_t m = row_count(z), d = row_width(z);
    std::vector<double> out(m * d);
    for (std::size_t r = 0; r < m; ++r) {
        const double* zr = z.begin() + r * d;
        const double mx = *std::max_element(zr, zr + d);
        double total = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            out[r * d + j] = std::exp(zr[j] - mx);
            total += out[r * d + j];
        }
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] /= total;
    }
    return logits.tape().record(Tensor(z.shape(), std::move(out)), {logits},
                                [](const Var& up, const Var& self) {
                                    return std::vector<Var>{softmax_backward(up, self)};
                                });
}

Var error_signal(const Var& logits, std::span<const int> labels, HeadPrecision precision) {
    require_matrix(logits, "error_signal");
    check_labels(logits.value(), labels);
    return logits.tape().record(error_signal_value(logits.value(), labels, precision), {logits},
                                [logits](const Var& up, const Var&) {
                                    return std::vector<Var>{softmax_backward(up, softmax(logits))};
                                });
}

Var softmax_cross_entropy(const Var& logits, std::span<const int> labels, HeadPrecision precision) {
    require_matrix(logits, "softmax_cross_entropy");
    const Tensor& z = logits.value();
    check_labels(z, labels);
    const std::size_t m = z.rows(), d = z.cols();
    double total = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        total += cross_entropy_row(z.begin() + r * d, d, static_cast<std::size_t>(labels[r]),
                                   precision);
    }
    std::vector<int> owned(labels.begin(), labels.end());
    return logits.tape().record(
        Tensor::scalar(total / static_cast<double>(m)), {logits},
        [logits, owned = std::move(owned), precision, m, d](const Var& up, const Var&) {
            Var per_row = expand(scale(up, 1.0 / static_cast<double>(m)), {m, d});
            return std::vector<Var>{mul(per_row, error_signal(logits, owned, precision))};
        });
}

}  // namespace ops

}  // namespace bnnprobe
