#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "bnnprobe/tensor.hpp"

namespace bnnprobe {

class Tape;
class Var;

/// Reverse sweep from `output` seeded with `seed`. Used by grad() and vjp().
std::vector<Var> backward_pass(const Var& output, const Tensor& seed, std::span<const Var> leaves,
                               bool create_graph);

/// Handle to a value recorded on a Tape.
///
/// A Var is only meaningful together with the Tape that produced it; it is a
/// cheap copyable (tape, index) pair. Operations on Vars from different tapes
/// are rejected.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const;
    Tape& tape() const { return *tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    friend std::vector<Var> backward_pass(const Var&, const Tensor&, std::span<const Var>, bool);
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Maps the gradient flowing into a node (and the node itself) to gradients
/// for each of its parents. Backward rules are written with taped operations,
/// so running them while the tape records yields a differentiable gradient.
using BackwardFn = std::function<std::vector<Var>(const Var& upstream, const Var& self)>;

/// Ordered record of primitive operations.
///
/// Nodes are appended in evaluation order, so reverse iteration is a valid
/// topological order for the backward sweep. One Tape belongs to one
/// execution context; it is not safe to share across threads.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Differentiable input.
    Var leaf(Tensor value);
    /// Input that never receives a gradient.
    Var constant(Tensor value);

    std::size_t size() const { return nodes_.size(); }
    /// Drop every node recorded at or after `mark`.
    void truncate(std::size_t mark);

    bool recording() const { return recording_; }

    /// Append the result of an operation. Parents and backward rule are kept
    /// only when recording and at least one parent requires a gradient.
    Var record(Tensor value, std::vector<Var> parents, BackwardFn backward);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

private:
    friend class RecordingScope;
    friend std::vector<Var> backward_pass(const Var&, const Tensor&, std::span<const Var>, bool);

    struct Node {
        Tensor value;
        std::vector<std::size_t> parents;
        BackwardFn backward;
        bool requires_grad = false;
        bool is_leaf = false;
    };

    std::deque<Node> nodes_;
    bool recording_ = true;
};

/// Temporarily switches recording on or off for a tape.
class RecordingScope {
public:
    RecordingScope(Tape& tape, bool recording) : tape_(tape), saved_(tape.recording_) {
        tape_.recording_ = recording;
    }
    ~RecordingScope() { tape_.recording_ = saved_; }
    RecordingScope(const RecordingScope&) = delete;
    RecordingScope& operator=(const RecordingScope&) = delete;

private:
    Tape& tape_;
    bool saved_;
};

// Primitive differentiable operations. Matrix arguments are 2-D.
namespace ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);
/// Sum of all entries, as a 1-element tensor.
Var sum(const Var& a);
/// Broadcast a 1-element tensor to `shape`.
Var expand(const Var& s, Shape shape);
/// [n] -> [m x n], every row a copy.
Var broadcast_rows(const Var& v, std::size_t m);
/// [m x n] -> [n], column sums.
Var sum_rows(const Var& a);
/// [m] -> [m x n], every column a copy.
Var broadcast_cols(const Var& v, std::size_t n);
/// [m x n] -> [m], row sums.
Var row_sums(const Var& a);
/// h W^T + b for a batch h [m x in], weight [out x in], bias [out].
Var affine(const Var& h, const Var& weight, const Var& bias);

Var tanh(const Var& a);
/// max(h, 0) with derivative 0 at h == 0.
Var relu(const Var& a);
/// Activation binarization: sign(h) with sign(0) = +1 and a straight-through
/// gradient passed only where |h| <= 1.
Var sign_ste(const Var& a);
/// Weight binarization: sign(w) with sign(0) = +1 and an unclipped
/// straight-through (identity) gradient.
Var binarize_ste(const Var& a);

/// Row-wise softmax of [m x d].
Var softmax(const Var& logits);

/// Precision used for the softmax/cross-entropy head.
enum class HeadPrecision { single, double_ };

/// Row-wise p - y for [m x d] logits and integer labels. In double precision
/// the true-class entry is evaluated as -(sum of the other probabilities), which
/// is exact where p_k rounds to 1. In single precision the head is evaluated
/// the way a float32 framework evaluates it (softmax in float, then p - y).
Var error_signal(const Var& logits, std::span<const int> labels,
                 HeadPrecision precision = HeadPrecision::double_);

/// Mean softmax cross-entropy over the rows of [m x d] logits.
Var softmax_cross_entropy(const Var& logits, std::span<const int> labels,
                          HeadPrecision precision = HeadPrecision::double_);

}  // namespace ops

/// Reverse-mode gradients of a scalar root with respect to `leaves`.
/// Leaves that do not influence the root receive zeros.
std::vector<Tensor> grad(const Var& root, std::span<const Var> leaves);
/// As grad(), but the returned gradients are themselves taped and can be
/// differentiated again.
std::vector<Var> grad_graph(const Var& root, std::span<const Var> leaves);

/// Vector-Jacobian product seed^T d(output)/d(leaf) for each leaf.
std::vector<Tensor> vjp(const Var& output, const Tensor& seed, std::span<const Var> leaves);
std::vector<Var> vjp_graph(const Var& output, const Tensor& seed, std::span<const Var> leaves);

}  // namespace bnnprobe
