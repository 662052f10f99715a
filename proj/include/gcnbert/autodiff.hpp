#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gcnbert/tensor.hpp"

namespace gcnbert {

/// A named learnable tensor. Models own their parameters; tapes borrow them.
struct Parameter {
    std::string name;
    Tensor value;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t id() const noexcept { return id_; }
    Tape& tape() const { return *tape_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Ordered record of primitive operations. Backward replays the record in
/// exact reverse order and accumulates gradients into per-node buffers.
///
/// A tape is confined to one thread. Parameters registered with parameter()
/// are read, never written, so several tapes may share one parameter set.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const noexcept { return recording_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    Var constant(Tensor value);
    Var leaf(Tensor value);
    Var parameter(const Parameter& p);

    // Root must hold exactly one element; its gradient is seeded with 1.
    void backward(Var root);

    // Gradient w.r.t. a node; zeros of the node's shape if nothing flowed in.
    Tensor gradient(Var v) const;
    std::optional<Tensor> gradient_of(const Parameter& p) const;

    // Node ids in the order backward() visited them.
    const std::vector<std::size_t>& backward_order() const noexcept { return backward_order_; }

    // Primitive-op plumbing.
    Var record(std::string op, Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);
    const Tensor& value(std::size_t id) const;
    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
    const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
    Tensor& grad_buffer(std::size_t id);
    const std::string& op_name(std::size_t id) const { return nodes_[id].op; }

private:
    struct Node {
        std::string op;
        Tensor value;
        const Tensor* borrowed = nullptr;
        const Parameter* param = nullptr;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        Tensor grad;
        bool needs_grad = false;
    };

    bool recording_;
    std::vector<Node> nodes_;
    std::vector<std::size_t> backward_order_;
};

// ---- primitive operations -------------------------------------------------
// All binary elementwise ops require identical shapes; the only implicit
// broadcast is scale() by a compile-time scalar and add_bias() along rows.

Var matmul(Var a, Var b);
Var transpose(Var a);
// For a of shape m×k and x of shape T×k×n returns T×m×n with out[t] = a·x[t].
Var matmul_each(Var a, Var x);
Var reshape(Var a, Shape shape);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, Real factor);
Var tanh(Var a);
Var gelu(Var a);
// x: n×d (or d), bias: d. Adds bias to every row.
Var add_bias(Var x, Var bias);

Var softmax(Var x, std::size_t axis);
Var reduce_mean(Var x, std::size_t axis);
Var sum(Var x);
Var concat(Var a, Var b, std::size_t axis);
// Rows [begin, end) along axis 0.
Var rows(Var x, std::size_t begin, std::size_t end);
// Normalizes each row of an n×d tensor; gamma and beta have shape d.
Var layer_norm(Var x, Var gamma, Var beta, Real eps = Real(1e-5));
// -log softmax(logits)[target] for a rank-1 logits vector; returns shape {1}.
Var cross_entropy(Var logits, std::size_t target);

// Scalar helpers shared with tests.
Real gelu_value(Real x);
Real gelu_derivative(Real x);

}  // namespace gcnbert
