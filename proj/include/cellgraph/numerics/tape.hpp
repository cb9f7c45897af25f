#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cellgraph/numerics/matrix.hpp"

namespace cellgraph {

/// Raised when a NaN or infinity shows up in a loss or a backward pass.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Named trainable tensor. Owned by models; bound to a Tape per step.
struct Parameter {
    std::string name;
    Matrix value;
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Matrix& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    Tape& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order,
/// so reverse recording order is a valid topological order for backward.
class Tape {
public:
    using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    /// Leaf that receives a gradient.
    Var variable(Matrix value);
    /// Binds a model parameter; repeated binds return the same node.
    Var parameter(Parameter& p);

    /// Records an op. `inputs` decide whether the result needs a gradient.
    Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
    Var record(Matrix value, const std::vector<Var>& inputs, Backward backward);

    /// Runs the reverse sweep from a 1x1 loss. Each node is visited once.
    void backward(Var loss);

    /// Gradient of a node after backward(); zero-filled when unreached.
    Matrix grad(Var v) const;
    /// Gradient for a bound parameter; zeros if the parameter never touched the loss.
    Matrix grad(const Parameter& p) const;

    bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }
    /// Adds `g` into the gradient slot of `v` (no-op if v needs no gradient).
    void accumulate(Var v, const Matrix& g);
    /// Mutable gradient slot, allocated on first use.
    Matrix& grad_slot(Var v);

    const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool needs_grad = false;
        bool has_grad = false;
        Backward backward;
    };
    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, std::size_t> bound_;
};

/// Gradients of `loss` with respect to each parameter, in the given order.
std::vector<Matrix> gradients(Tape& tape, Var loss, const std::vector<Parameter*>& params);

}  // namespace cellgraph
