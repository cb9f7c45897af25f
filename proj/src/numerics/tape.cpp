#include "cellgraph/numerics/tape.hpp"

#include <algorithm>
#include <cmath>

namespace cellgraph {

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, false, false, {}});
    return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, true, false, {}});
    return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
    if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
    Var v = variable(p.value);
    bound_.emplace(&p, v.id());
    return v;
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
    return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(Matrix value, const std::vector<Var>& inputs, Backward backward) {
    bool needs = false;
    for (const Var& in : inputs) {
        if (&in.tape() != this) throw std::logic_error("tape: input recorded on a different tape");
        needs = needs || nodes_[in.id()].needs_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, needs, false, needs ? std::move(backward) : Backward{}});
    return Var(this, nodes_.size() - 1);
}

Matrix& Tape::grad_slot(Var v) {
    Node& n = nodes_[v.id()];
    if (!n.has_grad) {
        n.grad = Matrix(n.value.rows(), n.value.cols());
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
    Node& n = nodes_[v.id()];
    if (!n.needs_grad) return;
    if (!g.same_shape(n.value))
        throw ShapeError("tape: gradient shape " + shape_string(g) + " != value shape " + shape_string(n.value));
    Matrix& slot = grad_slot(v);
    auto& d = slot.data();
    const auto& s = g.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void Tape::backward(Var loss) {
    const Node& root = nodes_[loss.id()];
    if (root.value.rows() != 1 || root.value.cols() != 1)
        throw ShapeError("backward: loss must be 1x1, got " + shape_string(root.value));
    if (!std::isfinite(root.value(0, 0))) throw NumericalError("backward: loss is not finite");
    for (Node& n : nodes_) {
        n.grad = Matrix();
        n.has_grad = false;
    }
    if (!root.needs_grad) return;
    grad_slot(loss)(0, 0) = 1.0f;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.has_grad) continue;
        if (!n.grad.all_finite()) throw NumericalError("backward: non-finite gradient at node " + std::to_string(id));
        if (!n.backward) continue;
        // callbacks only touch inputs, which precede this node
        Matrix g = std::move(n.grad);
        n.backward(*this, g);
        nodes_[id].grad = std::move(g);
    }
}

Matrix Tape::grad(Var v) const {
    const Node& n = nodes_[v.id()];
    if (n.has_grad) return n.grad;
    return Matrix(n.value.rows(), n.value.cols());
}

Matrix Tape::grad(const Parameter& p) const {
    auto it = bound_.find(&p);
    if (it == bound_.end()) return Matrix(p.value.rows(), p.value.cols());
    return grad(Var(const_cast<Tape*>(this), it->second));
}

std::vector<Matrix> gradients(Tape& tape, Var loss, const std::vector<Parameter*>& params) {
    tape.backward(loss);
    std::vector<Matrix> out;
    out.reserve(params.size());
    for (const Parameter* p : params) {
        Matrix g = tape.grad(*p);
        if (!g.all_finite()) throw NumericalError("gradient of '" + p->name + "' is not finite");
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace cellgraph
