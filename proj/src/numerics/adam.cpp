#include "cellgraph/numerics/adam.hpp"

#include <cmath>

namespace cellgraph {

void Adam::step(const std::vector<Parameter*>& params, const std::vector<Matrix>& grads) {
    if (params.size() != grads.size()) throw ShapeError("adam: parameter/gradient count mismatch");
    if (m_.empty()) {
        for (const Parameter* p : params) {
            m_.emplace_back(p->value.rows(), p->value.cols());
            v_.emplace_back(p->value.rows(), p->value.cols());
        }
    }
    if (m_.size() != params.size()) throw ShapeError("adam: parameter list changed between steps");
    ++step_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    const double lr = config_.learning_rate;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& w = params[k]->value;
        const Matrix& g = grads[k];
        if (!w.same_shape(g) || !w.same_shape(m_[k]))
            throw ShapeError("adam: shape mismatch for '" + params[k]->name + "'");
        auto& wd = w.data();
        auto& md = m_[k].data();
        auto& vd = v_[k].data();
        for (std::size_t i = 0; i < wd.size(); ++i) {
            double gi = g.data()[i];
            if (config_.weight_decay != 0.0f) gi += config_.weight_decay * static_cast<double>(wd[i]);
            const double m = b1 * md[i] + (1.0 - b1) * gi;
            const double v = b2 * vd[i] + (1.0 - b2) * gi * gi;
            md[i] = static_cast<float>(m);
            vd[i] = static_cast<float>(v);
            const double mhat = m / c1;
            const double vhat = v / c2;
            wd[i] = static_cast<float>(wd[i] - lr * mhat / (std::sqrt(vhat) + config_.epsilon));
        }
    }
}

void Adam::restore(std::uint64_t step, std::vector<Matrix> m, std::vector<Matrix> v) {
    if (m.size() != v.size()) throw ShapeError("adam: moment list sizes differ");
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace cellgraph
