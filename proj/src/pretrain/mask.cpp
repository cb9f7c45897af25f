#include "cellgraph/pretrain/mask.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cellgraph/numerics/ops.hpp"

namespace cellgraph::pretrain {

std::vector<std::size_t> MaskPlan::rows() const {
    std::vector<std::size_t> out;
    out.reserve(nodes.size());
    for (const auto& m : nodes) out.push_back(m.node);
    return out;
}

MaskPlan make_mask_plan(std::size_t n_real, double mask_ratio, double replace_ratio, Rng& rng) {
    if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0)) throw std::invalid_argument("mask ratio must lie in [0, 1]");
    if (!(replace_ratio >= 0.0 && replace_ratio <= 1.0)) throw std::invalid_argument("replace ratio must lie in [0, 1]");
    const auto count = static_cast<std::size_t>(std::lround(mask_ratio * static_cast<double>(n_real)));
    std::vector<std::size_t> picked = rng.sample_without_replacement(n_real, std::min(count, n_real));
    MaskPlan plan;
    for (auto node : picked) {
        MaskedNode m{node, std::nullopt};
        if (n_real > 1 && rng.bernoulli(replace_ratio)) {
            // uniform over the other n_real - 1 nodes
            std::size_t s = static_cast<std::size_t>(rng.index(n_real - 1));
            if (s >= node) ++s;
            m.source = s;
        }
        plan.nodes.push_back(m);
    }
    std::sort(plan.nodes.begin(), plan.nodes.end(), [](const auto& a, const auto& b) { return a.node < b.node; });
    return plan;
}

MaskPlan make_batch_mask_plan(const graph::GraphBatch& batch, double mask_ratio, double replace_ratio, Rng& rng) {
    MaskPlan plan;
    for (std::size_t g = 0; g < batch.graph_count(); ++g) {
        const auto rows = batch.real_rows(g);
        const MaskPlan local = make_mask_plan(rows.size(), mask_ratio, replace_ratio, rng);
        for (const auto& m : local.nodes) {
            MaskedNode global{rows[m.node], std::nullopt};
            if (m.source) global.source = rows[*m.source];
            plan.nodes.push_back(global);
        }
    }
    std::sort(plan.nodes.begin(), plan.nodes.end(), [](const auto& a, const auto& b) { return a.node < b.node; });
    return plan;
}

namespace {

Matrix replaced_copy(const Matrix& x, const MaskPlan& plan, std::vector<std::size_t>& token_rows) {
    Matrix out = x;
    for (const auto& m : plan.nodes) {
        if (m.node >= x.rows() || (m.source && *m.source >= x.rows()))
            throw std::out_of_range("apply_mask: plan row out of range for " + shape_string(x));
        if (m.source) {
            const auto src = x.row(*m.source);
            std::copy(src.begin(), src.end(), out.row(m.node).begin());
        } else {
            token_rows.push_back(m.node);
        }
    }
    return out;
}

}  // namespace

Var apply_mask(Tape& tape, const Matrix& x, const MaskPlan& plan, Var token) {
    std::vector<std::size_t> token_rows;
    Matrix replaced = replaced_copy(x, plan, token_rows);
    Var base = tape.constant(std::move(replaced));
    if (token_rows.empty()) return base;
    return ops::replace_rows(base, token_rows, token);
}

Matrix apply_mask(const Matrix& x, const MaskPlan& plan, const Matrix& token) {
    if (token.rows() != 1 || token.cols() != x.cols()) throw ShapeError("apply_mask: token must be 1x" + std::to_string(x.cols()));
    std::vector<std::size_t> token_rows;
    Matrix out = replaced_copy(x, plan, token_rows);
    for (auto r : token_rows) std::copy(token.data().begin(), token.data().end(), out.row(r).begin());
    return out;
}

Var sce_loss(Var x, Var h, const std::vector<std::size_t>& rows, double gamma, std::size_t* zero_rows) {
    if (rows.empty()) throw std::invalid_argument("sce_loss: no masked nodes");
    if (!(gamma >= 1.0)) throw std::invalid_argument("sce_loss: gamma must be >= 1");
    const Var cos = ops::cosine_rows(ops::gather_rows(x, rows), ops::gather_rows(h, rows), zero_rows);
    const Var err = ops::add_scalar(ops::scale(cos, -1.0f), 1.0f);
    const Var loss = ops::mean(gamma == 1.0 ? err : ops::pow(err, static_cast<float>(gamma)));
    if (!std::isfinite(loss.value()(0, 0))) throw NumericalError("sce_loss: loss is not finite");
    return loss;
}

}  // namespace cellgraph::pretrain
