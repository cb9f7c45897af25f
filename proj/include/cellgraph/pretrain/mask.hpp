#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "cellgraph/graph/batch.hpp"
#include "cellgraph/numerics/rng.hpp"
#include "cellgraph/numerics/tape.hpp"

namespace cellgraph::pretrain {

/// One corrupted node: overwritten by the mask token, or by the original
/// features of `source` when set.
struct MaskedNode {
    std::size_t node = 0;
    std::optional<std::size_t> source;
    friend bool operator==(const MaskedNode&, const MaskedNode&) = default;
};

struct MaskPlan {
    std::vector<MaskedNode> nodes;  // ascending by node

    bool empty() const noexcept { return nodes.empty(); }
    std::vector<std::size_t> rows() const;
    friend bool operator==(const MaskPlan&, const MaskPlan&) = default;
};

/// Masks exactly round(mask_ratio * n_real) of nodes 0..n_real-1, sampled
/// uniformly without replacement; each masked node independently becomes a
/// random replacement with probability `replace_ratio`, copying another node
/// chosen uniformly. With a single node there is no other node to copy, so
/// it keeps the token.
MaskPlan make_mask_plan(std::size_t n_real, double mask_ratio, double replace_ratio, Rng& rng);

/// Per-graph plans over a batch, in batch-global rows. Virtual nodes are never
/// masked and never used as replacement sources.
MaskPlan make_batch_mask_plan(const graph::GraphBatch& batch, double mask_ratio, double replace_ratio, Rng& rng);

/// Corrupted copy of `x` (no gradient) with token rows taken from `token`
/// (which does get a gradient).
Var apply_mask(Tape& tape, const Matrix& x, const MaskPlan& plan, Var token);
Matrix apply_mask(const Matrix& x, const MaskPlan& plan, const Matrix& token);

/// Mean over `rows` of (1 - cos(x_v, h_v))^gamma. A row with zero norm on
/// either side contributes 1; `zero_rows` receives how many did.
Var sce_loss(Var x, Var h, const std::vector<std::size_t>& rows, double gamma, std::size_t* zero_rows = nullptr);

}  // namespace cellgraph::pretrain
