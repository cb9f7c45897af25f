#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cellgraph/graph/cell_graph.hpp"
#include "cellgraph/numerics/matrix.hpp"

namespace cellgraph::graph {

/// The message-passing view of one graph: features, weighted edges and an
/// optional virtual node. Virtual edges are not bound by the distance rules
/// of CellGraph, which is why this is a separate type.
struct GraphBlock {
    Matrix features;
    std::vector<Edge> edges;
    std::optional<std::size_t> virtual_index;

    std::size_t node_count() const noexcept { return features.rows(); }
    friend bool operator==(const GraphBlock&, const GraphBlock&) = default;
};

GraphBlock to_block(const CellGraph& g);

/// Block-diagonal merge of many graphs.
struct GraphBatch {
    Matrix features;                 // sum(n_i) x F
    SparseMatrix adjacency;          // symmetric, weights in µm
    std::vector<std::size_t> offsets;  // graph g owns rows [offsets[g], offsets[g+1])
    std::vector<std::optional<std::size_t>> virtual_nodes;  // batch-global row index

    std::size_t graph_count() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::size_t node_count() const noexcept { return features.rows(); }
    /// Batch-global rows of real (non-virtual) nodes of graph g.
    std::vector<std::size_t> real_rows(std::size_t g) const;
    bool is_virtual(std::size_t row) const;
};

GraphBatch batch_graphs(std::span<const CellGraph> graphs);
GraphBatch batch_blocks(std::span<const GraphBlock> blocks);
/// Inverse of batch_blocks. Edges come back in canonical (i, j) order.
std::vector<GraphBlock> unbatch(const GraphBatch& batch);

}  // namespace cellgraph::graph
