#pragma once

#include "cellgraph/graph/batch.hpp"
#include "cellgraph/graph/cell_graph.hpp"
#include "cellgraph/numerics/matrix.hpp"

namespace cellgraph::acm {

/// D^-1 A. Rows of isolated nodes stay all-zero. Throws on negative weights
/// or a non-square matrix.
SparseMatrix random_walk(const SparseMatrix& a);

/// Low-pass (I + A_rw) / 2 and high-pass (I - A_rw) / 2; they sum to I exactly.
struct ChannelFilters {
    SparseMatrix low;
    SparseMatrix high;
};

ChannelFilters channel_filters(const SparseMatrix& a_rw);

enum class EdgeWeighting {
    distance,          // weights as stored: µm between centroids
    inverse_distance,  // 1 / distance
};

/// Filters for a whole batch.
ChannelFilters batch_filters(const graph::GraphBatch& batch, EdgeWeighting weighting = EdgeWeighting::distance);

/// Appends a zero-feature node joined to every real node with `mean_edge_weight`.
/// Its index is the old node count.
graph::GraphBlock add_virtual_node(const graph::CellGraph& g, float mean_edge_weight);

}  // namespace cellgraph::acm
