#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cellgraph/construct/predicates.hpp"
#include "cellgraph/graph/cell_graph.hpp"

namespace cellgraph::construct {

using IndexPair = std::pair<std::uint32_t, std::uint32_t>;

/// Edge set of the Delaunay triangulation, as sorted (i < j) index pairs.
///
/// Coincident points are merged: each copy receives the edges of the first
/// occurrence and no edge to it. If every point lies on one line the result
/// is the chain of consecutive points along that line. Cocircular subsets
/// get one of the valid triangulations.
std::vector<IndexPair> delaunay(std::span<const Vec2> points);

/// Keeps edges shorter than 100 µm and weights them by their length.
std::vector<graph::Edge> prune_and_weight(std::span<const IndexPair> edges, std::span<const Vec2> centroids_um);

}  // namespace cellgraph::construct
