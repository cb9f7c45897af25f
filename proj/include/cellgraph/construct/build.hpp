#pragma once

#include <cstdint>
#include <map>

#include "cellgraph/construct/image.hpp"
#include "cellgraph/graph/cell_graph.hpp"

namespace cellgraph::construct {

/// Cell graph of one image: descriptor features, centroid positions, pruned
/// Delaunay edges weighted by centroid distance. Node k is the k-th smallest
/// instance id. Deterministic.
graph::CellGraph build_cell_graph(const RgbImage& image, const InstanceMask& mask,
                                  const std::map<std::uint32_t, double>& probabilities = {},
                                  float magnification = 20.0f);

}  // namespace cellgraph::construct
