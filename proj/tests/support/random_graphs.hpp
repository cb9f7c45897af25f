#pragma once

#include <cmath>

#include "cellgraph/graph/cell_graph.hpp"
#include "cellgraph/numerics/init.hpp"
#include "cellgraph/numerics/rng.hpp"

namespace cellgraph::testing {

/// n nodes scattered in a 120 µm square, features N(0,1), edges between
/// every pair closer than 45 µm.
inline graph::CellGraph random_cell_graph(std::size_t n, std::size_t f, std::uint64_t seed) {
    Rng rng(seed);
    graph::CellGraph g;
    g.features = normal_matrix(n, f, rng);
    for (std::size_t i = 0; i < n; ++i)
        g.positions.push_back({static_cast<float>(rng.uniform(0, 120)), static_cast<float>(rng.uniform(0, 120))});
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = i + 1; j < n; ++j) {
            const double d = std::hypot(static_cast<double>(g.positions[i].x) - g.positions[j].x,
                                        static_cast<double>(g.positions[i].y) - g.positions[j].y);
            if (d > 0.0 && d < 45.0) g.edges.push_back({i, j, static_cast<float>(d)});
        }
    return g;
}

}  // namespace cellgraph::testing
