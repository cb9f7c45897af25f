#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cellgraph/numerics/matrix.hpp"

namespace cellgraph::graph {

/// Edges at or beyond this distance (µm) are never stored.
inline constexpr double kMaxEdgeLengthUm = 100.0;

struct Point {
    float x = 0.0f;  // µm
    float y = 0.0f;  // µm
    friend bool operator==(const Point&, const Point&) = default;
};

struct Edge {
    std::uint32_t i = 0;
    std::uint32_t j = 0;
    float weight = 0.0f;  // µm
    friend bool operator==(const Edge&, const Edge&) = default;
};

struct SurvivalInfo {
    float time_days = 0.0f;
    bool event = false;
    friend bool operator==(const SurvivalInfo&, const SurvivalInfo&) = default;
};

/// Attributed, distance-weighted undirected graph of one tissue patch.
/// Node order is the cell-detection order and is canonical.
struct CellGraph {
    Matrix features;               // n x F
    std::vector<Point> positions;  // n
    std::vector<Edge> edges;       // i < j, each pair once
    std::optional<std::vector<std::uint32_t>> node_labels;
    std::optional<std::uint32_t> graph_label;
    std::optional<SurvivalInfo> survival;
    float magnification = 20.0f;

    std::size_t node_count() const noexcept { return positions.size(); }
    std::size_t feature_dim() const noexcept { return features.cols(); }

    /// Throws std::invalid_argument naming the first broken invariant.
    void validate() const;

    friend bool operator==(const CellGraph&, const CellGraph&) = default;
};

/// Sorts edges by (i, j).
void canonicalize_edges(std::vector<Edge>& edges);

/// Fraction of edges whose endpoints share a node label.
double edge_homophily(const CellGraph& g);

}  // namespace cellgraph::graph
