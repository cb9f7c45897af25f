#include "cellgraph/graph/cell_graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

namespace cellgraph::graph {

void CellGraph::validate() const {
    const std::size_t n = node_count();
    if (features.rows() != n)
        throw std::invalid_argument("cell graph: " + std::to_string(features.rows()) + " feature rows for " +
                                    std::to_string(n) + " nodes");
    if (!features.all_finite()) throw std::invalid_argument("cell graph: non-finite feature");
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const Edge& e : edges) {
        if (e.i >= n || e.j >= n) throw std::invalid_argument("cell graph: edge endpoint out of range");
        if (e.i == e.j) throw std::invalid_argument("cell graph: self-loop");
        if (e.i > e.j) throw std::invalid_argument("cell graph: edge not stored as i < j");
        if (!seen.emplace(e.i, e.j).second) throw std::invalid_argument("cell graph: duplicate edge");
        if (!(e.weight > 0.0f) || !(e.weight < kMaxEdgeLengthUm))
            throw std::invalid_argument("cell graph: edge weight " + std::to_string(e.weight) + " outside (0, 100)");
        const double dx = static_cast<double>(positions[e.i].x) - positions[e.j].x;
        const double dy = static_cast<double>(positions[e.i].y) - positions[e.j].y;
        if (std::abs(std::hypot(dx, dy) - e.weight) > 1e-4)
            throw std::invalid_argument("cell graph: edge weight disagrees with endpoint distance");
    }
    if (node_labels && node_labels->size() != n) throw std::invalid_argument("cell graph: node label count != n");
    if (survival && !(survival->time_days > 0.0f)) throw std::invalid_argument("cell graph: survival time must be > 0");
}

void canonicalize_edges(std::vector<Edge>& edges) {
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
}

double edge_homophily(const CellGraph& g) {
    if (!g.node_labels) throw std::invalid_argument("edge_homophily: graph has no node labels");
    if (g.edges.empty()) return 0.0;
    std::size_t same = 0;
    for (const Edge& e : g.edges) same += (*g.node_labels)[e.i] == (*g.node_labels)[e.j] ? 1 : 0;
    return static_cast<double>(same) / static_cast<double>(g.edges.size());
}

}  // namespace cellgraph::graph
