#include "cellgraph/acm/filters.hpp"

#include <stdexcept>

namespace cellgraph::acm {

SparseMatrix random_walk(const SparseMatrix& a) {
    if (a.rows() != a.cols()) throw ShapeError("random_walk: adjacency must be square, got " + std::to_string(a.rows()) +
                                               "x" + std::to_string(a.cols()));
    const auto& ptr = a.row_ptr();
    const auto& val = a.values();
    std::vector<float> scaled(val.size());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double degree = 0.0;
        for (auto k = ptr[r]; k < ptr[r + 1]; ++k) {
            if (val[k] < 0.0f) throw std::invalid_argument("random_walk: negative edge weight");
            degree += val[k];
        }
        for (auto k = ptr[r]; k < ptr[r + 1]; ++k) scaled[k] = static_cast<float>(val[k] / degree);
    }
    return SparseMatrix::from_csr(a.rows(), a.cols(), ptr, a.col_idx(), std::move(scaled));
}

ChannelFilters channel_filters(const SparseMatrix& a_rw) {
    if (a_rw.rows() != a_rw.cols()) throw ShapeError("channel_filters: matrix must be square");
    std::vector<Triplet> low, high;
    const auto& ptr = a_rw.row_ptr();
    for (std::uint32_t r = 0; r < a_rw.rows(); ++r) {
        low.push_back({r, r, 0.5f});
        high.push_back({r, r, 0.5f});
        for (auto k = ptr[r]; k < ptr[r + 1]; ++k) {
            const std::uint32_t c = a_rw.col_idx()[k];
            // halving is exact, so the two filters cancel off the diagonal bit for bit
            const float half = a_rw.values()[k] * 0.5f;
            low.push_back({r, c, half});
            high.push_back({r, c, -half});
        }
    }
    return {SparseMatrix::from_triplets(a_rw.rows(), a_rw.cols(), std::move(low)),
            SparseMatrix::from_triplets(a_rw.rows(), a_rw.cols(), std::move(high))};
}

ChannelFilters batch_filters(const graph::GraphBatch& batch, EdgeWeighting weighting) {
    if (weighting == EdgeWeighting::distance) return channel_filters(random_walk(batch.adjacency));
    std::vector<float> inv = batch.adjacency.values();
    for (auto& w : inv) w = 1.0f / w;
    const SparseMatrix a = SparseMatrix::from_csr(batch.adjacency.rows(), batch.adjacency.cols(),
                                                  batch.adjacency.row_ptr(), batch.adjacency.col_idx(), std::move(inv));
    return channel_filters(random_walk(a));
}

graph::GraphBlock add_virtual_node(const graph::CellGraph& g, float mean_edge_weight) {
    if (!(mean_edge_weight > 0.0f)) throw std::invalid_argument("add_virtual_node: mean edge weight must be positive");
    graph::GraphBlock b;
    const std::size_t n = g.node_count();
    b.features = Matrix(n + 1, g.feature_dim());
    std::copy(g.features.data().begin(), g.features.data().end(), b.features.data().begin());
    b.edges = g.edges;
    for (std::size_t i = 0; i < n; ++i)
        b.edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(n), mean_edge_weight});
    b.virtual_index = n;
    return b;
}

}  // namespace cellgraph::acm
