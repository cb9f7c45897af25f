#include "cellgraph/graph/batch.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace cellgraph::graph {

GraphBlock to_block(const CellGraph& g) {
    GraphBlock b{g.features, g.edges, std::nullopt};
    canonicalize_edges(b.edges);
    return b;
}

std::vector<std::size_t> GraphBatch::real_rows(std::size_t g) const {
    std::vector<std::size_t> rows;
    rows.reserve(offsets[g + 1] - offsets[g]);
    for (std::size_t r = offsets[g]; r < offsets[g + 1]; ++r)
        if (!virtual_nodes[g] || *virtual_nodes[g] != r) rows.push_back(r);
    return rows;
}

bool GraphBatch::is_virtual(std::size_t row) const {
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), row);
    const auto g = static_cast<std::size_t>(it - offsets.begin()) - 1;
    return virtual_nodes[g] && *virtual_nodes[g] == row;
}

GraphBatch batch_graphs(std::span<const CellGraph> graphs) {
    std::vector<GraphBlock> blocks;
    blocks.reserve(graphs.size());
    for (const CellGraph& g : graphs) blocks.push_back(to_block(g));
    return batch_blocks(blocks);
}

GraphBatch batch_blocks(std::span<const GraphBlock> blocks) {
    if (blocks.empty()) throw std::invalid_argument("batch_graphs: empty graph list");
    const std::size_t f = blocks.front().features.cols();
    std::size_t total = 0;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        if (blocks[k].features.cols() != f)
            throw std::invalid_argument("batch_graphs: graph " + std::to_string(k) + " has feature dimension " +
                                        std::to_string(blocks[k].features.cols()) + ", expected " + std::to_string(f));
        total += blocks[k].node_count();
    }
    GraphBatch batch;
    batch.features = Matrix(total, f);
    batch.offsets.reserve(blocks.size() + 1);
    batch.offsets.push_back(0);
    std::vector<Triplet> triplets;
    std::size_t off = 0;
    for (const GraphBlock& b : blocks) {
        std::copy(b.features.data().begin(), b.features.data().end(), batch.features.data().begin() + off * f);
        for (const Edge& e : b.edges) {
            if (e.i >= b.node_count() || e.j >= b.node_count() || e.i == e.j)
                throw std::invalid_argument("batch_graphs: invalid edge");
            const auto gi = static_cast<std::uint32_t>(off + e.i);
            const auto gj = static_cast<std::uint32_t>(off + e.j);
            triplets.push_back({gi, gj, e.weight});
            triplets.push_back({gj, gi, e.weight});
        }
        batch.virtual_nodes.push_back(b.virtual_index ? std::optional<std::size_t>(off + *b.virtual_index)
                                                      : std::nullopt);
        off += b.node_count();
        batch.offsets.push_back(off);
    }
    batch.adjacency = SparseMatrix::from_triplets(total, total, std::move(triplets));
    return batch;
}

std::vector<GraphBlock> unbatch(const GraphBatch& batch) {
    std::vector<GraphBlock> out;
    const std::size_t f = batch.features.cols();
    const auto& rp = batch.adjacency.row_ptr();
    const auto& ci = batch.adjacency.col_idx();
    const auto& v = batch.adjacency.values();
    for (std::size_t g = 0; g < batch.graph_count(); ++g) {
        const std::size_t b = batch.offsets[g], e = batch.offsets[g + 1];
        GraphBlock blk;
        blk.features = Matrix(e - b, f);
        std::copy(batch.features.data().begin() + b * f, batch.features.data().begin() + e * f,
                  blk.features.data().begin());
        for (std::size_t r = b; r < e; ++r)
            for (std::uint32_t k = rp[r]; k < rp[r + 1]; ++k)
                if (ci[k] > r) {
                    if (ci[k] >= e) throw std::logic_error("unbatch: cross-graph edge");
                    blk.edges.push_back({static_cast<std::uint32_t>(r - b), static_cast<std::uint32_t>(ci[k] - b), v[k]});
                }
        if (batch.virtual_nodes[g]) blk.virtual_index = *batch.virtual_nodes[g] - b;
        out.push_back(std::move(blk));
    }
    return out;
}

}  // namespace cellgraph::graph
