#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cellgraph/graph/cell_graph.hpp"
#include "cellgraph/pretrain/train.hpp"

namespace cellgraph::pretrain {

enum class EmbeddingLevel { cell, region };

EmbeddingLevel parse_level(const std::string& s);
std::string to_string(EmbeddingLevel level);

/// Frozen-encoder outputs. Row k belongs to dataset record `records[k]`; at
/// cell level `nodes[k]` is the node index within that record.
struct EmbeddingTable {
    EmbeddingLevel level = EmbeddingLevel::region;
    std::vector<std::size_t> records;
    std::vector<std::size_t> nodes;  // cell level only
    Matrix values;

    std::size_t dim() const noexcept { return values.cols(); }
    friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;
};

/// Encoder output (no masking) of each graph, computed one graph at a time.
/// Region rows are the mean over real nodes; a graph without cells gives a
/// zero row.
EmbeddingTable embed_graphs(PretrainedModel& model, std::span<const graph::CellGraph> graphs, EmbeddingLevel level);

/// CSV with header `record,e0,...` (region) or `record,node,e0,...` (cell).
/// Floats are written in shortest round-trip form.
void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable read_embeddings(const std::filesystem::path& path);

}  // namespace cellgraph::pretrain
