#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cellgraph/graph/cell_graph.hpp"
#include "cellgraph/util/bytes.hpp"

namespace cellgraph::graph {

inline constexpr std::string_view kDatasetMagic = "CGRF0001";

/// Dataset-level bookkeeping stored as JSON in the file header.
struct DatasetManifest {
    std::string name;
    std::size_t record_count = 0;
    std::size_t feature_dim = 0;
    std::vector<std::string> class_names;
    std::vector<std::string> feature_names;
    std::vector<std::string> record_names;  // empty, or one per record (e.g. source image stem)
    /// scheme name -> one split tag per record ("train", "test", "fold3", ...)
    std::map<std::string, std::vector<std::string>> splits;
    float magnification = 20.0f;

    void validate() const;
    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<CellGraph> graphs;

    /// Builds a manifest around `graphs`, inferring record count and feature dim.
    static Dataset from_graphs(std::string name, std::vector<CellGraph> graphs);
    friend bool operator==(const Dataset&, const Dataset&) = default;
};

std::vector<std::uint8_t> serialize_dataset(const Dataset& ds);
Dataset deserialize_dataset(std::span<const std::uint8_t> bytes);

void write_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& path);

struct DatasetStats {
    std::size_t graphs = 0;
    double avg_nodes = 0.0;
    double avg_edges = 0.0;
    double mean_edge_weight = 0.0;
};
DatasetStats dataset_stats(std::span<const CellGraph> graphs);

}  // namespace cellgraph::graph
