#include "cellgraph/graph/dataset.hpp"

#include "json.hpp"

namespace cellgraph::graph {

namespace {

using nlohmann::json;

constexpr std::uint8_t kHasNodeLabels = 1u << 0;
constexpr std::uint8_t kHasGraphLabel = 1u << 1;
constexpr std::uint8_t kHasSurvival = 1u << 2;

json manifest_to_json(const DatasetManifest& m) {
    return json{{"name", m.name},
                {"record_count", m.record_count},
                {"feature_dim", m.feature_dim},
                {"class_names", m.class_names},
                {"feature_names", m.feature_names},
                {"record_names", m.record_names},
                {"splits", m.splits},
                {"magnification", m.magnification}};
}

DatasetManifest manifest_from_json(const json& j) {
    DatasetManifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.record_count = j.at("record_count").get<std::size_t>();
        m.feature_dim = j.at("feature_dim").get<std::size_t>();
        m.class_names = j.at("class_names").get<std::vector<std::string>>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.record_names = j.value("record_names", std::vector<std::string>{});
        m.splits = j.at("splits").get<std::map<std::string, std::vector<std::string>>>();
        m.magnification = j.at("magnification").get<float>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("dataset manifest: ") + e.what());
    }
    return m;
}

void write_record(ByteWriter& w, const CellGraph& g) {
    const std::size_t start = w.size();
    w.u32(static_cast<std::uint32_t>(g.node_count()));
    w.u32(static_cast<std::uint32_t>(g.edges.size()));
    w.f32s(g.features.data());
    for (const Point& p : g.positions) {
        w.f32(p.x);
        w.f32(p.y);
    }
    for (const Edge& e : g.edges) {
        w.u32(e.i);
        w.u32(e.j);
        w.f32(e.weight);
    }
    std::uint8_t flags = 0;
    if (g.node_labels) flags |= kHasNodeLabels;
    if (g.graph_label) flags |= kHasGraphLabel;
    if (g.survival) flags |= kHasSurvival;
    w.u8(flags);
    if (g.node_labels)
        for (std::uint32_t l : *g.node_labels) w.u32(l);
    if (g.graph_label) w.u32(*g.graph_label);
    if (g.survival) {
        w.f32(g.survival->time_days);
        w.u8(g.survival->event ? 1 : 0);
    }
    w.f32(g.magnification);
    w.u32(crc32(std::span(w.bytes()).subspan(start)));
}

CellGraph read_record(ByteReader& r, std::size_t feature_dim, std::size_t index) {
    const std::size_t start = r.position();
    CellGraph g;
    const std::uint32_t n = r.u32();
    const std::uint32_t m = r.u32();
    // guard against absurd counts in a corrupted header before allocating
    const std::size_t min_bytes = static_cast<std::size_t>(n) * (feature_dim + 2) * 4 + static_cast<std::size_t>(m) * 12;
    if (min_bytes > r.remaining())
        throw FormatError("dataset record " + std::to_string(index) + ": truncated record");
    g.features = Matrix(n, feature_dim);
    r.f32s(g.features.data());
    g.positions.resize(n);
    for (Point& p : g.positions) {
        p.x = r.f32();
        p.y = r.f32();
    }
    g.edges.resize(m);
    for (Edge& e : g.edges) {
        e.i = r.u32();
        e.j = r.u32();
        e.weight = r.f32();
    }
    const std::uint8_t flags = r.u8();
    if (flags & ~(kHasNodeLabels | kHasGraphLabel | kHasSurvival))
        throw FormatError("dataset record " + std::to_string(index) + ": unknown flag bits");
    if (flags & kHasNodeLabels) {
        std::vector<std::uint32_t> labels(n);
        for (auto& l : labels) l = r.u32();
        g.node_labels = std::move(labels);
    }
    if (flags & kHasGraphLabel) g.graph_label = r.u32();
    if (flags & kHasSurvival) {
        SurvivalInfo s;
        s.time_days = r.f32();
        s.event = r.u8() != 0;
        g.survival = s;
    }
    g.magnification = r.f32();
    const std::uint32_t expected = crc32(r.consumed_since(start));
    if (r.u32() != expected) throw FormatError("dataset record " + std::to_string(index) + ": checksum mismatch");
    return g;
}

}  // namespace

void DatasetManifest::validate() const {
    for (const auto& [scheme, tags] : splits)
        if (tags.size() != record_count)
            throw std::invalid_argument("manifest split '" + scheme + "' has " + std::to_string(tags.size()) +
                                        " entries for " + std::to_string(record_count) + " records");
    if (!record_names.empty() && record_names.size() != record_count)
        throw std::invalid_argument("manifest record_names length != record_count");
    if (!feature_names.empty() && feature_names.size() != feature_dim)
        throw std::invalid_argument("manifest feature_names length != feature_dim");
}

Dataset Dataset::from_graphs(std::string name, std::vector<CellGraph> graphs) {
    Dataset ds;
    ds.manifest.name = std::move(name);
    ds.manifest.record_count = graphs.size();
    ds.manifest.feature_dim = graphs.empty() ? 0 : graphs.front().feature_dim();
    if (!graphs.empty()) ds.manifest.magnification = graphs.front().magnification;
    ds.graphs = std::move(graphs);
    return ds;
}

std::vector<std::uint8_t> serialize_dataset(const Dataset& ds) {
    ds.manifest.validate();
    if (ds.manifest.record_count != ds.graphs.size())
        throw std::invalid_argument("dataset: manifest record_count " + std::to_string(ds.manifest.record_count) +
                                    " != " + std::to_string(ds.graphs.size()) + " graphs");
    for (std::size_t k = 0; k < ds.graphs.size(); ++k) {
        if (ds.graphs[k].feature_dim() != ds.manifest.feature_dim)
            throw std::invalid_argument("dataset: record " + std::to_string(k) + " has feature dimension " +
                                        std::to_string(ds.graphs[k].feature_dim()) + ", manifest says " +
                                        std::to_string(ds.manifest.feature_dim));
        if (ds.graphs[k].positions.size() != ds.graphs[k].features.rows())
            throw std::invalid_argument("dataset: record " + std::to_string(k) + " positions/features disagree");
    }
    ByteWriter w;
    w.raw(kDatasetMagic);
    w.str(manifest_to_json(ds.manifest).dump());
    for (const CellGraph& g : ds.graphs) write_record(w, g);
    return std::move(w.bytes());
}

Dataset deserialize_dataset(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "dataset");
    std::string magic;
    try {
        magic = r.raw(kDatasetMagic.size());
    } catch (const FormatError&) {
        throw FormatError("dataset: file too short for CGRF header");
    }
    if (magic != kDatasetMagic) {
        if (magic.rfind("CGRF", 0) == 0)
            throw FormatError("dataset: unsupported format version '" + magic.substr(4) + "' (this build reads 0001)");
        throw FormatError("dataset: bad magic number, not a CGRF file");
    }
    Dataset ds;
    const std::string manifest = r.str();
    json j = json::parse(manifest, nullptr, false);
    if (j.is_discarded()) throw FormatError("dataset: manifest is not valid JSON");
    ds.manifest = manifest_from_json(j);
    ds.graphs.reserve(ds.manifest.record_count);
    for (std::size_t k = 0; k < ds.manifest.record_count; ++k) {
        try {
            ds.graphs.push_back(read_record(r, ds.manifest.feature_dim, k));
        } catch (const FormatError& e) {
            const std::string what = e.what();
            if (what.find("record") != std::string::npos) throw;
            throw FormatError("dataset record " + std::to_string(k) + ": truncated record");
        }
    }
    if (r.remaining() != 0) throw FormatError("dataset: trailing bytes after last record");
    return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
    write_file_bytes(path, serialize_dataset(ds));
}

Dataset read_dataset(const std::filesystem::path& path) { return deserialize_dataset(read_file_bytes(path)); }

DatasetStats dataset_stats(std::span<const CellGraph> graphs) {
    DatasetStats s;
    s.graphs = graphs.size();
    if (graphs.empty()) return s;
    double nodes = 0.0, edges = 0.0, wsum = 0.0;
    std::size_t wcount = 0;
    for (const CellGraph& g : graphs) {
        nodes += static_cast<double>(g.node_count());
        edges += static_cast<double>(g.edges.size());
        for (const Edge& e : g.edges) wsum += e.weight;
        wcount += g.edges.size();
    }
    s.avg_nodes = nodes / static_cast<double>(graphs.size());
    s.avg_edges = edges / static_cast<double>(graphs.size());
    s.mean_edge_weight = wcount > 0 ? wsum / static_cast<double>(wcount) : 0.0;
    return s;
}

}  // namespace cellgraph::graph
