#include "cellgraph/pretrain/embed.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cellgraph/acm/filters.hpp"
#include "cellgraph/util/bytes.hpp"

namespace cellgraph::pretrain {

EmbeddingLevel parse_level(const std::string& s) {
    if (s == "cell") return EmbeddingLevel::cell;
    if (s == "region") return EmbeddingLevel::region;
    throw std::invalid_argument("unknown embedding level '" + s + "' (expected cell or region)");
}

std::string to_string(EmbeddingLevel level) { return level == EmbeddingLevel::cell ? "cell" : "region"; }

EmbeddingTable embed_graphs(PretrainedModel& model, std::span<const graph::CellGraph> graphs, EmbeddingLevel level) {
    GraphMae& mae = *model.model;
    const std::size_t d = mae.encoder().config().out_dim;
    EmbeddingTable table;
    table.level = level;
    std::vector<float> rows;
    for (std::size_t k = 0; k < graphs.size(); ++k) {
        const auto& g = graphs[k];
        if (g.feature_dim() != mae.feature_dim())
            throw ShapeError("embed: record " + std::to_string(k) + " has " + std::to_string(g.feature_dim()) +
                             " features, checkpoint expects " + std::to_string(mae.feature_dim()));
        const std::size_t n = g.node_count();
        if (n == 0) {
            if (level == EmbeddingLevel::region) {
                table.records.push_back(k);
                rows.insert(rows.end(), d, 0.0f);
            }
            continue;
        }
        const auto blocks = prepare_blocks(std::span(&g, 1), model.scaler, model.virtual_edge_weight);
        const graph::GraphBatch batch = graph::batch_blocks(blocks);
        const auto filters = acm::batch_filters(batch, mae.config().edge_weighting);
        Tape tape;
        const Matrix h = mae.encode(tape, tape.constant(batch.features), filters).value();
        if (level == EmbeddingLevel::cell) {
            for (std::size_t r = 0; r < n; ++r) {
                table.records.push_back(k);
                table.nodes.push_back(r);
                rows.insert(rows.end(), h.row(r).begin(), h.row(r).end());
            }
        } else {
            const Matrix mean = acm::region_embedding(h, batch);
            table.records.push_back(k);
            rows.insert(rows.end(), mean.row(0).begin(), mean.row(0).end());
        }
    }
    table.values = Matrix(table.records.size(), d, std::move(rows));
    return table;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const bool cell = table.level == EmbeddingLevel::cell;
    out << "record";
    if (cell) out << ",node";
    for (std::size_t c = 0; c < table.dim(); ++c) out << ",e" << c;
    out << '\n';
    char buf[32];
    for (std::size_t r = 0; r < table.values.rows(); ++r) {
        out << table.records[r];
        if (cell) out << ',' << table.nodes[r];
        for (float v : table.values.row(r)) {
            const auto res = std::to_chars(buf, buf + sizeof buf, v);
            out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& where) {
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw FormatError(where + ": cannot parse '" + s + "' as a number");
    return v;
}

}  // namespace

EmbeddingTable read_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty embedding file");
    const auto header = split_csv(line);
    EmbeddingTable table;
    std::size_t lead = 1;
    if (header.size() >= 2 && header[1] == "node") {
        table.level = EmbeddingLevel::cell;
        lead = 2;
    }
    if (header.empty() || header[0] != "record") throw FormatError(path.string() + ": header must start with 'record'");
    const std::size_t d = header.size() - lead;
    std::vector<float> values;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (cells.size() != header.size())
            throw FormatError(where + ": expected " + std::to_string(header.size()) + " columns, got " +
                              std::to_string(cells.size()));
        table.records.push_back(parse_number<std::size_t>(cells[0], where));
        if (lead == 2) table.nodes.push_back(parse_number<std::size_t>(cells[1], where));
        for (std::size_t c = lead; c < cells.size(); ++c) values.push_back(parse_number<float>(cells[c], where));
    }
    table.values = Matrix(table.records.size(), d, std::move(values));
    return table;
}

}  // namespace cellgraph::pretrain
