#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cellgraph/numerics/matrix.hpp"
#include "cellgraph/numerics/tape.hpp"

namespace cellgraph::acm {

inline constexpr char kCheckpointMagic[9] = "CGCK0001";

/// Named tensors plus free-form metadata (config echo, counters).
///
/// Layout: 8-byte magic, u32-length JSON metadata, u32 tensor count, then
/// per tensor: u32-length name, u32 rows, u32 cols, float32 row-major data;
/// finally a CRC32 of everything after the magic. Little-endian.
struct Checkpoint {
    nlohmann::json meta = nlohmann::json::object();
    std::vector<std::pair<std::string, Matrix>> tensors;

    void put(const std::string& name, const Matrix& m);
    bool has(const std::string& name) const;
    const Matrix& get(const std::string& name) const;

    /// Stores parameter values under `prefix` + parameter name.
    void put_parameters(const std::string& prefix, const std::vector<Parameter*>& params);
    /// Overwrites parameter values; names and shapes must match.
    void load_parameters(const std::string& prefix, const std::vector<Parameter*>& params) const;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace cellgraph::acm
