#include "cellgraph/acm/checkpoint.hpp"

#include <algorithm>
#include <cstring>

#include "cellgraph/util/bytes.hpp"

namespace cellgraph::acm {

void Checkpoint::put(const std::string& name, const Matrix& m) {
    for (auto& [n, t] : tensors)
        if (n == name) {
            t = m;
            return;
        }
    tensors.emplace_back(name, m);
}

bool Checkpoint::has(const std::string& name) const {
    return std::any_of(tensors.begin(), tensors.end(), [&](const auto& t) { return t.first == name; });
}

const Matrix& Checkpoint::get(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw FormatError("checkpoint: missing tensor '" + name + "'");
}

void Checkpoint::put_parameters(const std::string& prefix, const std::vector<Parameter*>& params) {
    for (const auto* p : params) put(prefix + p->name, p->value);
}

void Checkpoint::load_parameters(const std::string& prefix, const std::vector<Parameter*>& params) const {
    for (auto* p : params) {
        const Matrix& m = get(prefix + p->name);
        if (!m.same_shape(p->value))
            throw FormatError("checkpoint: tensor '" + prefix + p->name + "' is " + shape_string(m) + ", model expects " +
                              shape_string(p->value));
        p->value = m;
    }
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
    ByteWriter w;
    w.raw(std::string_view(kCheckpointMagic, 8));
    w.str(c.meta.dump());
    w.u32(static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& [name, m] : c.tensors) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(m.rows()));
        w.u32(static_cast<std::uint32_t>(m.cols()));
        w.f32s(m.data());
    }
    const auto body = std::span<const std::uint8_t>(w.bytes()).subspan(8);
    w.u32(crc32(body));
    return std::move(w.bytes());
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "checkpoint");
    const std::string magic = r.raw(8);
    if (magic.substr(0, 4) != std::string_view(kCheckpointMagic, 4)) throw FormatError("checkpoint: bad magic");
    if (magic != std::string_view(kCheckpointMagic, 8))
        throw FormatError("checkpoint: unsupported format version '" + magic.substr(4) + "'");
    Checkpoint c;
    try {
        c.meta = nlohmann::json::parse(r.str());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: bad metadata: ") + e.what());
    }
    const std::uint32_t count = r.u32();
    for (std::uint32_t k = 0; k < count; ++k) {
        std::string name = r.str();
        const std::uint32_t rows = r.u32(), cols = r.u32();
        if (static_cast<std::uint64_t>(rows) * cols * 4 > r.remaining()) throw FormatError("checkpoint: truncated input");
        Matrix m(rows, cols);
        r.f32s(m.data());
        c.tensors.emplace_back(std::move(name), std::move(m));
    }
    const std::size_t body_end = r.position();
    const std::uint32_t stored = r.u32();
    if (crc32(bytes.subspan(8, body_end - 8)) != stored) throw FormatError("checkpoint: checksum mismatch");
    if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
    return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    write_file_bytes(path, serialize_checkpoint(c));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file_bytes(path)); }

}  // namespace cellgraph::acm
