#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cellgraph {

/// Malformed, truncated or corrupted binary payload.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Appends little-endian scalars to a byte buffer.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int s = 0; s < 32; s += 8) buf_.push_back(static_cast<std::uint8_t>(v >> s));
    }
    void u64(std::uint64_t v) {
        for (int s = 0; s < 64; s += 8) buf_.push_back(static_cast<std::uint8_t>(v >> s));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f32s(std::span<const float> vs) {
        for (float v : vs) f32(v);
    }
    void raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    /// u32 length prefix followed by the bytes.
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s);
    }

    std::size_t size() const noexcept { return buf_.size(); }
    std::vector<std::uint8_t>& bytes() noexcept { return buf_; }
    const std::vector<std::uint8_t>& bytes() const noexcept { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

/// Reads little-endian scalars; throws FormatError on truncation.
class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, std::string context)
        : bytes_(bytes), context_(std::move(context)) {}

    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int s = 0; s < 32; s += 8) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << s;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int s = 0; s < 64; s += 8) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << s;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    void f32s(std::span<float> out) {
        need(4 * out.size());
        for (float& v : out) v = f32();
    }
    std::string raw(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::string str() { return raw(u32()); }

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
    std::span<const std::uint8_t> consumed_since(std::size_t start) const { return bytes_.subspan(start, pos_ - start); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw FormatError(context_ + ": truncated input");
    }
    std::span<const std::uint8_t> bytes_;
    std::string context_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace cellgraph
