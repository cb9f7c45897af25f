#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cellgraph/util/bytes.hpp"

namespace cellgraph {

/// Header plus rows of a plain comma-separated file (no quoting).
struct CsvTable {
    std::filesystem::path source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> find(std::string_view name) const;
    /// Throws FormatError naming the file and the missing column.
    std::size_t column(std::string_view name) const;

    template <class T>
    T number(std::size_t row, std::size_t col) const {
        const std::string& s = rows[row][col];
        T v{};
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size())
            throw FormatError(source.string() + ":" + std::to_string(row + 2) + ": bad " + header[col] + " '" + s + "'");
        return v;
    }
};

/// Reads a CSV with a header row. Blank lines are skipped, cells are trimmed
/// and every row must have as many cells as the header.
CsvTable read_csv(const std::filesystem::path& path);

std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace cellgraph
