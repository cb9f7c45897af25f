#pragma once

#include <filesystem>

#include "cellgraph/construct/image.hpp"

namespace cellgraph::io {

/// 8-bit colour or gray image as RGB. Alpha is dropped.
construct::RgbImage read_rgb(const std::filesystem::path& path);

/// Single-channel 8/16/32-bit instance label image.
construct::InstanceMask read_mask(const std::filesystem::path& path, double pixel_size_um);

void write_rgb(const std::filesystem::path& path, const construct::RgbImage& image);

/// 16-bit PNG; throws if an id exceeds 65535.
void write_mask(const std::filesystem::path& path, const construct::InstanceMask& mask);

}  // namespace cellgraph::io
