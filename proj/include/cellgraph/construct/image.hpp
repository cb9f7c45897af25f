#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cellgraph::construct {

/// 8-bit RGB raster, row-major, channels interleaved.
struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // 3 * width * height

    RgbImage() = default;
    RgbImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(3 * w * h, fill) {}

    std::uint8_t& at(std::size_t x, std::size_t y, int channel) { return pixels[3 * (y * width + x) + channel]; }
    std::uint8_t at(std::size_t x, std::size_t y, int channel) const { return pixels[3 * (y * width + x) + channel]; }
    void set(std::size_t x, std::size_t y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

/// Cell instance labels; 0 is background.
struct InstanceMask {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint32_t> ids;  // width * height
    double pixel_size_um = 0.5;

    InstanceMask() = default;
    InstanceMask(std::size_t w, std::size_t h, double pixel_size) : width(w), height(h), ids(w * h, 0), pixel_size_um(pixel_size) {}

    std::uint32_t& at(std::size_t x, std::size_t y) { return ids[y * width + x]; }
    std::uint32_t at(std::size_t x, std::size_t y) const { return ids[y * width + x]; }
};

/// Mask with ids renumbered to 1..m in ascending order of the original ids.
struct CanonicalMask {
    InstanceMask mask;
    std::vector<std::uint32_t> original_ids;  // original_ids[k] was renamed to k + 1
};

CanonicalMask canonicalize(const InstanceMask& mask);

}  // namespace cellgraph::construct
