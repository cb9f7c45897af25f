#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace cellgraph::construct {

inline constexpr int kGlcmLevels = 32;
inline constexpr int kGlcmAngles = 4;  // 0, 45, 90, 135 degrees at distance 1

/// Per-angle properties, in output order.
struct GlcmProperties {
    double asm_ = 0.0;
    double contrast = 0.0;
    double correlation = 0.0;
    double dissimilarity = 0.0;
    double energy = 0.0;
    double homogeneity = 0.0;
};

/// Gray value in [0, 255] to one of 32 levels.
int quantize_gray(double gray);

/// Symmetric normalized co-occurrence properties for one angle, counting only
/// pixel pairs where both pixels are inside the mask. `levels` and `inside`
/// are row-major width x height. No pairs gives all-zero properties; a
/// zero-variance marginal gives correlation 1.
GlcmProperties glcm_properties(std::span<const std::uint8_t> levels, std::span<const std::uint8_t> inside,
                               std::size_t width, std::size_t height, int angle_index);

/// 36 texture values: mean, std, skew, kurtosis, min, max across the four
/// angles, each over (ASM, contrast, correlation, dissimilarity, energy,
/// homogeneity). Fewer than two masked pixels yields all zeros.
std::array<double, 36> glcm_stats(std::span<const double> gray, std::span<const std::uint8_t> inside,
                                  std::size_t width, std::size_t height);

}  // namespace cellgraph::construct
