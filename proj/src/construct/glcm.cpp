#include "cellgraph/construct/glcm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cellgraph/construct/summary.hpp"

namespace cellgraph::construct {

namespace {

// (dx, dy) per angle, y pointing down the rows
constexpr int kOffsets[kGlcmAngles][2] = {{1, 0}, {1, -1}, {0, -1}, {-1, -1}};

}  // namespace

int quantize_gray(double gray) {
    const int level = static_cast<int>(std::floor(gray * kGlcmLevels / 256.0));
    return std::clamp(level, 0, kGlcmLevels - 1);
}

GlcmProperties glcm_properties(std::span<const std::uint8_t> levels, std::span<const std::uint8_t> inside,
                               std::size_t width, std::size_t height, int angle_index) {
    if (levels.size() != width * height || inside.size() != width * height)
        throw std::invalid_argument("glcm: buffer size does not match patch size");
    if (angle_index < 0 || angle_index >= kGlcmAngles) throw std::out_of_range("glcm: angle index");
    const int dx = kOffsets[angle_index][0], dy = kOffsets[angle_index][1];

    std::array<double, kGlcmLevels * kGlcmLevels> p{};
    double total = 0.0;
    for (std::size_t y = 0; y < height; ++y) {
        const auto ny = static_cast<std::ptrdiff_t>(y) + dy;
        if (ny < 0 || ny >= static_cast<std::ptrdiff_t>(height)) continue;
        for (std::size_t x = 0; x < width; ++x) {
            const auto nx = static_cast<std::ptrdiff_t>(x) + dx;
            if (nx < 0 || nx >= static_cast<std::ptrdiff_t>(width)) continue;
            const std::size_t a = y * width + x, b = static_cast<std::size_t>(ny) * width + static_cast<std::size_t>(nx);
            if (!inside[a] || !inside[b]) continue;
            const int i = levels[a], j = levels[b];
            if (i >= kGlcmLevels || j >= kGlcmLevels) throw std::out_of_range("glcm: level out of range");
            p[i * kGlcmLevels + j] += 1.0;
            p[j * kGlcmLevels + i] += 1.0;
            total += 2.0;
        }
    }
    GlcmProperties out;
    if (total == 0.0) return out;
    for (auto& v : p) v /= total;

    double mu = 0.0;  // symmetric, so both marginals share mean and variance
    for (int i = 0; i < kGlcmLevels; ++i)
        for (int j = 0; j < kGlcmLevels; ++j) mu += i * p[i * kGlcmLevels + j];
    double var = 0.0;
    for (int i = 0; i < kGlcmLevels; ++i)
        for (int j = 0; j < kGlcmLevels; ++j) var += (i - mu) * (i - mu) * p[i * kGlcmLevels + j];

    double cov = 0.0;
    for (int i = 0; i < kGlcmLevels; ++i)
        for (int j = 0; j < kGlcmLevels; ++j) {
            const double v = p[i * kGlcmLevels + j];
            if (v == 0.0) continue;
            const double d = i - j;
            out.asm_ += v * v;
            out.contrast += v * d * d;
            out.dissimilarity += v * std::abs(d);
            out.homogeneity += v / (1.0 + d * d);
            cov += v * (i - mu) * (j - mu);
        }
    out.energy = std::sqrt(out.asm_);
    out.correlation = var < 1e-15 ? 1.0 : cov / var;
    return out;
}

std::array<double, 36> glcm_stats(std::span<const double> gray, std::span<const std::uint8_t> inside,
                                  std::size_t width, std::size_t height) {
    if (gray.size() != width * height || inside.size() != width * height)
        throw std::invalid_argument("glcm: buffer size does not match patch size");
    std::array<double, 36> out{};
    if (std::count_if(inside.begin(), inside.end(), [](std::uint8_t v) { return v != 0; }) < 2) return out;

    std::vector<std::uint8_t> levels(gray.size());
    for (std::size_t k = 0; k < gray.size(); ++k) levels[k] = static_cast<std::uint8_t>(quantize_gray(gray[k]));

    std::array<std::array<double, kGlcmAngles>, 6> per_property{};
    for (int a = 0; a < kGlcmAngles; ++a) {
        const GlcmProperties g = glcm_properties(levels, inside, width, height, a);
        per_property[0][a] = g.asm_;
        per_property[1][a] = g.contrast;
        per_property[2][a] = g.correlation;
        per_property[3][a] = g.dissimilarity;
        per_property[4][a] = g.energy;
        per_property[5][a] = g.homogeneity;
    }
    for (int prop = 0; prop < 6; ++prop) {
        const Summary s = summarize(per_property[prop]);
        out[0 * 6 + prop] = s.mean;
        out[1 * 6 + prop] = s.std;
        out[2 * 6 + prop] = s.skew;
        out[3 * 6 + prop] = s.kurtosis;
        out[4 * 6 + prop] = s.min;
        out[5 * 6 + prop] = s.max;
    }
    return out;
}

}  // namespace cellgraph::construct
