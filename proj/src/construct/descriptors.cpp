#include "cellgraph/construct/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "cellgraph/construct/glcm.hpp"
#include "cellgraph/construct/shape.hpp"
#include "cellgraph/construct/summary.hpp"

namespace cellgraph::construct {

namespace {

std::vector<std::string> make_names() {
    std::vector<std::string> n;
    const char* rgb[] = {"r", "g", "b"};
    for (const char* stat : {"min", "max", "mean", "std", "skew", "kurtosis"})
        for (const char* c : rgb) n.push_back(std::string(stat) + "_intensity_" + c);
    for (const char* stat : {"mean", "std", "skew", "kurtosis", "min", "max"})
        n.push_back(std::string(stat) + "_intensity_gray");
    for (const char* m : {"probability", "orientation", "axis_major_length", "axis_minor_length", "eccentricity", "area",
                          "perimeter", "circularity", "elongation", "solidity", "extent", "fourier_descriptor_20",
                          "fourier_descriptor_30"})
        n.emplace_back(m);
    for (const char* stat : {"mean", "std", "skew", "kurtosis", "min", "max"})
        for (const char* prop : {"asm", "contrast", "correlation", "dissimilarity", "energy", "homogeneity"})
            n.push_back(std::string(stat) + "_" + prop);
    return n;
}

struct PixelSet {
    std::vector<std::size_t> pixels;  // indices into the full image
    std::size_t x0 = std::numeric_limits<std::size_t>::max(), y0 = std::numeric_limits<std::size_t>::max();
    std::size_t x1 = 0, y1 = 0;  // inclusive
};

CellDescriptor describe(const RgbImage& image, const PixelSet& cell, double pixel_size, double probability) {
    CellDescriptor d{};
    const std::size_t n = cell.pixels.size();
    const std::size_t w = image.width;

    std::array<std::vector<double>, 3> channel;
    std::vector<double> gray(n);
    for (auto& c : channel) c.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto* p = &image.pixels[3 * cell.pixels[k]];
        for (int c = 0; c < 3; ++c) channel[c][k] = p[c];
        gray[k] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
    for (int c = 0; c < 3; ++c) {
        const Summary s = summarize(channel[c]);
        d[0 + c] = s.min;
        d[3 + c] = s.max;
        d[6 + c] = s.mean;
        d[9 + c] = s.std;
        d[12 + c] = s.skew;
        d[15 + c] = s.kurtosis;
    }
    const Summary g = summarize(gray);
    const double gs[] = {g.mean, g.std, g.skew, g.kurtosis, g.min, g.max};
    std::copy(std::begin(gs), std::end(gs), d.begin() + 18);

    BinaryRegion region;
    region.width = cell.x1 - cell.x0 + 1;
    region.height = cell.y1 - cell.y0 + 1;
    region.inside.assign(region.width * region.height, 0);
    std::vector<double> gray_patch(region.inside.size(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t x = cell.pixels[k] % w - cell.x0, y = cell.pixels[k] / w - cell.y0;
        region.inside[y * region.width + x] = 1;
        gray_patch[y * region.width + x] = gray[k];
    }

    const Ellipse e = moment_ellipse(region);
    const auto loops = boundary_loops(region);
    double perimeter_px = 0.0;
    const std::vector<Vec2>* outer = nullptr;
    for (const auto& loop : loops) {
        perimeter_px += polygon_length(loop);
        if (!outer || std::abs(polygon_signed_area(loop)) > std::abs(polygon_signed_area(*outer))) outer = &loop;
    }
    const double area_px = static_cast<double>(n);
    const auto [fd20, fd30] = outer ? fourier_shape(*outer) : std::pair{0.0, 0.0};

    const double area = area_px * pixel_size * pixel_size;
    const double perimeter = perimeter_px * pixel_size;
    double* m = d.data() + kMorphologyOffset;
    m[0] = probability;
    m[1] = e.orientation;
    m[2] = e.major * pixel_size;
    m[3] = e.minor * pixel_size;
    m[4] = e.eccentricity;
    m[5] = area;
    m[6] = perimeter;
    m[7] = 4.0 * std::numbers::pi * area / (perimeter * perimeter);
    m[8] = e.major / e.minor;
    m[9] = area_px / pixel_hull_area(region);
    m[10] = area_px / static_cast<double>(region.width * region.height);
    m[11] = fd20;
    m[12] = fd30;

    const auto texture = glcm_stats(gray_patch, region.inside, region.width, region.height);
    std::copy(texture.begin(), texture.end(), d.begin() + kTextureOffset);
    return d;
}

}  // namespace

const std::vector<std::string>& descriptor_names() {
    static const std::vector<std::string> names = make_names();
    return names;
}

std::size_t descriptor_index(const std::string& name) {
    const auto& names = descriptor_names();
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw std::out_of_range("unknown descriptor '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
}

CellMeasurements extract_descriptors(const RgbImage& image, const InstanceMask& mask,
                                     const std::map<std::uint32_t, double>& probabilities) {
    if (image.width != mask.width || image.height != mask.height)
        throw std::invalid_argument("extract_descriptors: image is " + std::to_string(image.width) + "x" +
                                    std::to_string(image.height) + " but mask is " + std::to_string(mask.width) + "x" +
                                    std::to_string(mask.height));
    if (image.pixels.size() != 3 * image.width * image.height)
        throw std::invalid_argument("extract_descriptors: image buffer size does not match its dimensions");
    const CanonicalMask canon = canonicalize(mask);

    std::vector<PixelSet> cells(canon.original_ids.size());
    for (std::size_t y = 0; y < mask.height; ++y)
        for (std::size_t x = 0; x < mask.width; ++x) {
            const auto id = canon.mask.at(x, y);
            if (id == 0) continue;
            PixelSet& c = cells[id - 1];
            c.pixels.push_back(y * mask.width + x);
            c.x0 = std::min(c.x0, x);
            c.y0 = std::min(c.y0, y);
            c.x1 = std::max(c.x1, x);
            c.y1 = std::max(c.y1, y);
        }

    CellMeasurements out;
    out.instance_ids = canon.original_ids;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        double sx = 0.0, sy = 0.0;
        for (auto p : cells[k].pixels) {
            sx += static_cast<double>(p % mask.width) + 0.5;
            sy += static_cast<double>(p / mask.width) + 0.5;
        }
        const double count = static_cast<double>(cells[k].pixels.size());
        out.centroids_um.push_back({sx / count * mask.pixel_size_um, sy / count * mask.pixel_size_um});
        const auto it = probabilities.find(canon.original_ids[k]);
        const double prob = it == probabilities.end() ? 1.0 : it->second;
        out.descriptors.push_back(describe(image, cells[k], mask.pixel_size_um, prob));
    }
    return out;
}

}  // namespace cellgraph::construct
