#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cellgraph/construct/predicates.hpp"

namespace cellgraph::construct {

/// Binary region on a row-major grid, in pixel units. Pixel (x, y) covers
/// the unit square centred on (x, y).
struct BinaryRegion {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> inside;

    bool at(std::ptrdiff_t x, std::ptrdiff_t y) const;
    std::size_t area() const;
};

/// Closed iso-contours at level 1/2 of the region indicator, through the
/// midpoints between pixel centres. Each loop is listed once, without
/// repeating its first vertex.
std::vector<std::vector<Vec2>> boundary_loops(const BinaryRegion& region);

double polygon_length(std::span<const Vec2> loop);
double polygon_signed_area(std::span<const Vec2> loop);

/// Area of the convex hull of all pixel squares.
double pixel_hull_area(const BinaryRegion& region);

struct Ellipse {
    double orientation = 0.0;  // radians in (-pi/2, pi/2], image axes
    double major = 0.0;
    double minor = 0.0;
    double eccentricity = 0.0;
};

/// Ellipse with the same second moments as the union of pixel squares.
Ellipse moment_ellipse(const BinaryRegion& region);

/// Magnitudes |c_20| / |c_0| and |c_30| / |c_0| of the DFT of the
/// centroid-distance signature sampled at 64 arc-length-equispaced points.
/// Degenerate contours give (0, 0).
std::pair<double, double> fourier_shape(std::span<const Vec2> contour);

}  // namespace cellgraph::construct
