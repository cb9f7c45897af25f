#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "doctest.h"

#include "cellgraph/construct/build.hpp"
#include "cellgraph/construct/delaunay.hpp"
#include "cellgraph/construct/descriptors.hpp"
#include "cellgraph/construct/glcm.hpp"
#include "cellgraph/construct/shape.hpp"
#include "cellgraph/numerics/rng.hpp"
#include "support/oracles.hpp"

using namespace cellgraph;
using namespace cellgraph::construct;
using cellgraph::testing::brute_force_delaunay;
using cellgraph::testing::paint_disk;
using cellgraph::testing::paint_rect;

namespace {

RgbImage gray_image(std::size_t w, std::size_t h, std::uint8_t v) { return RgbImage(w, h, v); }

double value(const CellDescriptor& d, const char* name) { return d[descriptor_index(name)]; }

}  // namespace

TEST_CASE("exact predicates") {
    CHECK(orient2d({0, 0}, {1, 0}, {0, 1}) == 1);
    CHECK(orient2d({0, 0}, {0, 1}, {1, 0}) == -1);
    // exactly collinear but far from the origin, where naive doubles wobble
    const double e = std::ldexp(1.0, -50);
    CHECK(orient2d({0.5, 0.5}, {12.0, 12.0}, {24.0, 24.0}) == 0);
    CHECK(orient2d({0.5 + e, 0.5}, {12.0, 12.0}, {24.0, 24.0}) == -1);
    CHECK(orient2d({0.5, 0.5 + e}, {12.0, 12.0}, {24.0, 24.0}) == 1);
    CHECK(incircle({0, 0}, {1, 0}, {1, 1}, {0, 1}) == 0);
    CHECK(incircle({0, 0}, {1, 0}, {1, 1}, {0.5, 0.5}) == 1);
    CHECK(incircle({0, 0}, {1, 0}, {1, 1}, {5, 5}) == -1);
    CHECK(incircle({0, 0}, {1, 0}, {1, 1}, {0, 1 + e}) == -1);
    CHECK(incircle({0, 0}, {1, 0}, {1, 1}, {0, 1 - e}) == 1);
}

TEST_CASE("delaunay small cases") {
    CHECK(delaunay(std::vector<Vec2>{}).empty());
    CHECK(delaunay(std::vector<Vec2>{{1, 1}}).empty());
    CHECK(delaunay(std::vector<Vec2>{{1, 1}, {4, 5}}) == std::vector<IndexPair>{{0, 1}});
    CHECK(delaunay(std::vector<Vec2>{{0, 0}, {10, 0}, {3, 7}}).size() == 3);
    SUBCASE("convex quadrilateral, not cocircular") {
        const std::vector<Vec2> p{{0, 0}, {10, 0}, {11, 9}, {-1, 8}};
        const auto e = delaunay(p);
        CHECK(e.size() == 5);
        const auto oracle = brute_force_delaunay(p);
        CHECK(std::set<IndexPair>(e.begin(), e.end()) == oracle);
    }
    SUBCASE("collinear points form a chain") {
        const std::vector<Vec2> p{{4, 4}, {0, 0}, {2, 2}, {1, 1}, {3, 3}};
        CHECK(delaunay(p) == std::vector<IndexPair>{{0, 4}, {1, 3}, {2, 3}, {2, 4}});
    }
    SUBCASE("collinear after the first non-collinear point") {
        const std::vector<Vec2> p{{0, 0}, {2, 0}, {1, 1}, {1, 0}, {3, 0}};
        const auto e = delaunay(p);
        const std::set<IndexPair> s(e.begin(), e.end());
        CHECK(s.count({0, 3}) == 1);
        CHECK(s.count({1, 3}) == 1);
        CHECK(s.count({0, 1}) == 0);
        CHECK(s.count({1, 4}) == 1);
    }
    SUBCASE("duplicates copy the first occurrence's neighbours") {
        const std::vector<Vec2> p{{0, 0}, {10, 0}, {3, 7}, {10, 0}};
        const auto e = delaunay(p);
        CHECK(e == std::vector<IndexPair>{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {2, 3}});
    }
}

TEST_CASE("delaunay matches the empty-circumcircle enumeration on random sets") {
    Rng rng(2024);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 3 + rng.index(48);
        std::vector<Vec2> p;
        for (std::size_t i = 0; i < n; ++i) p.push_back({rng.uniform(0, 500), rng.uniform(0, 500)});
        const auto e = delaunay(p);
        CHECK(std::set<IndexPair>(e.begin(), e.end()) == brute_force_delaunay(p));
    }
}

TEST_CASE("delaunay on a cocircular lattice is a valid triangulation") {
    std::vector<Vec2> p;
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 7; ++x) p.push_back({x * 15.0, y * 15.0});
    const auto e = delaunay(p);
    // a triangulation of n points with h on the hull boundary has 3n - 3 - h edges
    const std::size_t hull = 2 * (7 + 6) - 4;
    CHECK(e.size() == 3 * p.size() - 3 - hull);
    for (const auto& [i, j] : e) CHECK(std::hypot(p[i].x - p[j].x, p[i].y - p[j].y) <= 15.0 * std::sqrt(2.0) + 1e-9);
}

TEST_CASE("prune_and_weight") {
    const std::vector<Vec2> c{{0, 0}, {30, 40}, {100, 0}, {0, 100.0001}};
    const std::vector<IndexPair> e{{0, 1}, {0, 2}, {0, 3}};
    const auto w = prune_and_weight(e, c);
    REQUIRE(w.size() == 1);
    CHECK(w[0].i == 0);
    CHECK(w[0].j == 1);
    CHECK(w[0].weight == 50.0f);
}

TEST_CASE("glcm") {
    SUBCASE("constant patch") {
        std::vector<double> gray(25, 90.0);
        std::vector<std::uint8_t> inside(25, 1);
        const auto t = glcm_stats(gray, inside, 5, 5);
        for (int prop = 0; prop < 6; ++prop) {
            for (int stat = 1; stat < 4; ++stat) CHECK(t[stat * 6 + prop] == 0.0);
        }
        CHECK(t[0] == doctest::Approx(1.0));  // ASM
        CHECK(t[1] == 0.0);                   // contrast
        CHECK(t[3] == 0.0);                   // dissimilarity
        CHECK(t[4] == doctest::Approx(1.0));  // energy
        CHECK(t[5] == doctest::Approx(1.0));  // homogeneity
    }
    SUBCASE("two pixels at levels 0 and 31") {
        const std::vector<std::uint8_t> levels{0, 31}, inside{1, 1};
        const auto g = glcm_properties(levels, inside, 2, 1, 0);
        CHECK(g.contrast == doctest::Approx(31.0 * 31.0));
        CHECK(g.dissimilarity == doctest::Approx(31.0));
        CHECK(g.asm_ == doctest::Approx(0.5));
        CHECK(g.correlation == doctest::Approx(-1.0));
        CHECK(glcm_properties(levels, inside, 2, 1, 2).asm_ == 0.0);  // no vertical pairs
    }
    SUBCASE("single pixel gives zeros") {
        const auto t = glcm_stats(std::vector<double>{200.0}, std::vector<std::uint8_t>{1}, 1, 1);
        for (double v : t) CHECK(v == 0.0);
    }
    SUBCASE("random patches against naive pair counting") {
        Rng rng(9);
        for (int trial = 0; trial < 10; ++trial) {
            const std::size_t w = 3 + rng.index(10), h = 3 + rng.index(10);
            std::vector<std::uint8_t> levels(w * h), inside(w * h);
            for (std::size_t k = 0; k < w * h; ++k) {
                levels[k] = static_cast<std::uint8_t>(rng.index(32));
                inside[k] = rng.bernoulli(0.8);
            }
            for (int a = 0; a < 4; ++a) {
                const auto ref = testing::naive_glcm(levels, inside, w, h, a);
                const auto g = glcm_properties(levels, inside, w, h, a);
                if (ref.pairs == 0) {
                    CHECK(g.asm_ == 0.0);
                    continue;
                }
                CHECK(std::abs(g.asm_ - ref.asm_) < 1e-6);
                CHECK(std::abs(g.contrast - ref.contrast) < 1e-6);
                CHECK(std::abs(g.dissimilarity - ref.dissimilarity) < 1e-6);
                CHECK(std::abs(g.homogeneity - ref.homogeneity) < 1e-6);
                CHECK(std::abs(g.energy - ref.energy) < 1e-6);
                CHECK(std::abs(g.correlation - ref.correlation) < 1e-6);
            }
        }
    }
}

TEST_CASE("fourier_shape") {
    auto polygon = [](int sides, auto radius) {
        std::vector<Vec2> c;
        for (int k = 0; k < sides; ++k) {
            const double t = 2 * std::numbers::pi * k / sides;
            const double r = radius(t);
            c.push_back({r * std::cos(t), r * std::sin(t)});
        }
        return c;
    };
    const auto circle = polygon(720, [](double) { return 10.0; });
    const auto [c20, c30] = fourier_shape(circle);
    CHECK(c20 < 1e-3);
    CHECK(c30 < 1e-3);

    const auto blob = polygon(37, [](double t) { return 10.0 + 2.0 * std::sin(3 * t) + std::cos(7 * t); });
    auto moved = blob;
    for (auto& p : moved) p = {3.5 * p.x + 120.25, 3.5 * p.y - 40.0};
    const auto a = fourier_shape(blob), b = fourier_shape(moved);
    CHECK(std::abs(a.first - b.first) < 1e-6);
    CHECK(std::abs(a.second - b.second) < 1e-6);

    const auto star = polygon(400, [](double t) { return 10.0 + 3.0 * std::cos(20 * t); });
    const auto [s20, s30] = fourier_shape(star);
    CHECK(s20 > 5 * s30);
    CHECK(s20 > 0.01);

    CHECK(fourier_shape(std::vector<Vec2>{{1, 1}, {1, 1}, {1, 1}}) == std::pair{0.0, 0.0});
    CHECK(fourier_shape(std::vector<Vec2>{{1, 1}, {2, 2}}) == std::pair{0.0, 0.0});
}

TEST_CASE("boundary loops and hull") {
    BinaryRegion sq{10, 10, std::vector<std::uint8_t>(100, 1)};
    const auto loops = boundary_loops(sq);
    REQUIRE(loops.size() == 1);
    CHECK(polygon_length(loops[0]) == doctest::Approx(36.0 + 4.0 * std::sqrt(0.5)));
    CHECK(std::abs(polygon_signed_area(loops[0])) == doctest::Approx(100.0 - 4 * 0.125));
    CHECK(pixel_hull_area(sq) == doctest::Approx(100.0));

    BinaryRegion ring{5, 5, std::vector<std::uint8_t>(25, 1)};
    ring.inside[12] = 0;
    CHECK(boundary_loops(ring).size() == 2);

    BinaryRegion diag{2, 2, {1, 0, 0, 1}};
    CHECK(boundary_loops(diag).size() == 2);
    CHECK(pixel_hull_area(diag) == doctest::Approx(3.0));
}

TEST_CASE("descriptors of a uniform square") {
    InstanceMask mask(20, 20, 0.5);
    paint_rect(mask, 7, 4, 5, 10, 10);
    const auto cells = extract_descriptors(gray_image(20, 20, 128), mask);
    REQUIRE(cells.descriptors.size() == 1);
    const auto& d = cells.descriptors[0];
    CHECK(descriptor_names().size() == kDescriptorCount);
    for (const char* stat : {"std", "skew", "kurtosis"}) {
        for (const char* c : {"r", "g", "b", "gray"}) CHECK(value(d, (std::string(stat) + "_intensity_" + c).c_str()) == 0.0);
    }
    CHECK(value(d, "mean_intensity_gray") == doctest::Approx(128.0));
    CHECK(value(d, "extent") == 1.0);
    CHECK(value(d, "solidity") == doctest::Approx(1.0));
    CHECK(value(d, "probability") == 1.0);
    const double area = 100 * 0.25, perimeter = (36.0 + 4.0 * std::sqrt(0.5)) * 0.5;
    CHECK(value(d, "area") == doctest::Approx(area));
    CHECK(value(d, "perimeter") == doctest::Approx(perimeter));
    CHECK(value(d, "circularity") == doctest::Approx(4 * std::numbers::pi * area / (perimeter * perimeter)));
    CHECK(value(d, "eccentricity") == doctest::Approx(0.0));
    // variance of a 10-pixel-wide square along either axis is 100/12
    CHECK(value(d, "axis_major_length") == doctest::Approx(4 * std::sqrt(100.0 / 12.0) * 0.5));
    CHECK(cells.centroids_um[0].x == doctest::Approx((4 + 5) * 0.5));
    CHECK(cells.centroids_um[0].y == doctest::Approx((5 + 5) * 0.5));
    CHECK(cells.instance_ids == std::vector<std::uint32_t>{7});
}

TEST_CASE("descriptors of a rasterized disk") {
    InstanceMask mask(60, 60, 0.25);
    paint_disk(mask, 1, 30, 30, 20);
    const auto cells = extract_descriptors(gray_image(60, 60, 50), mask);
    const auto& d = cells.descriptors[0];
    CHECK(value(d, "eccentricity") < 0.1);
    CHECK(value(d, "elongation") >= 1.0);
    CHECK(value(d, "elongation") <= 1.1);
    // the half-pixel contour of a raster disk is slightly longer than the circle
    CHECK(value(d, "circularity") > 0.85);
    CHECK(value(d, "circularity") <= 1.0);
    CHECK(value(d, "fourier_descriptor_20") < 0.01);
    CHECK(value(d, "solidity") > 0.95);
    CHECK(value(d, "solidity") <= 1.0);
    CHECK(value(d, "extent") == doctest::Approx(std::numbers::pi * 400 / (41 * 41)).epsilon(0.02));
}

TEST_CASE("descriptor invariants") {
    Rng rng(3);
    RgbImage img(40, 30);
    for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng.index(256));
    InstanceMask mask(40, 30, 0.5);
    paint_disk(mask, 3, 10, 12, 6);
    paint_rect(mask, 9, 24, 5, 9, 14);
    mask.at(30, 20) = 9;  // an appendage to make the shape irregular

    const auto base = extract_descriptors(img, mask, {{3, 0.75}});
    REQUIRE(base.descriptors.size() == 2);
    CHECK(value(base.descriptors[0], "probability") == 0.75);
    CHECK(value(base.descriptors[1], "probability") == 1.0);
    for (const auto& d : base.descriptors)
        for (double v : d) CHECK(std::isfinite(v));

    SUBCASE("editing one cell leaves the other bit-identical") {
        RgbImage edited = img;
        for (std::size_t y = 0; y < 30; ++y)
            for (std::size_t x = 0; x < 40; ++x)
                if (mask.at(x, y) == 9) edited.set(x, y, 1, 2, 3);
        const auto after = extract_descriptors(edited, mask);
        CHECK(after.descriptors[0] == extract_descriptors(img, mask).descriptors[0]);
        CHECK(after.descriptors[1] != base.descriptors[1]);
    }
    SUBCASE("whole-pixel shifts change only centroids") {
        RgbImage shifted_img(40, 30);
        InstanceMask shifted(40, 30, 0.5);
        for (std::size_t y = 0; y + 3 < 30; ++y)
            for (std::size_t x = 0; x + 2 < 40; ++x) {
                shifted.at(x + 2, y + 3) = mask.at(x, y);
                for (int c = 0; c < 3; ++c) shifted_img.at(x + 2, y + 3, c) = img.at(x, y, c);
            }
        const auto moved = extract_descriptors(shifted_img, shifted, {{3, 0.75}});
        CHECK(moved.descriptors == base.descriptors);
        CHECK(moved.centroids_um[0].x == doctest::Approx(base.centroids_um[0].x + 1.0));
        CHECK(moved.centroids_um[0].y == doctest::Approx(base.centroids_um[0].y + 1.5));
    }
    SUBCASE("size mismatch") { CHECK_THROWS(extract_descriptors(RgbImage(39, 30), mask)); }
}

TEST_CASE("build_cell_graph") {
    SUBCASE("no cells") {
        const auto g = build_cell_graph(RgbImage(8, 8), InstanceMask(8, 8, 0.5));
        CHECK(g.node_count() == 0);
        CHECK(g.features.cols() == kDescriptorCount);
    }
    SUBCASE("one cell") {
        InstanceMask mask(8, 8, 0.5);
        paint_rect(mask, 4, 2, 2, 3, 3);
        const auto g = build_cell_graph(RgbImage(8, 8, 10), mask);
        CHECK(g.node_count() == 1);
        CHECK(g.edges.empty());
    }
    SUBCASE("20-cell grid at 15 um spacing") {
        InstanceMask mask(100, 80, 1.0);
        std::uint32_t id = 1;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 5; ++c) paint_rect(mask, id++, 10 + 15 * c, 10 + 15 * r, 5, 5);
        const auto g = build_cell_graph(RgbImage(100, 80, 200), mask);
        REQUIRE(g.node_count() == 20);
        std::set<std::pair<std::uint32_t, std::uint32_t>> present;
        for (const auto& e : g.edges) {
            present.insert({e.i, e.j});
            CHECK(e.weight < 100.0f);
        }
        for (std::uint32_t r = 0; r < 4; ++r)
            for (std::uint32_t c = 0; c < 5; ++c) {
                const std::uint32_t k = r * 5 + c;
                if (c + 1 < 5) CHECK(present.count({k, k + 1}) == 1);
                if (r + 1 < 4) CHECK(present.count({k, k + 5}) == 1);
            }
        for (const auto& e : g.edges) {
            const bool neighbour = (e.j == e.i + 1 && e.i % 5 != 4) || e.j == e.i + 5;
            if (neighbour) CHECK(e.weight == 15.0f);
        }
    }
    SUBCASE("far-apart cells are not connected") {
        InstanceMask mask(300, 20, 1.0);
        paint_rect(mask, 1, 5, 5, 4, 4);
        paint_rect(mask, 2, 250, 5, 4, 4);
        CHECK(build_cell_graph(RgbImage(300, 20, 0), mask).edges.empty());
    }
    SUBCASE("relabeling ids permutes nodes consistently") {
        Rng rng(11);
        RgbImage img(90, 90);
        for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng.index(256));
        InstanceMask mask(90, 90, 0.5);
        for (std::uint32_t k = 0; k < 12; ++k)
            paint_disk(mask, k + 1, 8 + rng.uniform(0, 74), 8 + rng.uniform(0, 74), 2 + rng.uniform(0, 3));
        InstanceMask relabeled = mask;
        // reverse the id order
        for (auto& id : relabeled.ids)
            if (id != 0) id = 100 - id;
        const auto a = build_cell_graph(img, mask);
        const auto b = build_cell_graph(img, relabeled);
        REQUIRE(a.node_count() == b.node_count());
        const std::size_t n = a.node_count();
        auto perm = [&](std::uint32_t i) { return static_cast<std::uint32_t>(n - 1 - i); };
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(a.positions[i] == b.positions[perm(i)]);
            for (std::size_t f = 0; f < a.features.cols(); ++f) CHECK(a.features(i, f) == b.features(perm(i), f));
        }
        std::set<std::pair<std::uint32_t, std::uint32_t>> ea, eb;
        for (const auto& e : a.edges) ea.insert(std::minmax(perm(e.i), perm(e.j)));
        for (const auto& e : b.edges) eb.insert({e.i, e.j});
        CHECK(ea == eb);
        CHECK(build_cell_graph(img, mask) == a);
    }
}
