#include "cellgraph/construct/delaunay.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>

namespace cellgraph::construct {

namespace {

constexpr std::int64_t kGhost = -1;  // the vertex at infinity

// Counter-clockwise triangle; a ghost triangle (u, v, kGhost) sits outside
// hull edge u->v (the hull lies to its right).
struct Triangle {
    std::array<std::int64_t, 3> v;
    bool alive = true;
};

// p is known to be collinear with a and b, so one coordinate range decides
bool strictly_between(const Vec2& a, const Vec2& b, const Vec2& p) {
    if (a.x != b.x) return (a.x < p.x && p.x < b.x) || (b.x < p.x && p.x < a.x);
    return (a.y < p.y && p.y < b.y) || (b.y < p.y && p.y < a.y);
}

bool in_conflict(const Triangle& t, std::span<const Vec2> pts, const Vec2& p) {
    if (t.v[2] == kGhost) {
        const Vec2& u = pts[t.v[0]];
        const Vec2& w = pts[t.v[1]];
        const int o = orient2d(u, w, p);
        if (o > 0) return true;
        return o == 0 && strictly_between(u, w, p);
    }
    return incircle(pts[t.v[0]], pts[t.v[1]], pts[t.v[2]], p) > 0;
}

Triangle make_triangle(std::int64_t a, std::int64_t b, std::int64_t c) {
    // keep the ghost vertex last, preserving cyclic order
    if (a == kGhost) return {{b, c, a}};
    if (b == kGhost) return {{c, a, b}};
    return {{a, b, c}};
}

std::vector<IndexPair> collinear_chain(std::span<const Vec2> pts, std::span<const std::uint32_t> order) {
    std::vector<std::uint32_t> idx(order.begin(), order.end());
    // all points lie on one line, so lexicographic order is order along it
    std::sort(idx.begin(), idx.end(), [&](std::uint32_t i, std::uint32_t j) {
        if (pts[i].x != pts[j].x) return pts[i].x < pts[j].x;
        return pts[i].y < pts[j].y;
    });
    std::vector<IndexPair> edges;
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) edges.emplace_back(std::minmax(idx[k], idx[k + 1]));
    std::sort(edges.begin(), edges.end());
    return edges;
}

std::vector<IndexPair> triangulate_distinct(std::span<const Vec2> pts, std::span<const std::uint32_t> order) {
    const std::size_t n = order.size();
    if (n < 2) return {};
    if (n == 2) return {std::minmax(order[0], order[1])};

    std::size_t third = n;
    for (std::size_t k = 2; k < n; ++k)
        if (orient2d(pts[order[0]], pts[order[1]], pts[order[k]]) != 0) {
            third = k;
            break;
        }
    if (third == n) return collinear_chain(pts, order);

    std::vector<Triangle> tris;
    std::int64_t a = order[0], b = order[1], c = order[third];
    if (orient2d(pts[a], pts[b], pts[c]) < 0) std::swap(b, c);
    tris.push_back({{a, b, c}});
    tris.push_back(make_triangle(b, a, kGhost));
    tris.push_back(make_triangle(c, b, kGhost));
    tris.push_back(make_triangle(a, c, kGhost));

    std::map<std::pair<std::int64_t, std::int64_t>, int> boundary;
    for (std::size_t k = 2; k < n; ++k) {
        if (k == third) continue;
        const std::int64_t p = order[k];
        boundary.clear();
        for (auto& t : tris) {
            if (!t.alive || !in_conflict(t, pts, pts[p])) continue;
            t.alive = false;
            for (int e = 0; e < 3; ++e) {
                const auto u = t.v[e], w = t.v[(e + 1) % 3];
                if (auto it = boundary.find({w, u}); it != boundary.end())
                    boundary.erase(it);  // shared with another cavity triangle
                else
                    boundary.emplace(std::pair{u, w}, 0);
            }
        }
        if (boundary.empty()) throw std::logic_error("delaunay: inserted point has an empty cavity");
        std::erase_if(tris, [](const Triangle& t) { return !t.alive; });
        for (const auto& [edge, unused] : boundary) tris.push_back(make_triangle(edge.first, edge.second, p));
    }

    std::vector<IndexPair> edges;
    for (const auto& t : tris) {
        if (t.v[2] == kGhost) continue;
        for (int e = 0; e < 3; ++e) {
            const auto u = static_cast<std::uint32_t>(t.v[e]);
            const auto w = static_cast<std::uint32_t>(t.v[(e + 1) % 3]);
            edges.emplace_back(std::minmax(u, w));
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

}  // namespace

std::vector<IndexPair> delaunay(std::span<const Vec2> points) {
    for (const auto& p : points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::invalid_argument("delaunay: non-finite point");

    // first occurrence of each distinct point
    std::vector<std::uint32_t> rep(points.size());
    std::vector<std::uint32_t> distinct;
    std::map<std::pair<double, double>, std::uint32_t> first;
    for (std::uint32_t i = 0; i < points.size(); ++i) {
        auto [it, inserted] = first.emplace(std::pair{points[i].x, points[i].y}, i);
        rep[i] = it->second;
        if (inserted) distinct.push_back(i);
    }

    std::vector<IndexPair> edges = triangulate_distinct(points, distinct);
    if (distinct.size() != points.size()) {
        std::vector<std::vector<std::uint32_t>> copies(points.size());
        for (std::uint32_t i = 0; i < points.size(); ++i)
            if (rep[i] != i) copies[rep[i]].push_back(i);
        const std::size_t base = edges.size();
        for (std::size_t e = 0; e < base; ++e) {
            const auto [u, w] = edges[e];
            for (auto cu : copies[u]) edges.emplace_back(std::minmax(cu, w));
            for (auto cw : copies[w]) edges.emplace_back(std::minmax(u, cw));
            for (auto cu : copies[u])
                for (auto cw : copies[w]) edges.emplace_back(std::minmax(cu, cw));
        }
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    }
    return edges;
}

std::vector<graph::Edge> prune_and_weight(std::span<const IndexPair> edges, std::span<const Vec2> centroids_um) {
    std::vector<graph::Edge> out;
    for (const auto& [i, j] : edges) {
        if (i >= centroids_um.size() || j >= centroids_um.size())
            throw std::out_of_range("prune_and_weight: edge endpoint out of range");
        const double d = std::hypot(centroids_um[i].x - centroids_um[j].x, centroids_um[i].y - centroids_um[j].y);
        const auto w = static_cast<float>(d);
        // the stored float weight must stay inside the open interval too
        if (d > 0.0 && d < graph::kMaxEdgeLengthUm && w > 0.0f && w < graph::kMaxEdgeLengthUm)
            out.push_back({std::min(i, j), std::max(i, j), w});
    }
    graph::canonicalize_edges(out);
    return out;
}

}  // namespace cellgraph::construct
