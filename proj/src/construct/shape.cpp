#include "cellgraph/construct/shape.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <stdexcept>

namespace cellgraph::construct {

bool BinaryRegion::at(std::ptrdiff_t x, std::ptrdiff_t y) const {
    if (x < 0 || y < 0 || x >= static_cast<std::ptrdiff_t>(width) || y >= static_cast<std::ptrdiff_t>(height))
        return false;
    return inside[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)] != 0;
}

std::size_t BinaryRegion::area() const {
    return static_cast<std::size_t>(std::count_if(inside.begin(), inside.end(), [](std::uint8_t v) { return v != 0; }));
}

namespace {

// Points on the half-pixel lattice, stored at twice their coordinates.
using Key = std::pair<std::int64_t, std::int64_t>;

void link(std::map<Key, std::vector<Key>>& adj, const Key& a, const Key& b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
}

}  // namespace

std::vector<std::vector<Vec2>> boundary_loops(const BinaryRegion& region) {
    if (region.inside.size() != region.width * region.height)
        throw std::invalid_argument("boundary_loops: buffer size does not match region size");
    std::map<Key, std::vector<Key>> adj;
    const auto w = static_cast<std::ptrdiff_t>(region.width);
    const auto h = static_cast<std::ptrdiff_t>(region.height);
    for (std::ptrdiff_t y = -1; y < h; ++y)
        for (std::ptrdiff_t x = -1; x < w; ++x) {
            const bool tl = region.at(x, y), tr = region.at(x + 1, y);
            const bool br = region.at(x + 1, y + 1), bl = region.at(x, y + 1);
            const Key top{2 * x + 1, 2 * y}, right{2 * x + 2, 2 * y + 1};
            const Key bottom{2 * x + 1, 2 * y + 2}, left{2 * x, 2 * y + 1};
            std::vector<Key> cut;
            if (tl != tr) cut.push_back(top);
            if (tr != br) cut.push_back(right);
            if (br != bl) cut.push_back(bottom);
            if (bl != tl) cut.push_back(left);
            if (cut.size() == 2) {
                link(adj, cut[0], cut[1]);
            } else if (cut.size() == 4) {
                // saddle: diagonal pixels are not joined
                if (tl) {
                    link(adj, top, left);
                    link(adj, right, bottom);
                } else {
                    link(adj, top, right);
                    link(adj, bottom, left);
                }
            }
        }

    std::vector<std::vector<Vec2>> loops;
    std::map<Key, bool> visited;
    for (const auto& [start, next] : adj) {
        if (visited[start]) continue;
        std::vector<Vec2> loop;
        Key prev = start, cur = start;
        do {
            visited[cur] = true;
            loop.push_back({cur.first / 2.0, cur.second / 2.0});
            const auto& nb = adj.at(cur);
            const Key chosen = loop.size() == 1 ? nb[0] : (nb[0] == prev ? nb[1] : nb[0]);
            prev = cur;
            cur = chosen;
        } while (cur != start);
        loops.push_back(std::move(loop));
    }
    return loops;
}

double polygon_length(std::span<const Vec2> loop) {
    double len = 0.0;
    for (std::size_t k = 0; k < loop.size(); ++k) {
        const Vec2& a = loop[k];
        const Vec2& b = loop[(k + 1) % loop.size()];
        len += std::hypot(b.x - a.x, b.y - a.y);
    }
    return len;
}

double polygon_signed_area(std::span<const Vec2> loop) {
    double twice = 0.0;
    for (std::size_t k = 0; k < loop.size(); ++k) {
        const Vec2& a = loop[k];
        const Vec2& b = loop[(k + 1) % loop.size()];
        twice += a.x * b.y - b.x * a.y;
    }
    return twice / 2.0;
}

double pixel_hull_area(const BinaryRegion& region) {
    // pixel corners at twice their coordinates, so all arithmetic is integral
    std::vector<Key> pts;
    for (std::size_t y = 0; y < region.height; ++y)
        for (std::size_t x = 0; x < region.width; ++x) {
            if (!region.inside[y * region.width + x]) continue;
            const auto X = 2 * static_cast<std::int64_t>(x), Y = 2 * static_cast<std::int64_t>(y);
            pts.insert(pts.end(), {{X - 1, Y - 1}, {X + 1, Y - 1}, {X - 1, Y + 1}, {X + 1, Y + 1}});
        }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return 0.0;
    auto cross = [](const Key& o, const Key& a, const Key& b) {
        return (a.first - o.first) * (b.second - o.second) - (a.second - o.second) * (b.first - o.first);
    };
    std::vector<Key> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    std::int64_t twice = 0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const auto& a = hull[i];
        const auto& b = hull[(i + 1) % hull.size()];
        twice += a.first * b.second - b.first * a.second;
    }
    return std::abs(static_cast<double>(twice)) / 8.0;  // doubled coordinates scale area by 4
}

Ellipse moment_ellipse(const BinaryRegion& region) {
    double n = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t y = 0; y < region.height; ++y)
        for (std::size_t x = 0; x < region.width; ++x)
            if (region.inside[y * region.width + x]) {
                n += 1.0;
                sx += static_cast<double>(x);
                sy += static_cast<double>(y);
            }
    if (n == 0.0) throw std::invalid_argument("moment_ellipse: empty region");
    const double cx = sx / n, cy = sy / n;
    double mxx = 0.0, myy = 0.0, mxy = 0.0;
    for (std::size_t y = 0; y < region.height; ++y)
        for (std::size_t x = 0; x < region.width; ++x)
            if (region.inside[y * region.width + x]) {
                const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
                mxx += dx * dx;
                myy += dy * dy;
                mxy += dx * dy;
            }
    // a unit square contributes 1/12 of spread about its own centre on each axis
    mxx = mxx / n + 1.0 / 12.0;
    myy = myy / n + 1.0 / 12.0;
    mxy /= n;
    const double half_trace = (mxx + myy) / 2.0;
    const double root = std::sqrt(((mxx - myy) / 2.0) * ((mxx - myy) / 2.0) + mxy * mxy);
    const double l1 = half_trace + root, l2 = std::max(half_trace - root, 0.0);
    Ellipse e;
    e.orientation = 0.5 * std::atan2(2.0 * mxy, mxx - myy);
    e.major = 4.0 * std::sqrt(l1);
    e.minor = 4.0 * std::sqrt(l2);
    e.eccentricity = std::sqrt(std::max(0.0, 1.0 - l2 / l1));
    return e;
}

std::pair<double, double> fourier_shape(std::span<const Vec2> contour) {
    constexpr int kSamples = 64;
    if (contour.size() < 3) return {0.0, 0.0};
    const double total = polygon_length(contour);
    if (!(total > 0.0) || !std::isfinite(total)) return {0.0, 0.0};

    Vec2 centre{0.0, 0.0};
    const double area = polygon_signed_area(contour);
    if (std::abs(area) > 1e-12 * total * total) {
        for (std::size_t k = 0; k < contour.size(); ++k) {
            const Vec2& a = contour[k];
            const Vec2& b = contour[(k + 1) % contour.size()];
            const double c = a.x * b.y - b.x * a.y;
            centre.x += (a.x + b.x) * c;
            centre.y += (a.y + b.y) * c;
        }
        centre.x /= 6.0 * area;
        centre.y /= 6.0 * area;
    } else {
        for (const auto& p : contour) {
            centre.x += p.x;
            centre.y += p.y;
        }
        centre.x /= static_cast<double>(contour.size());
        centre.y /= static_cast<double>(contour.size());
    }

    std::vector<double> signature(kSamples);
    std::size_t seg = 0;
    double seg_start = 0.0;
    double seg_len = std::hypot(contour[1].x - contour[0].x, contour[1].y - contour[0].y);
    for (int s = 0; s < kSamples; ++s) {
        const double target = total * s / kSamples;
        while (seg_start + seg_len < target && seg + 1 < contour.size()) {
            seg_start += seg_len;
            ++seg;
            const Vec2& a = contour[seg];
            const Vec2& b = contour[(seg + 1) % contour.size()];
            seg_len = std::hypot(b.x - a.x, b.y - a.y);
        }
        const Vec2& a = contour[seg];
        const Vec2& b = contour[(seg + 1) % contour.size()];
        const double t = seg_len > 0.0 ? std::clamp((target - seg_start) / seg_len, 0.0, 1.0) : 0.0;
        const double px = a.x + t * (b.x - a.x), py = a.y + t * (b.y - a.y);
        signature[s] = std::hypot(px - centre.x, py - centre.y);
    }

    auto coefficient = [&](int k) {
        std::complex<double> c{0.0, 0.0};
        for (int s = 0; s < kSamples; ++s)
            c += signature[s] * std::polar(1.0, -2.0 * std::numbers::pi * k * s / kSamples);
        return std::abs(c);
    };
    const double c0 = coefficient(0);
    if (!(c0 > 0.0)) return {0.0, 0.0};
    return {coefficient(20) / c0, coefficient(30) / c0};
}

}  // namespace cellgraph::construct
