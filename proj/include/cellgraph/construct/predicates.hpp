#pragma once

namespace cellgraph::construct {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Sign of the orientation determinant: +1 if c lies left of a->b
/// (counter-clockwise), -1 if right, 0 if collinear. Exact for all inputs.
int orient2d(const Vec2& a, const Vec2& b, const Vec2& c);

/// +1 if d lies strictly inside the circumcircle of the counter-clockwise
/// triangle (a, b, c), -1 if strictly outside, 0 if cocircular. Exact.
int incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

}  // namespace cellgraph::construct
