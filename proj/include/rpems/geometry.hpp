// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "common.hpp"

namespace rpems {

struct Point2 {
    double x = 0;
    double y = 0;
};

using Polygon = std::vector<Point2>;

namespace detail {

inline double cross(Point2 o, Point2 a, Point2 b)
{
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline bool on_segment(Point2 p, Point2 a, Point2 b)
{
    const double scale = std::max({std::abs(a.x), std::abs(a.y), std::abs(b.x), std::abs(b.y), 1.0});
    if (std::abs(cross(a, b, p)) > 1e-12 * scale * scale) return false;
    return p.x >= std::min(a.x, b.x) - 1e-12 * scale && p.x <= std::max(a.x, b.x) + 1e-12 * scale &&
           p.y >= std::min(a.y, b.y) - 1e-12 * scale && p.y <= std::max(a.y, b.y) + 1e-12 * scale;
}

inline int orient(Point2 a, Point2 b, Point2 c)
{
    const double v = cross(a, b, c);
    return (v > 0) - (v < 0);
}

inline bool segments_intersect(Point2 a, Point2 b, Point2 c, Point2 d)
{
    const int o1 = orient(a, b, c), o2 = orient(a, b, d);
    const int o3 = orient(c, d, a), o4 = orient(c, d, b);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(c, a, b)) return true;
    if (o2 == 0 && on_segment(d, a, b)) return true;
    if (o3 == 0 && on_segment(a, c, d)) return true;
    if (o4 == 0 && on_segment(b, c, d)) return true;
    return false;
}

} // namespace detail

inline double signed_area(std::span<const Point2> poly)
{
    double a = 0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % poly.size()];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
}

// True when no two non-adjacent edges touch.
inline bool is_simple(std::span<const Point2> poly)
{
    const std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            const Point2 a = poly[i], b = poly[(i + 1) % n];
            const Point2 c = poly[j], d = poly[(j + 1) % n];
            if (adjacent) {
                // Adjacent edges may only share their common vertex.
                if (n == 3) continue;
                const Point2 far_end = (j == i + 1) ? d : c;
                const Point2 shared_from = (j == i + 1) ? a : b;
                if (detail::orient(a, b, far_end) == 0 && detail::on_segment(far_end, a, b)) return false;
                if (detail::orient(c, d, shared_from) == 0 && detail::on_segment(shared_from, c, d)) return false;
                continue;
            }
            if (detail::segments_intersect(a, b, c, d)) return false;
        }
    }
    return true;
}

inline void validate_polygon(std::span<const Point2> poly, const std::string& name)
{
    require(poly.size() >= 3, name + ": polygon needs at least 3 vertices");
    for (const auto& p : poly) require(std::isfinite(p.x) && std::isfinite(p.y), name + ": non-finite vertex");
    require(std::abs(signed_area(poly)) > 0, name + ": polygon has zero area");
    require(is_simple(poly), name + ": polygon is self-intersecting");
}

// Boundary points count as inside.
inline bool contains(std::span<const Point2> poly, Point2 p)
{
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i)
        if (detail::on_segment(p, poly[i], poly[(i + 1) % n])) return true;
    bool in = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point2 a = poly[i], b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < xc) in = !in;
        }
    }
    return in;
}

} // namespace rpems
