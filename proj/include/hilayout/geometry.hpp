#pragma once

#include "hilayout/scene_model.hpp"

namespace hilayout::geometry {

/// Feasibility tolerances used everywhere downstream.
inline constexpr double kOverlapTol = 1e-6;  // m^2
inline constexpr double kOobTol = 1e-6;      // m^2

struct Obb2D {
    Vec2 center;
    Vec2 half_extents;
    Rot4 theta;

    static Obb2D from_size(Vec2 center, Vec2 size, Rot4 theta = {}) {
        return {center, size * 0.5, theta};
    }
    double area() const { return 4.0 * half_extents.x * half_extents.y; }
};

/// Axis-aligned rectangle; every Obb2D with a quarter-turn orientation
/// canonicalizes to one of these.
struct Rect {
    Vec2 lo;
    Vec2 hi;

    static Rect centered(Vec2 center, Vec2 size) {
        return {{center.x - 0.5 * size.x, center.y - 0.5 * size.y},
                {center.x + 0.5 * size.x, center.y + 0.5 * size.y}};
    }
    double width() const { return hi.x - lo.x; }
    double depth() const { return hi.y - lo.y; }
    double area() const { return width() * depth(); }
    Vec2 center() const { return {0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y)}; }
};

Rect canonicalize(const Obb2D& b);

/// Length of the overlap of [a0, a1] and [b0, b1].
inline double interval_overlap(double a0, double a1, double b0, double b1) {
    const double lo = a0 > b0 ? a0 : b0;
    const double hi = a1 < b1 ? a1 : b1;
    return hi > lo ? hi - lo : 0.0;
}

double intersection_area(const Rect& a, const Rect& b);

/// Exact intersection area of two boxes.
double overlap_area(const Obb2D& a, const Obb2D& b);

/// Area of box lying outside the rectangle of extents bounds centered at the origin.
double oob_area(const Obb2D& box, Vec2 bounds);

/// Largest distance by which the box protrudes beyond the bounds on any side.
double protrusion(const Obb2D& box, Vec2 bounds);

/// D_w: distance from the back edge of an area (the side opposite its
/// facing) to the room wall behind it, clamped at zero.
double wall_distance(const FunctionalArea& area, Vec2 room);
double wall_distance(const Rect& area_rect, Facing facing, Vec2 room);

/// D_a: Euclidean gap between two rectangles, 0 when touching or overlapping.
double area_distance(const Rect& a, const Rect& b);

/// Scene-frame rectangle of a posed area.
Rect area_rect(const FunctionalArea& area);

}  // namespace hilayout::geometry
