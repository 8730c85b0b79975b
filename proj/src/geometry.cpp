#include "hilayout/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "hilayout/error.hpp"

namespace hilayout::geometry {

Rect canonicalize(const Obb2D& b) {
    const Vec2 h = rotated_extents(b.half_extents, b.theta);
    return {{b.center.x - h.x, b.center.y - h.y}, {b.center.x + h.x, b.center.y + h.y}};
}

double intersection_area(const Rect& a, const Rect& b) {
    return interval_overlap(a.lo.x, a.hi.x, b.lo.x, b.hi.x) *
           interval_overlap(a.lo.y, a.hi.y, b.lo.y, b.hi.y);
}

double overlap_area(const Obb2D& a, const Obb2D& b) {
    return intersection_area(canonicalize(a), canonicalize(b));
}

double oob_area(const Obb2D& box, Vec2 bounds) {
    const Rect r = canonicalize(box);
    const double inside = intersection_area(r, Rect::centered({}, bounds));
    return std::max(0.0, r.area() - inside);
}

double protrusion(const Obb2D& box, Vec2 bounds) {
    const Rect r = canonicalize(box);
    const double hx = 0.5 * bounds.x;
    const double hy = 0.5 * bounds.y;
    return std::max({0.0, r.hi.x - hx, -hx - r.lo.x, r.hi.y - hy, -hy - r.lo.y});
}

double wall_distance(const Rect& rect, Facing facing, Vec2 room) {
    const double hx = 0.5 * room.x;
    const double hy = 0.5 * room.y;
    double d = 0.0;
    switch (facing) {
        case Facing::PosY: d = rect.lo.y + hy; break;   // back against -y wall
        case Facing::NegY: d = hy - rect.hi.y; break;
        case Facing::PosX: d = rect.lo.x + hx; break;
        case Facing::NegX: d = hx - rect.hi.x; break;
    }
    return std::max(0.0, d);
}

Rect area_rect(const FunctionalArea& area) {
    if (!area.pose) throw MissingPose("area '" + area.id + "' has no pose");
    return Rect::centered(area.pose->center, area.scene_extents(area.pose->facing));
}

double wall_distance(const FunctionalArea& area, Vec2 room) {
    if (!area.pose) throw MissingPose("area '" + area.id + "' has no pose");
    return wall_distance(area_rect(area), area.pose->facing, room);
}

double area_distance(const Rect& a, const Rect& b) {
    const double dx = std::max({0.0, b.lo.x - a.hi.x, a.lo.x - b.hi.x});
    const double dy = std::max({0.0, b.lo.y - a.hi.y, a.lo.y - b.hi.y});
    return std::hypot(dx, dy);
}

}  // namespace hilayout::geometry
