#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hilayout {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Width (local x), depth (local y), height.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec2 xy() const { return {x, y}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

/// Orientation restricted to multiples of 90 degrees, counter-clockwise,
/// 0 = facing +y of the enclosing frame.
class Rot4 {
public:
    constexpr Rot4() = default;
    static constexpr Rot4 quarter_turns(int q) { return Rot4(((q % 4) + 4) % 4); }
    /// Throws std::invalid_argument unless degrees is a multiple of 90.
    static Rot4 from_degrees(long degrees);

    constexpr int quarters() const { return q_; }
    constexpr int degrees() const { return q_ * 90; }
    constexpr bool swaps_axes() const { return (q_ & 1) != 0; }

    friend constexpr Rot4 operator+(Rot4 a, Rot4 b) { return quarter_turns(a.q_ + b.q_); }
    friend constexpr Rot4 operator-(Rot4 a, Rot4 b) { return quarter_turns(a.q_ - b.q_); }
    constexpr Rot4 operator-() const { return quarter_turns(-q_); }
    friend constexpr bool operator==(Rot4, Rot4) = default;

private:
    constexpr explicit Rot4(int q) : q_(q) {}
    int q_ = 0;
};

/// Exact rotation of v by a multiple of 90 degrees.
constexpr Vec2 rotate(Vec2 v, Rot4 r) {
    switch (r.quarters()) {
        case 1: return {-v.y, v.x};
        case 2: return {-v.x, -v.y};
        case 3: return {v.y, -v.x};
        default: return v;
    }
}

/// Extents of a footprint after rotation by r.
constexpr Vec2 rotated_extents(Vec2 size, Rot4 r) {
    return r.swaps_axes() ? Vec2{size.y, size.x} : size;
}

/// Cardinal facing of a functional area.
enum class Facing { PosY, NegX, NegY, PosX };

/// Rotation that turns local +y into the facing direction.
constexpr Rot4 facing_rotation(Facing f) { return Rot4::quarter_turns(static_cast<int>(f)); }
constexpr Facing facing_from_rotation(Rot4 r) { return static_cast<Facing>(r.quarters()); }
std::string to_string(Facing f);
/// Accepts "+y", "-x", "-y", "+x"; throws std::invalid_argument otherwise.
Facing parse_facing(const std::string& s);

struct Pose2D {
    Vec2 center;
    Rot4 theta;
    friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

/// Placement of one object expressed in the frame of another.
struct RelPlacement {
    Vec2 position;
    Rot4 theta;
    friend bool operator==(const RelPlacement&, const RelPlacement&) = default;
};

/// Relative placement of obj in the local frame of anchor.
RelPlacement rel(const Pose2D& obj, const Pose2D& anchor);

/// Inverse of rel: the pose whose placement relative to anchor is r.
Pose2D apply_rel(const Pose2D& anchor, const RelPlacement& r);

struct SceneRoot {
    std::string text;
    Vec2 size;  ///< width x depth of the rectangular floor, meters
    friend bool operator==(const SceneRoot&, const SceneRoot&) = default;
};

struct AreaPose {
    Vec2 center;
    Facing facing = Facing::PosY;

    Pose2D as_pose() const { return {center, facing_rotation(facing)}; }
    friend bool operator==(const AreaPose&, const AreaPose&) = default;
};

struct FunctionalArea {
    std::string id;
    std::string text;
    Vec2 size;  ///< in the area's own frame
    std::optional<AreaPose> pose;
    std::string anchor;
    std::vector<std::string> members;

    /// Extents in the scene frame once a facing is known.
    Vec2 scene_extents(Facing f) const { return rotated_extents(size, facing_rotation(f)); }
    friend bool operator==(const FunctionalArea&, const FunctionalArea&) = default;
};

struct SceneObject {
    std::string id;
    std::string text;
    std::string category;
    std::optional<std::string> asset;
    Vec3 size;
    std::optional<Pose2D> pose;  ///< area-local

    Vec2 footprint() const { return size.xy(); }
    friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

/// Fine-grained relative placement carried by a relation edge (p_e, theta_e, d_e).
struct EdgePlacement {
    Vec2 position;
    Rot4 theta;
    bool aligned = false;
    friend bool operator==(const EdgePlacement&, const EdgePlacement&) = default;
};

struct RelationEdge {
    std::string from;
    std::string to;
    std::optional<std::string> text;
    std::optional<EdgePlacement> placement;
    friend bool operator==(const RelationEdge&, const RelationEdge&) = default;
};

struct SceneHierarchy {
    SceneRoot root;
    std::vector<FunctionalArea> areas;
    std::map<std::string, SceneObject> objects;
    std::vector<RelationEdge> relations;

    const FunctionalArea* find_area(const std::string& id) const;
    FunctionalArea* find_area(const std::string& id);
    /// Area that lists object_id as a member, or nullptr.
    const FunctionalArea* area_of(const std::string& object_id) const;
    /// Relation edge originating at object_id, or nullptr.
    const RelationEdge* relation_from(const std::string& object_id) const;
    std::size_t textual_relation_count() const;

    friend bool operator==(const SceneHierarchy&, const SceneHierarchy&) = default;
};

/// Every violated invariant, as human-readable messages naming the ids
/// involved. Empty when h is valid.
std::vector<std::string> validation_errors(const SceneHierarchy& h);

/// Throws StructureError with the first violation.
void validate(const SceneHierarchy& h);

struct PlacedObject {
    std::string id;
    std::string area;
    Pose2D pose;  ///< scene frame
    Vec3 size;
    std::optional<std::string> relation;  ///< relation phrase that drove the placement
    std::optional<RelPlacement> target;    ///< relative placement handed to the solver
    friend bool operator==(const PlacedObject&, const PlacedObject&) = default;
};

/// Deterministic outcome of a solve, as stored in layout documents.
struct LayoutReport {
    double objective = 0.0;
    double max_overlap = 0.0;
    double max_oob = 0.0;
    bool feasible = false;
    friend bool operator==(const LayoutReport&, const LayoutReport&) = default;
};

/// Solved scene: the hierarchy (with area poses and area-local object poses)
/// plus every object's scene-frame pose.
struct SceneLayout {
    SceneHierarchy hierarchy;
    std::vector<PlacedObject> objects;  ///< sorted by id
    LayoutReport report;

    const PlacedObject* find(const std::string& id) const;
    friend bool operator==(const SceneLayout&, const SceneLayout&) = default;
};

/// Compose area poses with area-local object poses. Throws MissingPose when
/// any area or member object lacks a pose.
SceneLayout to_scene_frame(const SceneHierarchy& h);

}  // namespace hilayout
