#include "hilayout/scene_model.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "hilayout/error.hpp"
#include "hilayout/relations.hpp"

namespace hilayout {

Rot4 Rot4::from_degrees(long degrees) {
    if (degrees % 90 != 0) {
        throw std::invalid_argument("orientation must be a multiple of 90 degrees, got " +
                                    std::to_string(degrees));
    }
    return quarter_turns(static_cast<int>((degrees / 90) % 4));
}

std::string to_string(Facing f) {
    switch (f) {
        case Facing::PosY: return "+y";
        case Facing::NegX: return "-x";
        case Facing::NegY: return "-y";
        case Facing::PosX: return "+x";
    }
    return "+y";
}

Facing parse_facing(const std::string& s) {
    if (s == "+y") return Facing::PosY;
    if (s == "-x") return Facing::NegX;
    if (s == "-y") return Facing::NegY;
    if (s == "+x") return Facing::PosX;
    throw std::invalid_argument("unknown facing '" + s + "' (expected +x, -x, +y or -y)");
}

RelPlacement rel(const Pose2D& obj, const Pose2D& anchor) {
    return {rotate(obj.center - anchor.center, -anchor.theta), obj.theta - anchor.theta};
}

Pose2D apply_rel(const Pose2D& anchor, const RelPlacement& r) {
    return {anchor.center + rotate(r.position, anchor.theta), anchor.theta + r.theta};
}

const FunctionalArea* SceneHierarchy::find_area(const std::string& id) const {
    auto it = std::find_if(areas.begin(), areas.end(), [&](const auto& a) { return a.id == id; });
    return it == areas.end() ? nullptr : &*it;
}

FunctionalArea* SceneHierarchy::find_area(const std::string& id) {
    auto it = std::find_if(areas.begin(), areas.end(), [&](const auto& a) { return a.id == id; });
    return it == areas.end() ? nullptr : &*it;
}

const FunctionalArea* SceneHierarchy::area_of(const std::string& object_id) const {
    for (const auto& a : areas) {
        if (std::find(a.members.begin(), a.members.end(), object_id) != a.members.end()) return &a;
    }
    return nullptr;
}

const RelationEdge* SceneHierarchy::relation_from(const std::string& object_id) const {
    auto it = std::find_if(relations.begin(), relations.end(),
                           [&](const auto& e) { return e.from == object_id; });
    return it == relations.end() ? nullptr : &*it;
}

std::size_t SceneHierarchy::textual_relation_count() const {
    return static_cast<std::size_t>(std::count_if(
        relations.begin(), relations.end(), [](const auto& e) { return e.text.has_value(); }));
}

std::vector<std::string> validation_errors(const SceneHierarchy& h) {
    std::vector<std::string> errs;
    if (h.root.text.empty()) errs.push_back("scene text is empty");
    if (!(h.root.size.x > 0 && h.root.size.y > 0 && h.root.size.x <= 30 && h.root.size.y <= 30)) {
        errs.push_back("scene size must be in (0, 30] m on both axes");
    }

    std::map<std::string, std::string> owner;
    std::set<std::string> area_ids;
    for (const auto& a : h.areas) {
        if (a.id.empty()) errs.push_back("area with empty id");
        if (!area_ids.insert(a.id).second) errs.push_back("duplicate area id '" + a.id + "'");
        if (!(a.size.x > 0 && a.size.y > 0)) errs.push_back("area '" + a.id + "' has non-positive size");
        if (a.members.empty()) errs.push_back("area '" + a.id + "' has no members");
        if (std::find(a.members.begin(), a.members.end(), a.anchor) == a.members.end()) {
            errs.push_back("area '" + a.id + "' anchor '" + a.anchor + "' is not a member");
        }
        for (const auto& m : a.members) {
            auto [it, fresh] = owner.emplace(m, a.id);
            if (!fresh) {
                errs.push_back("object '" + m + "' belongs to areas '" + it->second + "' and '" + a.id + "'");
            }
            if (!h.objects.contains(m)) {
                errs.push_back("area '" + a.id + "' lists unknown object '" + m + "'");
            }
        }
    }
    for (const auto& [id, o] : h.objects) {
        if (o.id != id) errs.push_back("object key '" + id + "' does not match its id '" + o.id + "'");
        if (!owner.contains(id)) errs.push_back("object '" + id + "' belongs to no area");
        if (!(o.size.x > 0 && o.size.y > 0 && o.size.z > 0)) {
            errs.push_back("object '" + id + "' has non-positive size");
        }
    }

    std::set<std::string> sources;
    for (const auto& e : h.relations) {
        const std::string tag = "relation '" + e.from + "' -> '" + e.to + "'";
        if (e.from == e.to) errs.push_back(tag + " is a self loop");
        if (!h.objects.contains(e.from) || !h.objects.contains(e.to)) {
            errs.push_back(tag + " references an unknown object");
            continue;
        }
        if (!sources.insert(e.from).second) errs.push_back("object '" + e.from + "' has two relations");
        auto fa = owner.find(e.from);
        auto ta = owner.find(e.to);
        if (fa == owner.end() || ta == owner.end()) continue;
        if (fa->second != ta->second) {
            errs.push_back(tag + " spans areas '" + fa->second + "' and '" + ta->second + "'");
            continue;
        }
        const FunctionalArea* area = h.find_area(fa->second);
        if (area && area->anchor != e.to) errs.push_back(tag + " does not target the area anchor");
        if (e.text && !lookup_relation(*e.text)) errs.push_back(tag + " has unknown phrase '" + *e.text + "'");
    }
    return errs;
}

void validate(const SceneHierarchy& h) {
    auto errs = validation_errors(h);
    if (!errs.empty()) throw StructureError(errs.front());
}

const PlacedObject* SceneLayout::find(const std::string& id) const {
    auto it = std::find_if(objects.begin(), objects.end(), [&](const auto& o) { return o.id == id; });
    return it == objects.end() ? nullptr : &*it;
}

SceneLayout to_scene_frame(const SceneHierarchy& h) {
    SceneLayout out;
    out.hierarchy = h;
    for (const auto& a : h.areas) {
        if (!a.pose) throw MissingPose("area '" + a.id + "' has no pose");
        const Pose2D frame = a.pose->as_pose();
        for (const auto& m : a.members) {
            const auto& o = h.objects.at(m);
            if (!o.pose) throw MissingPose("object '" + m + "' has no pose");
            PlacedObject p;
            p.id = m;
            p.area = a.id;
            p.pose = apply_rel(frame, {o.pose->center, o.pose->theta});
            p.size = o.size;
            if (const auto* e = h.relation_from(m)) p.relation = e->text;
            out.objects.push_back(std::move(p));
        }
    }
    std::sort(out.objects.begin(), out.objects.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
}

}  // namespace hilayout
