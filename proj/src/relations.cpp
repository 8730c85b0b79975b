#include "hilayout/relations.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "hilayout/geometry.hpp"

namespace hilayout {

namespace {

struct Entry {
    Relation kind;
    std::string_view text;
};

constexpr Entry kVocabulary[] = {
    {Relation::LeftOf, "left of"},       {Relation::RightOf, "right of"},
    {Relation::InFrontOf, "in front of"}, {Relation::Behind, "behind"},
    {Relation::NextTo, "next to"},        {Relation::Facing, "facing"},
};

}  // namespace

std::string_view phrase(Relation r) {
    for (const auto& e : kVocabulary) {
        if (e.kind == r) return e.text;
    }
    return "";
}

const std::vector<Relation>& all_relations() {
    static const std::vector<Relation> all = [] {
        std::vector<Relation> v;
        for (const auto& e : kVocabulary) v.push_back(e.kind);
        return v;
    }();
    return all;
}

std::optional<Relation> lookup_relation(std::string_view text) {
    std::string norm;
    bool pending_space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !norm.empty();
            continue;
        }
        if (pending_space) norm.push_back(' ');
        pending_space = false;
        norm.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    for (const auto& e : kVocabulary) {
        if (e.text == norm) return e.kind;
    }
    return std::nullopt;
}

double footprint_gap(const RelPlacement& p, Vec2 anchor_size, Vec2 object_size) {
    using namespace geometry;
    const Rect a = Rect::centered({}, anchor_size);
    const Rect o = Rect::centered(p.position, rotated_extents(object_size, p.theta));
    return area_distance(a, o);
}

bool relation_holds(Relation r, const RelPlacement& p, Vec2 anchor_size, Vec2 object_size,
                    const RelationMargins& m) {
    const Vec2 ext = rotated_extents(object_size, p.theta);
    const double max_depth = std::max(anchor_size.y, ext.y);
    switch (r) {
        case Relation::LeftOf: return p.position.x < -m.side && std::abs(p.position.y) < max_depth;
        case Relation::RightOf: return p.position.x > m.side && std::abs(p.position.y) < max_depth;
        case Relation::InFrontOf: return p.position.y > m.side;
        case Relation::Behind: return p.position.y < -m.side;
        case Relation::NextTo: return footprint_gap(p, anchor_size, object_size) < m.next_to_gap;
        case Relation::Facing: return p.position.y > m.side && p.theta == Rot4::quarter_turns(2);
    }
    return false;
}

RelPlacement canonical_offset(Relation r, Vec2 anchor_size, Vec2 object_size, int side,
                              const RelationMargins& m) {
    auto beside = [&](double sign, Rot4 theta) {
        const Vec2 ext = rotated_extents(object_size, theta);
        return RelPlacement{{sign * (0.5 * anchor_size.x + 0.5 * ext.x + m.clearance), 0.0}, theta};
    };
    auto ahead = [&](double sign, double gap, Rot4 theta) {
        const Vec2 ext = rotated_extents(object_size, theta);
        return RelPlacement{{0.0, sign * (0.5 * anchor_size.y + 0.5 * ext.y + gap)}, theta};
    };
    const Rot4 same{};
    const Rot4 opposite = Rot4::quarter_turns(2);
    switch (r) {
        case Relation::LeftOf: return beside(-1.0, same);
        case Relation::RightOf: return beside(1.0, same);
        case Relation::InFrontOf: return ahead(1.0, m.clearance, opposite);
        case Relation::Behind: return ahead(-1.0, m.clearance, same);
        case Relation::NextTo: return beside(side < 0 ? -1.0 : 1.0, same);
        case Relation::Facing: return ahead(1.0, m.facing_gap, opposite);
    }
    return {};
}

bool alignment_predicate(const RelPlacement& p, const RelationMargins& m) {
    return p.theta == Rot4{} &&
           (std::abs(p.position.x) < m.align_tol || std::abs(p.position.y) < m.align_tol);
}

}  // namespace hilayout
