#pragma once

#include <string>

#include "hilayout/relations.hpp"
#include "hilayout/rng.hpp"
#include "hilayout/scene_model.hpp"

namespace gen {

using namespace hilayout;

inline std::string random_text(Rng& rng) {
    static const char* words[] = {"oak", "bed", "\"quoted\"", "tab\there", "back\\slash", "lamp", "blue",
                                  "chair", "c'est", "naïve", "x->y", "{brace}", "#hash", "a: b", "//x"};
    std::string s;
    const auto n = 1 + rng.below(4);
    for (std::uint64_t i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += words[rng.below(std::size(words))];
    }
    return s;
}

inline std::string random_id(Rng& rng, const std::string& prefix, std::size_t k) {
    // mix bare ids and ids that need quoting
    if (rng.below(5) == 0) return prefix + " " + std::to_string(k);
    return prefix + "_" + std::to_string(k);
}

inline double random_real(Rng& rng, double lo, double hi) {
    // full-precision doubles exercise shortest round-trip formatting
    return rng.uniform(lo, hi);
}

/// Random hierarchy satisfying every scene_model invariant.
inline SceneHierarchy random_hierarchy(Rng& rng) {
    SceneHierarchy h;
    h.root.text = random_text(rng);
    h.root.size = {random_real(rng, 2, 30), random_real(rng, 2, 30)};
    const auto n_areas = 1 + rng.below(4);
    std::size_t obj_counter = 0;
    for (std::uint64_t ai = 0; ai < n_areas; ++ai) {
        FunctionalArea a;
        a.id = random_id(rng, "area", ai);
        a.text = random_text(rng);
        a.size = {random_real(rng, 0.5, 5), random_real(rng, 0.5, 5)};
        if (rng.below(2)) {
            a.pose = AreaPose{{random_real(rng, -5, 5), random_real(rng, -5, 5)},
                              static_cast<Facing>(rng.below(4))};
        }
        const auto n_obj = 1 + rng.below(5);
        for (std::uint64_t oi = 0; oi < n_obj; ++oi) {
            SceneObject o;
            o.id = random_id(rng, "obj", obj_counter++);
            o.text = random_text(rng);
            o.category = random_text(rng);
            o.size = {random_real(rng, 0.1, 2), random_real(rng, 0.1, 2), random_real(rng, 0.1, 2)};
            if (rng.below(3) == 0) o.asset = "asset_" + std::to_string(rng.below(100));
            if (rng.below(2)) {
                o.pose = Pose2D{{random_real(rng, -2, 2), random_real(rng, -2, 2)},
                                Rot4::quarter_turns(static_cast<int>(rng.below(4)))};
            }
            a.members.push_back(o.id);
            h.objects.emplace(o.id, std::move(o));
        }
        a.anchor = a.members[rng.below(a.members.size())];
        for (const auto& m : a.members) {
            if (m == a.anchor || rng.below(3) == 0) continue;
            RelationEdge e;
            e.from = m;
            e.to = a.anchor;
            if (rng.below(4) != 0) e.text = std::string(phrase(all_relations()[rng.below(all_relations().size())]));
            if (rng.below(2)) {
                e.placement = EdgePlacement{{random_real(rng, -3, 3), random_real(rng, -3, 3)},
                                            Rot4::quarter_turns(static_cast<int>(rng.below(4))), rng.below(2) == 1};
            }
            h.relations.push_back(std::move(e));
        }
        h.areas.push_back(std::move(a));
    }
    return h;
}

}  // namespace gen
