#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hilayout/scene_model.hpp"

namespace hilayout {

/// Closed vocabulary of textual spatial relations between a satellite
/// object and its area's anchor.
enum class Relation { LeftOf, RightOf, InFrontOf, Behind, NextTo, Facing };

std::string_view phrase(Relation r);
const std::vector<Relation>& all_relations();

/// Case- and surrounding-whitespace-insensitive exact match; internal runs
/// of whitespace collapse to one space. No fuzzy matching.
std::optional<Relation> lookup_relation(std::string_view text);

/// Margins shared by the corpus templates, the rule fallback and the
/// semantic-alignment checker so that all three agree.
struct RelationMargins {
    double side = 0.10;        ///< |offset| that counts as clearly left/right/front/behind
    double next_to_gap = 0.30; ///< max footprint gap for "next to"
    double clearance = 0.05;   ///< gap used by canonical offsets
    double facing_gap = 1.20;  ///< viewing distance for "facing"
    double align_tol = 0.05;   ///< alignment predicate tolerance
};

inline constexpr RelationMargins kDefaultMargins{};

/// Does the realized placement of a satellite (footprint object_size, in the
/// anchor frame) satisfy relation r with respect to an anchor with
/// footprint anchor_size centered at the origin?
bool relation_holds(Relation r, const RelPlacement& realized, Vec2 anchor_size, Vec2 object_size,
                    const RelationMargins& m = kDefaultMargins);

/// Canonical offset for relation r. side = +1 / -1 picks the side for
/// "next to" (ignored otherwise).
RelPlacement canonical_offset(Relation r, Vec2 anchor_size, Vec2 object_size, int side = 1,
                              const RelationMargins& m = kDefaultMargins);

/// Alignment indicator d_e: equal orientation and the satellite centered on
/// one of the anchor's axes.
bool alignment_predicate(const RelPlacement& p, const RelationMargins& m = kDefaultMargins);

/// Gap between the anchor footprint (origin, unrotated) and the satellite
/// footprint at p.
double footprint_gap(const RelPlacement& p, Vec2 anchor_size, Vec2 object_size);

}  // namespace hilayout
