#pragma once

#include <array>
#include <map>
#include <string>

#include "hilayout/scene_model.hpp"

namespace hilayout {

/// Decoded relative placement of a satellite in its anchor's frame
/// (p̂_e, θ̂_e, d̂_e).
struct PredictedPlacement {
    Vec2 position;
    std::array<double, 4> theta_probs{1.0, 0.0, 0.0, 0.0};  ///< bins 0, 90, 180, 270 degrees
    double aligned_prob = 0.0;

    /// Most probable orientation; the lowest bin wins ties.
    Rot4 theta() const {
        int best = 0;
        for (int k = 1; k < 4; ++k) {
            if (theta_probs[k] > theta_probs[best]) best = k;
        }
        return Rot4::quarter_turns(best);
    }
    bool aligned() const { return aligned_prob > 0.5; }
    RelPlacement as_rel() const { return {position, theta()}; }
    friend bool operator==(const PredictedPlacement&, const PredictedPlacement&) = default;
};

/// One prediction per non-anchor object, keyed by object id.
using PlacementMap = std::map<std::string, PredictedPlacement>;

}  // namespace hilayout
