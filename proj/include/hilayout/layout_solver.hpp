#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hilayout/prediction.hpp"
#include "hilayout/scene_model.hpp"
#include "json.hpp"

namespace hilayout {

struct SolverConfig {
    double lambda0 = 10.0;
    double lambda_growth = 10.0;
    int rounds = 4;
    int restarts = 8;
    int max_sweeps = 200;
    double edit_weight = 5.0;         ///< μ, anchoring to the previous layout
    double facing_change_cost = 1.0;  ///< per quarter turn of an area, editing only
    int enumeration_cap = 6;          ///< max areas for exhaustive wall assignment
    int anneal_iterations = 400;
    int nudge_iterations = 10;
    long search_budget = 200000;      ///< nodes of the corner-point search per local solve
    double overlap_tol = 1e-6;
    double oob_tol = 1e-6;

    double lambda_max() const;

    static SolverConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct SolveReport {
    double objective = 0.0;  ///< unpenalized objective, without editing terms
    double max_overlap = 0.0;
    double max_oob = 0.0;
    bool feasible = false;
    long iterations = 0;
    int restarts_used = 0;
    std::vector<Facing> walls;  ///< global solve: facing per area
    double elapsed_seconds = 0.0;
    std::vector<std::string> notes;
    /// Local solve: penalized objective at the final penalty weight, before
    /// and after every outer round, rounds + 1 values per restart.
    std::vector<double> trace;
};

struct LocalMember {
    std::string id;
    Vec2 footprint;       ///< unrotated width x depth
    RelPlacement target;  ///< p_e and θ_e in the anchor frame
    bool aligned = false;
    std::optional<Pose2D> previous;  ///< area-local pose from the previous layout
};

/// Placement inside one functional area. The anchor keeps orientation 0; its
/// position is a variable unless fix_anchor pins it to the area origin.
struct LocalProblem {
    Vec2 area_size;
    std::string anchor_id;
    Vec2 anchor_footprint;
    std::optional<Pose2D> anchor_previous;
    std::vector<LocalMember> members;
    bool fix_anchor = false;
};

struct LocalSolution {
    Pose2D anchor;
    std::vector<Pose2D> members;  ///< same order as LocalProblem::members
    SolveReport report;
};

/// Σ L1 distance between realized and target relative positions.
double local_objective(const LocalProblem& p, const Pose2D& anchor, const std::vector<Pose2D>& members);

/// Throws Infeasible when no restart is feasible and greedy packing fails.
LocalSolution solve_local(const LocalProblem& p, std::uint64_t seed, const SolverConfig& cfg = {});

struct GlobalArea {
    std::string id;
    Vec2 size;  ///< area frame: width along the wall, depth away from it
    std::optional<AreaPose> previous;
};

/// Area arrangement: areas back-flush against walls, far from each other.
struct GlobalProblem {
    Vec2 room;
    std::vector<GlobalArea> areas;
};

struct GlobalSolution {
    std::vector<AreaPose> poses;  ///< same order as GlobalProblem::areas
    SolveReport report;
};

/// Σ D_w − Σ_{i<j} D_a.
double global_objective(const GlobalProblem& p, const std::vector<AreaPose>& poses);

/// Throws Infeasible when no wall assignment is feasible.
GlobalSolution solve_global(const GlobalProblem& p, std::uint64_t seed, const SolverConfig& cfg = {});

/// Local problem for one area of h. With a previous layout, surviving
/// objects carry their previous area-local poses.
LocalProblem make_local_problem(const SceneHierarchy& h, const FunctionalArea& area, const PlacementMap& predictions,
                                const SceneLayout* previous = nullptr);

/// Full divide-and-conquer solve: local per area, global arrangement,
/// composition into the scene frame and a final inter-area nudge.
SceneLayout solve_scene(const SceneHierarchy& h, const PlacementMap& predictions, std::uint64_t seed,
                        const SolverConfig& cfg = {});

/// Re-solve after an edit, anchoring surviving objects and areas to their
/// previous poses.
SceneLayout solve_edit(const SceneLayout& previous, const SceneHierarchy& updated, const PlacementMap& predictions,
                       std::uint64_t seed, const SolverConfig& cfg = {});

/// Worst pairwise overlap and worst OOB of a composed layout: objects
/// against each other and their own area, areas against each other and the
/// room.
struct Residuals {
    double max_overlap = 0.0;
    double max_oob = 0.0;
};
Residuals layout_residuals(const SceneLayout& layout);

}  // namespace hilayout
