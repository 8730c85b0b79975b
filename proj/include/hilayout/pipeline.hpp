#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hilayout/catalog.hpp"
#include "hilayout/hierarchy_io.hpp"
#include "hilayout/layout_solver.hpp"
#include "hilayout/llm_client.hpp"
#include "hilayout/placement_net.hpp"

namespace hilayout {

struct PipelineOptions {
    llm::PromptConfig prompt = llm::PromptConfig::closed_vocabulary();
    io::RepairConfig repair;
    SolverConfig solver;
    int max_attempts = 3;
};

struct SynthResult {
    SceneLayout layout;
    llm::Generation generation;
    io::ValidationReport repair;
    double seconds = 0.0;
};

struct PoseDelta {
    enum class Kind { Unchanged, Moved, Added, Removed };
    std::string id;
    Kind kind = Kind::Unchanged;
    double distance = 0.0;  ///< center displacement, m
    int turns = 0;          ///< quarter turns, counter-clockwise

    friend bool operator==(const PoseDelta&, const PoseDelta&) = default;
};

std::string to_string(PoseDelta::Kind k);

/// Per-object changes from before to after, sorted by id. Objects whose pose
/// changed by less than tol are Unchanged.
std::vector<PoseDelta> pose_deltas(const SceneLayout& before, const SceneLayout& after, double tol = 1e-9);

struct EditResult {
    SceneLayout layout;
    llm::Generation generation;
    io::ValidationReport repair;
    std::vector<PoseDelta> deltas;
    double seconds = 0.0;
};

/// Prompt, parse, repair, predict, solve, compose and retrieve. The network
/// may be null, in which case rule_fallback supplies the placements; the
/// catalog may be null, in which case assets stay unset.
class Pipeline {
public:
    Pipeline(std::shared_ptr<const llm::Provider> provider, std::shared_ptr<const PlacementNet> net,
             std::shared_ptr<const Catalog> catalog, PipelineOptions options = {}, TextEmbedder embedder = {});

    /// Throws the provider's errors, ExhaustedRetries, Unrepairable or
    /// Infeasible.
    SynthResult synth(const std::string& requirement, Vec2 room, std::uint64_t seed) const;
    EditResult edit(const SceneLayout& current, const std::string& instruction, std::uint64_t seed) const;

    /// Solve an already parsed hierarchy.
    SceneLayout layout(const SceneHierarchy& h, std::uint64_t seed, io::ValidationReport* repair = nullptr) const;
    PlacementMap predict(const SceneHierarchy& h, std::uint64_t seed) const;

    const PipelineOptions& options() const { return options_; }
    bool uses_network() const { return net_ != nullptr; }

private:
    SceneLayout finish(SceneLayout layout) const;

    std::shared_ptr<const llm::Provider> provider_;
    std::shared_ptr<const PlacementNet> net_;
    std::shared_ptr<const Catalog> catalog_;
    PipelineOptions options_;
    TextEmbedder embedder_;
};

/// Static top view: room outline, area rectangles with facing arrows, and
/// labelled object boxes. Byte-identical for equal layouts.
std::string render_svg(const SceneLayout& layout);

}  // namespace hilayout
