#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hilayout/scene_model.hpp"
#include "json.hpp"

namespace hilayout::metrics {

inline constexpr const char* kReportFormat = "hilayout-metrics/1";

struct FeasibilityConfig {
    double max_protrusion = 0.01;  ///< m beyond the floor before an object counts as OOB
    double max_overlap = 1e-4;     ///< m² per object pair
    bool per_object = false;       ///< average over objects instead of scenes
};

struct Feasibility {
    double oob_rate = 0.0;
    double overlap_rate = 0.0;
    std::size_t scenes = 0;
    std::size_t objects = 0;
};

/// Share of scenes (or objects) with an object protruding beyond the floor
/// and with an overlapping object pair. Throws std::invalid_argument on an
/// empty set.
Feasibility feasibility_metrics(const std::vector<SceneLayout>& scenes, const FeasibilityConfig& cfg = {});

struct CategoryPair {
    std::string anchor;
    std::string satellite;

    std::string name() const { return anchor + ":" + satellite; }
    /// "anchor:satellite"; throws std::invalid_argument otherwise.
    static CategoryPair parse(const std::string& s);
    friend bool operator==(const CategoryPair&, const CategoryPair&) = default;
};

/// bed:nightstand, dining_table:chair, sofa:coffee_table.
const std::vector<CategoryPair>& default_pairs();
/// Comma-separated list of pairs.
std::vector<CategoryPair> parse_pairs(const std::string& s);

struct KlConfig {
    int bins = 8;           ///< per axis
    double extent = 3.0;    ///< histogram covers [-extent, extent]² m
    double epsilon = 1e-3;  ///< added to every bin probability before renormalizing
    std::size_t min_samples = 30;
};

/// Positions of every satellite of the pair's category relative to the
/// anchor of its own area, when that anchor has the pair's anchor category.
std::vector<Vec2> pair_samples(const std::vector<SceneLayout>& scenes, const CategoryPair& pair);

/// Smoothed bins, row-major over (x, y). Samples outside the domain fall
/// into the nearest edge bin.
std::vector<double> histogram(const std::vector<Vec2>& samples, const KlConfig& cfg = {});

/// Σ p log(p / q).
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

struct PairKl {
    CategoryPair pair;
    double kl = 0.0;
    std::size_t generated_samples = 0;
    std::size_t reference_samples = 0;
};

struct KlResult {
    std::vector<PairKl> pairs;
    double average = 0.0;
};

/// KL(reference ‖ generated) per pair, averaged. Throws InsufficientSamples
/// naming the first pair below quota on either side.
KlResult kl_relative_placement(const std::vector<SceneLayout>& generated, const std::vector<SceneLayout>& reference,
                               const std::vector<CategoryPair>& pairs, const KlConfig& cfg = {});

struct Alignment {
    std::size_t relations = 0;  ///< textual relations with both ends placed
    std::size_t matched = 0;
    std::size_t specified = 0;  ///< objects in the source hierarchy
    std::size_t placed = 0;

    double rel_match() const { return relations ? static_cast<double>(matched) / relations : 1.0; }
    double obj_match() const { return specified ? static_cast<double>(placed) / specified : 1.0; }
    Alignment& operator+=(const Alignment& o);
};

/// Check every textual relation of source against the realized placement in
/// layout, and count how many source objects the layout placed. Throws
/// UnknownRelation.
Alignment semantic_alignment(const SceneHierarchy& source, const SceneLayout& layout);
Alignment semantic_alignment(const std::vector<std::pair<SceneHierarchy, SceneLayout>>& runs);

struct MetricReport {
    Feasibility feasibility;
    KlResult kl;
    KlResult kl_fine;  ///< same pairs at twice the bin resolution
    bool has_kl = false;
    KlConfig kl_config;
    Alignment alignment;

    nlohmann::json to_json() const;
    /// Human-readable table.
    std::string table() const;
};

}  // namespace hilayout::metrics
