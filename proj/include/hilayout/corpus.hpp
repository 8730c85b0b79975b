#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hilayout/relations.hpp"
#include "hilayout/rng.hpp"
#include "hilayout/scene_model.hpp"
#include "json.hpp"

namespace hilayout::corpus {

struct SizeRange {
    Vec3 lo;
    Vec3 hi;
};

struct SatelliteSpec {
    std::string category;
    Relation relation;
    double probability = 1.0;
};

struct AreaTemplate {
    std::string id;
    std::string text;
    std::string anchor;
    std::vector<SatelliteSpec> satellites;
    double probability = 1.0;
};

/// A room type: areas in wall order (back wall, front wall, left wall).
struct Template {
    std::string name;
    std::string room_text;
    std::vector<AreaTemplate> areas;
};

const std::vector<Template>& default_templates();
const std::map<std::string, SizeRange>& category_sizes();
const Template& find_template(const std::string& name);

struct GeneratorConfig {
    double jitter = 0.04;       ///< half-width of the uniform offset jitter per axis, meters
    double area_margin = 0.10;  ///< padding around the members' bounding box, >= jitter
    /// Share of satellites whose relation edge keeps its placement but has
    /// no text, as when a description leaves a relation unstated.
    double untexted_fraction = 0.15;
};

/// offsets are the canonical relation offsets plus uniform jitter on their
/// nonzero axis; d_e comes from the alignment predicate. Areas are posed
/// against the walls, so the result is a complete ground-truth layout.
SceneHierarchy generate_scene(const Template& t, Rng& rng, const GeneratorConfig& cfg = {});

/// n scenes alternating over the templates; scene i uses Rng::derive(seed, i).
std::vector<SceneHierarchy> generate(std::size_t n, std::uint64_t seed, const GeneratorConfig& cfg = {});

/// n scenes of one template.
std::vector<SceneHierarchy> generate(const Template& t, std::size_t n, std::uint64_t seed,
                                     const GeneratorConfig& cfg = {});

/// Corpus description written next to generated data.
nlohmann::json manifest(std::size_t n, std::uint64_t seed, const GeneratorConfig& cfg = {});

struct IngestFilters {
    std::vector<std::string> anchor_categories{"bed", "sofa", "dining_table", "desk", "wardrobe"};
    double cluster_radius = 2.5;       ///< nearest-anchor assignment radius, meters
    double rectangular_tolerance = 0.01;  ///< relative floor-area slack against the bounding box
};

struct IngestReport {
    std::size_t files = 0;
    std::size_t rooms = 0;
    std::size_t accepted = 0;
    std::size_t rejected_irregular = 0;
    std::size_t rejected_no_anchor = 0;
    std::size_t dropped_objects = 0;

    nlohmann::json to_json() const;
};

/// Maps a free-form furniture label such as "King-size Bed" to a catalog
/// category, or "" when nothing matches.
std::string normalize_category(const std::string& label);

/// Reads every *.json house file in dir (sorted by name). Each room with a
/// rectangular floor becomes one hierarchy: objects cluster around the
/// nearest anchor, and relation placements come from rel() of the poses.
/// Throws IoError for a missing directory and FormatError for bad files.
std::vector<SceneHierarchy> ingest_3dfront(const std::string& dir, const IngestFilters& filters = {},
                                           IngestReport* report = nullptr);

}  // namespace hilayout::corpus
