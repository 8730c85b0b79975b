#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hilayout/scene_model.hpp"
#include "json.hpp"

namespace hilayout::io {

inline constexpr const char* kFormatVersion = "hilayout/1";

/// Untrusted text as returned by a provider or read from disk.
struct RawDocument {
    std::string text;
};

struct Issue {
    std::string code;  ///< ParseError | SchemaError | StructureError
    std::string path;  ///< e.g. area[sleeping].object[bed].size
    std::string message;
    friend bool operator==(const Issue&, const Issue&) = default;
};

struct ValidationReport {
    std::vector<Issue> errors;
    std::vector<std::string> repairs;
    std::vector<std::string> dropped;

    bool ok() const { return errors.empty(); }
    /// One line per issue, suitable for feeding back to a language model.
    std::string summary() const;
};

struct ParseResult {
    std::optional<SceneHierarchy> hierarchy;
    std::optional<SceneLayout> layout;  ///< present when the document has a layout section
    ValidationReport report;
};

/// Parse either the structured-text format or its JSON mirror. Lexical
/// repairs (code fences, comment lines, trailing commas) are applied first
/// and logged. Never throws; failures are reported as issues.
ParseResult parse(const RawDocument& doc);

/// Convenience wrappers that throw ParseError / SchemaError / StructureError.
SceneHierarchy parse_hierarchy(const RawDocument& doc);
SceneLayout parse_layout(const RawDocument& doc);

/// Canonical structured text. parse(serialize(x)) reproduces x exactly.
RawDocument serialize(const SceneHierarchy& h);
RawDocument serialize(const SceneLayout& layout);

/// JSON mirror of the structured-text format.
nlohmann::json to_json(const SceneHierarchy& h);
nlohmann::json to_json(const SceneLayout& layout);

/// Shortest decimal that round-trips to the same double.
std::string format_number(double v);

struct RepairConfig {
    double area_budget = 0.85;  ///< max fraction of the floor covered by areas
    std::uint64_t seed = 0;     ///< tie-break order among equal-priority removals
};

struct RepairResult {
    SceneHierarchy hierarchy;
    ValidationReport report;
};

/// Remove objects, then whole areas, until the hierarchy fits its room.
/// Throws Unrepairable when an anchor object cannot fit the room or no area
/// survives.
RepairResult feasibility_repair(const SceneHierarchy& h, const RepairConfig& cfg = {});

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace hilayout::io
