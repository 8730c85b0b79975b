#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "hilayout/scene_model.hpp"
#include "hilayout/text_embed.hpp"

namespace hilayout {

/// Parametric box asset standing in for a mesh.
struct Asset {
    std::string id;
    std::string category;
    std::string name;
    Vec3 size;  ///< canonical width, depth, height
    std::vector<std::string> tags;
    TextEmbedding embedding{};  ///< of name and tags
};

struct Retrieved {
    const Asset* asset = nullptr;
    Vec3 scale;  ///< target size / canonical size, per axis
    double similarity = 0.0;
};

/// Immutable after load; concurrent retrieve calls are safe.
class Catalog {
public:
    Catalog() = default;
    explicit Catalog(std::vector<Asset> assets, const TextEmbedder& embedder = {});

    /// One record per line: id, category, quoted name, size triple, tags.
    /// Blank lines and '#' comments are skipped. Throws FormatError.
    static Catalog parse(std::string_view text, const TextEmbedder& embedder = {});
    /// Throws IoError or FormatError.
    static Catalog load(const std::string& path, const TextEmbedder& embedder = {});

    const std::vector<Asset>& assets() const { return assets_; }
    bool empty() const { return assets_.empty(); }
    const Asset* find(const std::string& id) const;

    /// Highest cosine similarity between the description and an asset's
    /// embedding; the smaller id wins ties. Throws EmptyCatalog.
    Retrieved retrieve(std::string_view description, Vec3 target_size) const;

private:
    std::vector<Asset> assets_;  ///< sorted by id
    TextEmbedder embedder_;
};

/// Text used to query the catalog for an object.
std::string describe(const SceneObject& o);

/// Fill SceneObject::asset for every object of the layout. Poses and sizes
/// are left untouched.
void assign_assets(SceneLayout& layout, const Catalog& catalog);

}  // namespace hilayout
