#include "hilayout/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "hilayout/error.hpp"

namespace hilayout {

namespace {

std::string embed_text(const Asset& a) {
    std::string s = a.name;
    for (const auto& t : a.tags) s += " " + t;
    return s;
}

[[noreturn]] void bad_line(std::size_t line, const std::string& what) {
    throw FormatError("catalog line " + std::to_string(line) + ": " + what);
}

}  // namespace

Catalog::Catalog(std::vector<Asset> assets, const TextEmbedder& embedder)
    : assets_(std::move(assets)), embedder_(embedder) {
    std::sort(assets_.begin(), assets_.end(), [](const Asset& a, const Asset& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < assets_.size(); ++i) {
        auto& a = assets_[i];
        if (i > 0 && assets_[i - 1].id == a.id) throw FormatError("duplicate asset id " + a.id);
        if (!(a.size.x > 0 && a.size.y > 0 && a.size.z > 0)) throw FormatError("asset " + a.id + " has a non-positive size");
        a.embedding = embedder_.embed(embed_text(a));
    }
}

Catalog Catalog::parse(std::string_view text, const TextEmbedder& embedder) {
    std::vector<Asset> assets;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        bool quoted = false;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] == '"') quoted = !quoted;
            if (raw[i] == '#' && !quoted) {
                raw.erase(i);
                break;
            }
        }
        if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;

        std::istringstream rec(raw);
        Asset a;
        if (!(rec >> a.id >> a.category)) bad_line(line, "expected id and category");
        rec >> std::ws;
        if (rec.peek() != '"') bad_line(line, "expected a quoted name");
        rec >> std::quoted(a.name);
        if (!(rec >> a.size.x >> a.size.y >> a.size.z)) bad_line(line, "expected three size values");
        std::string tag;
        while (rec >> tag) {
            tag.erase(std::remove(tag.begin(), tag.end(), ','), tag.end());
            if (!tag.empty()) a.tags.push_back(tag);
        }
        if (!(a.size.x > 0 && a.size.y > 0 && a.size.z > 0)) bad_line(line, "size must be positive");
        assets.push_back(std::move(a));
    }
    std::set<std::string> ids;
    for (const auto& a : assets) {
        if (!ids.insert(a.id).second) throw FormatError("duplicate asset id " + a.id);
    }
    return Catalog(std::move(assets), embedder);
}

Catalog Catalog::load(const std::string& path, const TextEmbedder& embedder) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read catalog " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), embedder);
}

const Asset* Catalog::find(const std::string& id) const {
    auto it = std::lower_bound(assets_.begin(), assets_.end(), id, [](const Asset& a, const std::string& k) { return a.id < k; });
    return it != assets_.end() && it->id == id ? &*it : nullptr;
}

Retrieved Catalog::retrieve(std::string_view description, Vec3 target_size) const {
    if (assets_.empty()) throw EmptyCatalog("catalog has no assets");
    const TextEmbedding q = embedder_.embed(description);
    Retrieved best;
    for (const auto& a : assets_) {
        const double s = cosine(q, a.embedding);
        // assets are id-sorted, so strict > keeps the smaller id on ties
        if (!best.asset || s > best.similarity) best = {&a, {}, s};
    }
    const Vec3& c = best.asset->size;
    best.scale = {target_size.x / c.x, target_size.y / c.y, target_size.z / c.z};
    return best;
}

std::string describe(const SceneObject& o) {
    std::string cat = o.category;
    std::replace(cat.begin(), cat.end(), '_', ' ');
    return o.text.empty() ? cat : cat + " " + o.text;
}

void assign_assets(SceneLayout& layout, const Catalog& catalog) {
    for (auto& [id, o] : layout.hierarchy.objects) o.asset = catalog.retrieve(describe(o), o.size).asset->id;
}

}  // namespace hilayout
