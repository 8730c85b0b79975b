#include "hilayout/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "hilayout/error.hpp"
#include "hilayout/geometry.hpp"
#include "hilayout/hierarchy_io.hpp"
#include "hilayout/layout_solver.hpp"

namespace hilayout::corpus {

namespace {

const std::vector<std::string> kAdjectives{"wooden", "modern", "white", "oak", "black", "grey", "walnut", "minimalist"};

double round_to(double v, double step) { return std::round(v / step) * step; }

Vec3 sample_size(const std::string& category, Rng& rng) {
    const SizeRange& r = category_sizes().at(category);
    return {round_to(rng.uniform(r.lo.x, r.hi.x), 0.01), round_to(rng.uniform(r.lo.y, r.hi.y), 0.01),
            round_to(rng.uniform(r.lo.z, r.hi.z), 0.01)};
}

std::string spaced(std::string s) {
    std::replace(s.begin(), s.end(), '_', ' ');
    return s;
}

struct IdAllocator {
    std::map<std::string, int> counts;
    std::string next(const std::string& category) {
        const int n = ++counts[category];
        return n == 1 ? category : category + "_" + std::to_string(n);
    }
};

struct BuiltArea {
    FunctionalArea area;
    std::vector<SceneObject> objects;
    std::vector<RelationEdge> relations;
};

// Members laid out in the anchor frame, then wrapped in a padded box whose
// center becomes the area origin.
BuiltArea build_area(const AreaTemplate& t, Rng& rng, IdAllocator& ids, const GeneratorConfig& cfg) {
    BuiltArea b;
    b.area.id = t.id;
    b.area.text = t.text;
    const std::string anchor_id = ids.next(t.anchor);
    const Vec3 anchor_size = sample_size(t.anchor, rng);
    b.area.anchor = anchor_id;
    b.area.members.push_back(anchor_id);
    b.objects.push_back({anchor_id, kAdjectives[rng.below(kAdjectives.size())] + " " + spaced(t.anchor), t.anchor,
                         std::nullopt, anchor_size, Pose2D{}});

    for (const auto& s : t.satellites) {
        if (rng.uniform() >= s.probability) continue;
        const Vec3 size = sample_size(s.category, rng);
        const int side = rng.below(2) == 0 ? -1 : 1;
        RelPlacement off = canonical_offset(s.relation, anchor_size.xy(), size.xy(), side);
        // an offset centered on the anchor's axis stays exactly aligned
        const double jx = round_to(rng.uniform(-cfg.jitter, cfg.jitter), 0.001);
        const double jy = round_to(rng.uniform(-cfg.jitter, cfg.jitter), 0.001);
        if (off.position.x != 0.0) off.position.x += jx;
        if (off.position.y != 0.0) off.position.y += jy;
        const std::string id = ids.next(s.category);
        b.area.members.push_back(id);
        b.objects.push_back({id, kAdjectives[rng.below(kAdjectives.size())] + " " + spaced(s.category), s.category,
                             std::nullopt, size, Pose2D{off.position, off.theta}});
        std::optional<std::string> text = std::string(phrase(s.relation));
        if (rng.uniform() < cfg.untexted_fraction) text.reset();
        b.relations.push_back({id, anchor_id, text, EdgePlacement{off.position, off.theta, alignment_predicate(off)}});
    }

    geometry::Rect box = geometry::Rect::centered({}, anchor_size.xy());
    for (std::size_t i = 1; i < b.objects.size(); ++i) {
        const auto& o = b.objects[i];
        const auto r = geometry::Rect::centered(o.pose->center, rotated_extents(o.footprint(), o.pose->theta));
        box = {{std::min(box.lo.x, r.lo.x), std::min(box.lo.y, r.lo.y)}, {std::max(box.hi.x, r.hi.x), std::max(box.hi.y, r.hi.y)}};
    }
    const Vec2 center = box.center();
    b.area.size = {round_to(box.width() + 2 * cfg.area_margin, 0.01) + 0.01, round_to(box.depth() + 2 * cfg.area_margin, 0.01) + 0.01};
    for (auto& o : b.objects) o.pose->center = o.pose->center - center;
    return b;
}

// Back wall, front wall, left wall.
constexpr Facing kWalls[] = {Facing::PosY, Facing::NegY, Facing::PosX};

void pose_areas(SceneHierarchy& h, Rng& rng) {
    auto& a = h.areas;
    const double ceil10 = 0.1;
    auto up = [&](double v) { return std::ceil(v / ceil10 - 1e-9) * ceil10; };
    const bool left = a.size() > 2;
    const double strip = left ? a[2].size.y + round_to(rng.uniform(0.3, 0.8), 0.01) : 0.0;
    double span = a[0].size.x;
    if (a.size() > 1) span = std::max(span, a[1].size.x);
    const double room_w = up(strip + span + rng.uniform(0.2, 1.0));
    double room_d = a[0].size.y + rng.uniform(1.0, 2.0);
    if (a.size() > 1) room_d = a[0].size.y + a[1].size.y + rng.uniform(0.8, 1.6);
    if (left) room_d = std::max(room_d, a[2].size.x + 0.4);
    room_d = up(room_d);
    h.root.size = {room_w, room_d};

    const double x0 = -0.5 * room_w + strip;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Facing f = kWalls[i];
        Vec2 c;
        if (f == Facing::PosX) {
            c = {-0.5 * room_w + 0.5 * a[i].size.y, -0.5 * room_d + 0.5 * a[i].size.x + (room_d - a[i].size.x) * rng.uniform()};
        } else {
            const double x = x0 + 0.5 * a[i].size.x + (room_w - strip - a[i].size.x) * rng.uniform();
            const double y = f == Facing::PosY ? -0.5 * room_d + 0.5 * a[i].size.y : 0.5 * room_d - 0.5 * a[i].size.y;
            c = {x, y};
        }
        a[i].pose = AreaPose{{round_to(c.x, 0.001), round_to(c.y, 0.001)}, f};
    }
}

bool feasible(const SceneHierarchy& h) {
    const SceneLayout l = to_scene_frame(h);
    const Residuals r = layout_residuals(l);
    return r.max_overlap == 0.0 && r.max_oob == 0.0;
}

}  // namespace

const std::map<std::string, SizeRange>& category_sizes() {
    static const std::map<std::string, SizeRange> sizes{
        {"bed", {{1.40, 1.95, 0.45}, {1.90, 2.20, 0.60}}},
        {"nightstand", {{0.40, 0.35, 0.45}, {0.55, 0.45, 0.60}}},
        {"bench", {{0.90, 0.35, 0.40}, {1.30, 0.45, 0.50}}},
        {"wardrobe", {{1.00, 0.55, 1.90}, {2.00, 0.65, 2.30}}},
        {"dresser", {{0.80, 0.40, 0.75}, {1.20, 0.50, 0.95}}},
        {"desk", {{1.00, 0.55, 0.72}, {1.60, 0.75, 0.78}}},
        {"desk_chair", {{0.45, 0.45, 0.85}, {0.60, 0.60, 1.10}}},
        {"bookshelf", {{0.60, 0.28, 1.60}, {1.00, 0.40, 2.00}}},
        {"sofa", {{1.80, 0.80, 0.75}, {2.60, 1.00, 0.90}}},
        {"coffee_table", {{0.80, 0.45, 0.35}, {1.20, 0.65, 0.45}}},
        {"tv_stand", {{1.20, 0.35, 0.45}, {1.80, 0.50, 0.60}}},
        {"armchair", {{0.70, 0.70, 0.75}, {0.95, 0.90, 0.95}}},
        {"dining_table", {{1.20, 0.75, 0.72}, {1.80, 1.00, 0.78}}},
        {"chair", {{0.42, 0.45, 0.80}, {0.50, 0.55, 0.95}}},
    };
    return sizes;
}

const std::vector<Template>& default_templates() {
    using R = Relation;
    static const std::vector<Template> templates{
        {"bedroom",
         "a bedroom",
         {{"sleeping_area", "sleeping area", "bed",
           {{"nightstand", R::LeftOf, 0.9}, {"nightstand", R::RightOf, 0.9}, {"bench", R::InFrontOf, 0.3}}, 1.0},
          {"work_area", "work area", "desk", {{"desk_chair", R::InFrontOf, 1.0}, {"bookshelf", R::NextTo, 0.4}}, 0.6},
          {"storage_area", "storage area", "wardrobe", {{"dresser", R::NextTo, 0.5}}, 0.8}}},
        {"living_room",
         "a living room",
         {{"lounge_area", "lounge area", "sofa",
           {{"coffee_table", R::InFrontOf, 1.0},
            {"tv_stand", R::Facing, 0.8},
            {"armchair", R::LeftOf, 0.4},
            {"armchair", R::RightOf, 0.4}},
           1.0},
          {"dining_area", "dining area", "dining_table",
           {{"chair", R::LeftOf, 0.8}, {"chair", R::RightOf, 0.8}, {"chair", R::InFrontOf, 0.8}, {"chair", R::Behind, 0.8}},
           0.9}}},
    };
    return templates;
}

const Template& find_template(const std::string& name) {
    for (const auto& t : default_templates()) {
        if (t.name == name) return t;
    }
    throw std::invalid_argument("unknown corpus template \"" + name + "\"");
}

SceneHierarchy generate_scene(const Template& t, Rng& rng, const GeneratorConfig& cfg) {
    if (cfg.area_margin < cfg.jitter) throw std::invalid_argument("area margin must cover the offset jitter");
    for (;;) {
        SceneHierarchy h;
        h.root.text = t.room_text;
        IdAllocator ids;
        for (std::size_t i = 0; i < t.areas.size(); ++i) {
            if (i > 0 && rng.uniform() >= t.areas[i].probability) continue;
            BuiltArea b = build_area(t.areas[i], rng, ids, cfg);
            for (auto& o : b.objects) h.objects.emplace(o.id, o);
            h.relations.insert(h.relations.end(), b.relations.begin(), b.relations.end());
            h.areas.push_back(std::move(b.area));
        }
        pose_areas(h, rng);
        validate(h);
        // Jitter can only shrink clearances to 1 cm, so this never loops in
        // practice; it guards the by-construction claim.
        if (feasible(h)) return h;
    }
}

std::vector<SceneHierarchy> generate(std::size_t n, std::uint64_t seed, const GeneratorConfig& cfg) {
    const auto& ts = default_templates();
    std::vector<SceneHierarchy> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = Rng::derive(seed, i);
        out.push_back(generate_scene(ts[i % ts.size()], rng, cfg));
    }
    return out;
}

std::vector<SceneHierarchy> generate(const Template& t, std::size_t n, std::uint64_t seed, const GeneratorConfig& cfg) {
    std::vector<SceneHierarchy> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = Rng::derive(seed, i);
        out.push_back(generate_scene(t, rng, cfg));
    }
    return out;
}

nlohmann::json manifest(std::size_t n, std::uint64_t seed, const GeneratorConfig& cfg) {
    nlohmann::json templates = nlohmann::json::array();
    for (const auto& t : default_templates()) templates.push_back(t.name);
    return {{"format", "hilayout-corpus"}, {"version", 1},      {"count", n},
            {"seed", seed},                {"templates", templates}, {"jitter", cfg.jitter},
            {"area_margin", cfg.area_margin}, {"untexted_fraction", cfg.untexted_fraction}};
}

nlohmann::json IngestReport::to_json() const {
    return {{"files", files},
            {"rooms", rooms},
            {"accepted", accepted},
            {"rejected_irregular", rejected_irregular},
            {"rejected_no_anchor", rejected_no_anchor},
            {"dropped_objects", dropped_objects}};
}

std::string normalize_category(const std::string& label) {
    std::string s;
    for (char c : label) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    static const std::vector<std::pair<std::string, std::string>> rules{
        {"nightstand", "nightstand"}, {"night stand", "nightstand"}, {"bedside", "nightstand"},
        {"wardrobe", "wardrobe"},     {"dining table", "dining_table"}, {"coffee table", "coffee_table"},
        {"tea table", "coffee_table"}, {"tv stand", "tv_stand"},     {"tv cabinet", "tv_stand"},
        {"desk", "desk"},             {"sofa", "sofa"},               {"armchair", "armchair"},
        {"lounge chair", "armchair"}, {"dresser", "dresser"},         {"drawer chest", "dresser"},
        {"bookcase", "bookshelf"},    {"shelf", "bookshelf"},         {"bench", "bench"},
        {"bed", "bed"},               {"chair", "chair"},             {"stool", "chair"},
        {"table", "dining_table"},
    };
    for (const auto& [key, cat] : rules) {
        if (s.find(key) != std::string::npos) return cat;
    }
    return "";
}

namespace {

struct RawObject {
    std::string category;
    Vec3 size;
    Pose2D pose;
};

Rot4 snap_yaw(double qy, double qw) {
    // model front is +z; top-view y is -z, so the front maps to angle phi + 180 degrees
    const double phi = 2.0 * std::atan2(qy, qw);
    const double deg = phi * 180.0 / std::numbers::pi + 180.0;
    return Rot4::quarter_turns(static_cast<int>(std::lround(deg / 90.0)));
}

std::vector<double> numbers(const nlohmann::json& j, const std::string& what, std::size_t min_size) {
    if (!j.is_array()) throw FormatError(what + " must be an array");
    std::vector<double> v;
    for (const auto& x : j) v.push_back(x.get<double>());
    if (v.size() < min_size) throw FormatError(what + " is too short");
    return v;
}

std::optional<SceneHierarchy> ingest_room(const nlohmann::json& room, const std::map<std::string, nlohmann::json>& furniture,
                                          const std::map<std::string, nlohmann::json>& meshes, const IngestFilters& f,
                                          IngestReport& rep) {
    double area = 0.0;
    Vec2 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
    Vec2 hi{-lo.x, -lo.y};
    std::vector<RawObject> objects;
    for (const auto& child : room.value("children", nlohmann::json::array())) {
        const std::string ref = child.at("ref").get<std::string>();
        if (auto m = meshes.find(ref); m != meshes.end()) {
            if (m->second.value("type", "") != "Floor") continue;
            const auto xyz = numbers(m->second.at("xyz"), "mesh xyz", 0);
            const auto faces = m->second.at("faces").get<std::vector<std::size_t>>();
            auto vert = [&](std::size_t i) {
                if (3 * i + 2 >= xyz.size()) throw FormatError("floor face index out of range");
                return Vec2{xyz[3 * i], -xyz[3 * i + 2]};
            };
            for (std::size_t i = 0; i + 2 < faces.size(); i += 3) {
                const Vec2 a = vert(faces[i]), b = vert(faces[i + 1]), c = vert(faces[i + 2]);
                area += 0.5 * std::abs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
                for (const Vec2& p : {a, b, c}) {
                    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
                    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
                }
            }
            continue;
        }
        auto fit = furniture.find(ref);
        if (fit == furniture.end()) continue;
        const std::string cat = normalize_category(fit->second.value("category", fit->second.value("title", "")));
        if (cat.empty() || !fit->second.contains("size")) {
            ++rep.dropped_objects;
            continue;
        }
        const auto size = numbers(fit->second.at("size"), "furniture size", 3);
        const auto pos = numbers(child.at("pos"), "pos", 3);
        const auto rot = numbers(child.at("rot"), "rot", 4);
        const auto scale = child.contains("scale") ? numbers(child.at("scale"), "scale", 3) : std::vector<double>{1, 1, 1};
        objects.push_back({cat, {size[0] * scale[0], size[2] * scale[2], size[1] * scale[1]},
                           {{pos[0], -pos[2]}, snap_yaw(rot[1], rot[3])}});
    }
    const double box = (hi.x - lo.x) * (hi.y - lo.y);
    if (!(area > 0.0) || std::abs(box - area) > f.rectangular_tolerance * box) {
        ++rep.rejected_irregular;
        return std::nullopt;
    }
    const Vec2 center{0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y)};
    for (auto& o : objects) o.pose.center = o.pose.center - center;

    std::vector<std::size_t> anchors;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        if (std::find(f.anchor_categories.begin(), f.anchor_categories.end(), objects[i].category) != f.anchor_categories.end()) {
            anchors.push_back(i);
        }
    }
    if (anchors.empty()) {
        ++rep.rejected_no_anchor;
        return std::nullopt;
    }
    std::vector<std::vector<std::size_t>> groups(anchors.size());
    for (std::size_t k = 0; k < anchors.size(); ++k) groups[k].push_back(anchors[k]);
    for (std::size_t i = 0; i < objects.size(); ++i) {
        if (std::find(anchors.begin(), anchors.end(), i) != anchors.end()) continue;
        std::size_t best = anchors.size();
        double best_d = f.cluster_radius;
        for (std::size_t k = 0; k < anchors.size(); ++k) {
            const Vec2 d = objects[i].pose.center - objects[anchors[k]].pose.center;
            const double dist = std::hypot(d.x, d.y);
            if (dist <= best_d && (best == anchors.size() || dist < best_d)) {
                best = k;
                best_d = dist;
            }
        }
        if (best == anchors.size()) {
            ++rep.dropped_objects;
            continue;
        }
        groups[best].push_back(i);
    }

    SceneHierarchy h;
    std::string type = room.value("type", "room");
    std::string text;
    for (char c : type) {
        if (std::isupper(static_cast<unsigned char>(c)) && !text.empty()) text += ' ';
        text += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    h.root = {"a " + text, {hi.x - lo.x, hi.y - lo.y}};
    IdAllocator ids;
    for (const auto& g : groups) {
        const RawObject& anchor = objects[g[0]];
        std::vector<std::string> member_ids;
        geometry::Rect box = geometry::Rect::centered({}, anchor.size.xy());
        std::vector<RelPlacement> rels;
        for (std::size_t i : g) {
            member_ids.push_back(ids.next(objects[i].category));
            const RelPlacement r = rel(objects[i].pose, anchor.pose);
            rels.push_back(r);
            const auto rr = geometry::Rect::centered(r.position, rotated_extents(objects[i].size.xy(), r.theta));
            box = {{std::min(box.lo.x, rr.lo.x), std::min(box.lo.y, rr.lo.y)}, {std::max(box.hi.x, rr.hi.x), std::max(box.hi.y, rr.hi.y)}};
        }
        FunctionalArea a;
        a.anchor = member_ids[0];
        a.id = a.anchor + "_area";
        a.text = spaced(anchor.category) + " area";
        a.size = {box.width(), box.depth()};
        a.members = member_ids;
        const Vec2 c = box.center();
        a.pose = AreaPose{anchor.pose.center + rotate(c, anchor.pose.theta), facing_from_rotation(anchor.pose.theta)};
        for (std::size_t k = 0; k < g.size(); ++k) {
            const RawObject& o = objects[g[k]];
            h.objects.emplace(member_ids[k], SceneObject{member_ids[k], spaced(o.category), o.category, std::nullopt, o.size,
                                                         Pose2D{rels[k].position - c, rels[k].theta}});
            if (k == 0) continue;
            std::optional<std::string> phrase_text;
            for (Relation r : {Relation::Facing, Relation::LeftOf, Relation::RightOf, Relation::InFrontOf,
                               Relation::Behind, Relation::NextTo}) {
                if (relation_holds(r, rels[k], anchor.size.xy(), o.size.xy())) {
                    phrase_text = std::string(phrase(r));
                    break;
                }
            }
            h.relations.push_back({member_ids[k], a.anchor, phrase_text,
                                   EdgePlacement{rels[k].position, rels[k].theta, alignment_predicate(rels[k])}});
        }
        h.areas.push_back(std::move(a));
    }
    validate(h);
    return h;
}

}  // namespace

std::vector<SceneHierarchy> ingest_3dfront(const std::string& dir, const IngestFilters& filters, IngestReport* report) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    IngestReport rep;
    std::vector<SceneHierarchy> out;
    for (const auto& path : files) {
        ++rep.files;
        try {
            const auto j = nlohmann::json::parse(io::read_file(path.string()));
            std::map<std::string, nlohmann::json> furniture, meshes;
            for (const auto& fj : j.value("furniture", nlohmann::json::array())) furniture[fj.at("uid").get<std::string>()] = fj;
            for (const auto& mj : j.value("mesh", nlohmann::json::array())) meshes[mj.at("uid").get<std::string>()] = mj;
            for (const auto& room : j.at("scene").at("room")) {
                ++rep.rooms;
                if (auto h = ingest_room(room, furniture, meshes, filters, rep)) {
                    out.push_back(std::move(*h));
                    ++rep.accepted;
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ": " + e.what());
        }
    }
    if (report) *report = rep;
    return out;
}

}  // namespace hilayout::corpus
