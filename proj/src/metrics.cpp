#include "hilayout/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "hilayout/error.hpp"
#include "hilayout/geometry.hpp"
#include "hilayout/relations.hpp"

namespace hilayout::metrics {

namespace {

geometry::Obb2D box_of(const PlacedObject& o) {
    return geometry::Obb2D::from_size(o.pose.center, o.size.xy(), o.pose.theta);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        cur.erase(0, cur.find_first_not_of(" \t"));
        cur.erase(cur.find_last_not_of(" \t") + 1);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

nlohmann::json kl_json(const KlResult& r, const KlConfig& cfg) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : r.pairs) {
        pairs.push_back({{"pair", p.pair.name()},
                         {"kl", p.kl},
                         {"generated_samples", p.generated_samples},
                         {"reference_samples", p.reference_samples}});
    }
    return {{"bins", cfg.bins}, {"extent", cfg.extent}, {"epsilon", cfg.epsilon}, {"pairs", pairs}, {"average", r.average}};
}

}  // namespace

Feasibility feasibility_metrics(const std::vector<SceneLayout>& scenes, const FeasibilityConfig& cfg) {
    if (scenes.empty()) throw std::invalid_argument("feasibility_metrics needs at least one scene");
    Feasibility f;
    f.scenes = scenes.size();
    std::size_t oob_scenes = 0, overlap_scenes = 0, oob_objects = 0, overlap_objects = 0;
    for (const auto& s : scenes) {
        const std::size_t n = s.objects.size();
        std::vector<geometry::Obb2D> boxes;
        for (const auto& o : s.objects) boxes.push_back(box_of(o));
        std::vector<bool> out(n, false), hit(n, false);
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = geometry::protrusion(boxes[i], s.hierarchy.root.size) > cfg.max_protrusion;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (geometry::overlap_area(boxes[i], boxes[j]) > cfg.max_overlap) hit[i] = hit[j] = true;
            }
        }
        const auto n_out = static_cast<std::size_t>(std::count(out.begin(), out.end(), true));
        const auto n_hit = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), true));
        oob_objects += n_out;
        overlap_objects += n_hit;
        oob_scenes += n_out > 0;
        overlap_scenes += n_hit > 0;
        f.objects += n;
    }
    if (cfg.per_object) {
        const double n = f.objects ? static_cast<double>(f.objects) : 1.0;
        f.oob_rate = oob_objects / n;
        f.overlap_rate = overlap_objects / n;
    } else {
        f.oob_rate = static_cast<double>(oob_scenes) / f.scenes;
        f.overlap_rate = static_cast<double>(overlap_scenes) / f.scenes;
    }
    return f;
}

CategoryPair CategoryPair::parse(const std::string& s) {
    const auto parts = split(s, ':');
    if (parts.size() != 2 || s.find(':') != s.rfind(':')) throw std::invalid_argument("pair must be anchor:satellite, got " + s);
    return {parts[0], parts[1]};
}

const std::vector<CategoryPair>& default_pairs() {
    static const std::vector<CategoryPair> pairs{
        {"bed", "nightstand"}, {"dining_table", "chair"}, {"sofa", "coffee_table"}};
    return pairs;
}

std::vector<CategoryPair> parse_pairs(const std::string& s) {
    std::vector<CategoryPair> out;
    for (const auto& p : split(s, ',')) out.push_back(CategoryPair::parse(p));
    if (out.empty()) throw std::invalid_argument("empty pair list");
    return out;
}

std::vector<Vec2> pair_samples(const std::vector<SceneLayout>& scenes, const CategoryPair& pair) {
    std::vector<Vec2> out;
    for (const auto& s : scenes) {
        const auto& h = s.hierarchy;
        for (const auto& o : s.objects) {
            const auto& obj = h.objects.at(o.id);
            if (obj.category != pair.satellite) continue;
            const auto* area = h.find_area(o.area);
            if (!area || area->anchor == o.id) continue;
            const auto* anchor = s.find(area->anchor);
            if (!anchor || h.objects.at(anchor->id).category != pair.anchor) continue;
            out.push_back(rel(o.pose, anchor->pose).position);
        }
    }
    return out;
}

std::vector<double> histogram(const std::vector<Vec2>& samples, const KlConfig& cfg) {
    const int b = cfg.bins;
    const auto cells = static_cast<std::size_t>(b) * b;
    std::vector<double> h(cells, 0.0);
    auto bin = [&](double v) {
        const int k = static_cast<int>(std::floor((v + cfg.extent) / (2.0 * cfg.extent) * b));
        return std::clamp(k, 0, b - 1);
    };
    for (const auto& p : samples) h[static_cast<std::size_t>(bin(p.x)) * b + bin(p.y)] += 1.0;
    const double n = samples.empty() ? 1.0 : static_cast<double>(samples.size());
    const double z = 1.0 + cfg.epsilon * static_cast<double>(cells);
    for (auto& v : h) v = (v / n + cfg.epsilon) / z;
    return h;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(s, 0.0);
}

KlResult kl_relative_placement(const std::vector<SceneLayout>& generated, const std::vector<SceneLayout>& reference,
                               const std::vector<CategoryPair>& pairs, const KlConfig& cfg) {
    if (pairs.empty()) throw std::invalid_argument("kl_relative_placement needs at least one pair");
    KlResult r;
    for (const auto& pair : pairs) {
        const auto g = pair_samples(generated, pair);
        const auto ref = pair_samples(reference, pair);
        if (g.size() < cfg.min_samples || ref.size() < cfg.min_samples) {
            throw InsufficientSamples(fmt::format("pair {} has {} generated and {} reference samples, need {}",
                                                  pair.name(), g.size(), ref.size(), cfg.min_samples));
        }
        const double kl = kl_divergence(histogram(ref, cfg), histogram(g, cfg));
        r.pairs.push_back({pair, kl, g.size(), ref.size()});
        r.average += kl;
    }
    r.average /= static_cast<double>(pairs.size());
    return r;
}

Alignment& Alignment::operator+=(const Alignment& o) {
    relations += o.relations;
    matched += o.matched;
    specified += o.specified;
    placed += o.placed;
    return *this;
}

Alignment semantic_alignment(const SceneHierarchy& source, const SceneLayout& layout) {
    Alignment a;
    a.specified = source.objects.size();
    for (const auto& [id, o] : source.objects) a.placed += layout.find(id) != nullptr;
    for (const auto& e : source.relations) {
        if (!e.text) continue;
        const auto r = lookup_relation(*e.text);
        if (!r) throw UnknownRelation("unknown relation \"" + *e.text + "\" on " + e.from);
        const auto* obj = layout.find(e.from);
        const auto* anchor = layout.find(e.to);
        if (!obj || !anchor) continue;
        ++a.relations;
        a.matched += relation_holds(*r, rel(obj->pose, anchor->pose), anchor->size.xy(), obj->size.xy());
    }
    return a;
}

Alignment semantic_alignment(const std::vector<std::pair<SceneHierarchy, SceneLayout>>& runs) {
    Alignment a;
    for (const auto& [h, l] : runs) a += semantic_alignment(h, l);
    return a;
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json j{{"format", kReportFormat},
                     {"scenes", feasibility.scenes},
                     {"objects", feasibility.objects},
                     {"oob_rate", feasibility.oob_rate},
                     {"overlap_rate", feasibility.overlap_rate},
                     {"rel_match", alignment.rel_match()},
                     {"obj_match", alignment.obj_match()},
                     {"relations", alignment.relations},
                     {"matched_relations", alignment.matched},
                     {"specified_objects", alignment.specified},
                     {"placed_objects", alignment.placed}};
    if (has_kl) {
        KlConfig fine = kl_config;
        fine.bins *= 2;
        j["kl"] = kl_json(kl, kl_config);
        j["kl_fine"] = kl_json(kl_fine, fine);
    }
    return j;
}

std::string MetricReport::table() const {
    std::string s;
    s += fmt::format("{:<24}{:>10}\n", "metric", "value");
    s += fmt::format("{:<24}{:>10}\n", "scenes", feasibility.scenes);
    s += fmt::format("{:<24}{:>10.2f}\n", "OOB", feasibility.oob_rate);
    s += fmt::format("{:<24}{:>10.2f}\n", "Overlap", feasibility.overlap_rate);
    if (has_kl) {
        for (std::size_t i = 0; i < kl.pairs.size(); ++i) {
            s += fmt::format("{:<24}{:>10.4f}  ({}x{}: {:.4f})\n", "KL " + kl.pairs[i].pair.name(), kl.pairs[i].kl,
                             2 * kl_config.bins, 2 * kl_config.bins, kl_fine.pairs[i].kl);
        }
        s += fmt::format("{:<24}{:>10.4f}  ({}x{}: {:.4f})\n", "KL average", kl.average, 2 * kl_config.bins,
                         2 * kl_config.bins, kl_fine.average);
    }
    s += fmt::format("{:<24}{:>10.2f}\n", "#Rel", alignment.rel_match());
    s += fmt::format("{:<24}{:>10.2f}\n", "#Obj", alignment.obj_match());
    return s;
}

}  // namespace hilayout::metrics
