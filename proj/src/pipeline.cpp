#include "hilayout/pipeline.hpp"

#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "hilayout/error.hpp"
#include "hilayout/geometry.hpp"

namespace hilayout {

namespace {

double since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string to_string(PoseDelta::Kind k) {
    switch (k) {
        case PoseDelta::Kind::Unchanged: return "unchanged";
        case PoseDelta::Kind::Moved: return "moved";
        case PoseDelta::Kind::Added: return "added";
        case PoseDelta::Kind::Removed: return "removed";
    }
    return "unknown";
}

std::vector<PoseDelta> pose_deltas(const SceneLayout& before, const SceneLayout& after, double tol) {
    std::vector<PoseDelta> out;
    for (const auto& a : after.objects) {
        const auto* b = before.find(a.id);
        if (!b) {
            out.push_back({a.id, PoseDelta::Kind::Added, 0.0, 0});
            continue;
        }
        const Vec2 d = a.pose.center - b->pose.center;
        const double dist = std::hypot(d.x, d.y);
        const int turns = (a.pose.theta - b->pose.theta).quarters();
        const bool moved = dist > tol || turns != 0;
        out.push_back({a.id, moved ? PoseDelta::Kind::Moved : PoseDelta::Kind::Unchanged, dist, turns});
    }
    for (const auto& b : before.objects) {
        if (!after.find(b.id)) out.push_back({b.id, PoseDelta::Kind::Removed, 0.0, 0});
    }
    std::sort(out.begin(), out.end(), [](const PoseDelta& x, const PoseDelta& y) { return x.id < y.id; });
    return out;
}

Pipeline::Pipeline(std::shared_ptr<const llm::Provider> provider, std::shared_ptr<const PlacementNet> net,
                   std::shared_ptr<const Catalog> catalog, PipelineOptions options, TextEmbedder embedder)
    : provider_(std::move(provider)),
      net_(std::move(net)),
      catalog_(std::move(catalog)),
      options_(std::move(options)),
      embedder_(std::move(embedder)) {}

PlacementMap Pipeline::predict(const SceneHierarchy& h, std::uint64_t seed) const {
    return net_ ? net_->infer(h, seed, embedder_) : rule_predictions(h);
}

SceneLayout Pipeline::finish(SceneLayout layout) const {
    if (!layout.report.feasible) {
        throw Infeasible(fmt::format("solved layout violates feasibility: overlap {:.3g} m², out of bounds {:.3g} m²",
                                     layout.report.max_overlap, layout.report.max_oob));
    }
    if (catalog_) assign_assets(layout, *catalog_);
    return layout;
}

SceneLayout Pipeline::layout(const SceneHierarchy& h, std::uint64_t seed, io::ValidationReport* repair) const {
    auto repaired = io::feasibility_repair(h, options_.repair);
    if (repair) *repair = repaired.report;
    const auto& fixed = repaired.hierarchy;
    return finish(solve_scene(fixed, predict(fixed, seed), seed, options_.solver));
}

SynthResult Pipeline::synth(const std::string& requirement, Vec2 room, std::uint64_t seed) const {
    const auto t0 = std::chrono::steady_clock::now();
    SynthResult r;
    r.generation = llm::generate_hierarchy(llm::build_prompt(requirement, room, options_.prompt), *provider_,
                                           options_.max_attempts);
    SceneHierarchy h = r.generation.hierarchy;
    h.root.size = room;
    r.layout = layout(h, seed, &r.repair);
    r.seconds = since(t0);
    return r;
}

EditResult Pipeline::edit(const SceneLayout& current, const std::string& instruction, std::uint64_t seed) const {
    const auto t0 = std::chrono::steady_clock::now();
    EditResult r;
    r.generation = llm::generate_hierarchy(llm::build_edit_prompt(current.hierarchy, instruction, options_.prompt),
                                           *provider_, options_.max_attempts);
    SceneHierarchy h = r.generation.hierarchy;
    h.root.size = current.hierarchy.root.size;
    auto repaired = io::feasibility_repair(h, options_.repair);
    r.repair = repaired.report;
    const auto& fixed = repaired.hierarchy;
    r.layout = finish(solve_edit(current, fixed, predict(fixed, seed), seed, options_.solver));
    r.deltas = pose_deltas(current, r.layout);
    r.seconds = since(t0);
    return r;
}

std::string render_svg(const SceneLayout& layout) {
    constexpr double kScale = 100.0;  // px per meter
    constexpr double kMargin = 20.0;
    const Vec2 room = layout.hierarchy.root.size;
    const double w = room.x * kScale + 2 * kMargin;
    const double h = room.y * kScale + 2 * kMargin;
    auto px = [&](Vec2 p) {
        return Vec2{kMargin + (p.x + room.x / 2) * kScale, kMargin + (room.y / 2 - p.y) * kScale};
    };
    auto rect = [&](const geometry::Rect& r, const char* style) {
        const Vec2 tl = px({r.lo.x, r.hi.y});
        return fmt::format("  <rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" {}/>\n", tl.x, tl.y,
                           r.width() * kScale, r.depth() * kScale, style);
    };
    auto arrow = [&](Vec2 from, Vec2 to, const char* style) {
        const Vec2 a = px(from), b = px(to);
        return fmt::format("  <line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" {} marker-end=\"url(#head)\"/>\n",
                           a.x, a.y, b.x, b.y, style);
    };

    std::string s = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n",
        w, h, w, h);
    s += "  <defs><marker id=\"head\" markerWidth=\"6\" markerHeight=\"6\" refX=\"5\" refY=\"3\" orient=\"auto\">"
         "<path d=\"M0,0 L6,3 L0,6 z\" fill=\"#444\"/></marker></defs>\n";
    s += fmt::format("  <title>{}</title>\n", escape_xml(layout.hierarchy.root.text));
    s += rect(geometry::Rect::centered({}, room), "fill=\"#fafafa\" stroke=\"#000\" stroke-width=\"2\"");

    for (const auto& area : layout.hierarchy.areas) {
        if (!area.pose) continue;
        const auto r = geometry::area_rect(area);
        s += rect(r, "fill=\"none\" stroke=\"#4a7bd0\" stroke-dasharray=\"6 4\"");
        const Vec2 c = r.center();
        const Vec2 dir = rotate({0.0, 1.0}, facing_rotation(area.pose->facing));
        const double reach = 0.5 * std::abs(dir.x * r.width() + dir.y * r.depth());
        s += arrow(c, c + dir * reach, "stroke=\"#4a7bd0\" stroke-width=\"1.5\"");
        const Vec2 label = px({r.lo.x, r.hi.y});
        s += fmt::format("  <text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" fill=\"#4a7bd0\">{}</text>\n", label.x + 3,
                         label.y + 11, escape_xml(area.id));
    }
    for (const auto& o : layout.objects) {
        const auto r = geometry::canonicalize(geometry::Obb2D::from_size(o.pose.center, o.size.xy(), o.pose.theta));
        s += rect(r, "fill=\"#e8d9c0\" stroke=\"#6b4f2a\"");
        const Vec2 dir = rotate({0.0, 1.0}, o.pose.theta);
        s += arrow(o.pose.center, o.pose.center + dir * (0.35 * o.size.y), "stroke=\"#444\"");
        const Vec2 c = px(o.pose.center);
        s += fmt::format("  <text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"9\" text-anchor=\"middle\">{}</text>\n", c.x,
                         c.y - 3, escape_xml(o.id));
    }
    s += "</svg>\n";
    return s;
}

}  // namespace hilayout
