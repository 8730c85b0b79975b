#include <gtest/gtest.h>

#include "hilayout/error.hpp"
#include "hilayout/metrics.hpp"
#include "hilayout/pipeline.hpp"

using namespace hilayout;

namespace {

const std::string kData = HILAYOUT_DATA_DIR;

Pipeline fixture_pipeline(bool with_catalog = true) {
    auto provider = std::make_shared<llm::FixtureProvider>(kData + "/fixtures");
    std::shared_ptr<const Catalog> catalog;
    if (with_catalog) catalog = std::make_shared<Catalog>(Catalog::load(kData + "/catalog/default.cat"));
    return Pipeline(provider, nullptr, catalog);
}

double max_unchanged_delta(const std::vector<PoseDelta>& deltas) {
    double m = 0;
    for (const auto& d : deltas) {
        if (d.kind == PoseDelta::Kind::Moved || d.kind == PoseDelta::Kind::Unchanged) m = std::max(m, d.distance);
    }
    return m;
}

}  // namespace

TEST(Synth, FixtureBedroomWithRuleFallback) {
    const auto p = fixture_pipeline();
    const auto r = p.synth("a small bedroom for a young student", {3.5, 4}, 7);
    EXPECT_TRUE(r.layout.report.feasible);
    EXPECT_EQ(r.layout.objects.size(), 6u);
    EXPECT_EQ(r.generation.attempts.size(), 1u);
    const auto f = metrics::feasibility_metrics({r.layout});
    EXPECT_EQ(f.oob_rate, 0.0);
    EXPECT_EQ(f.overlap_rate, 0.0);
    for (const auto& [id, o] : r.layout.hierarchy.objects) EXPECT_TRUE(o.asset) << id;
    EXPECT_EQ(metrics::semantic_alignment(r.generation.hierarchy, r.layout).rel_match(), 1.0);
}

TEST(Synth, RequestedRoomSizeWins) {
    const auto r = fixture_pipeline().synth("a bedroom", {4.0, 4.5}, 7);
    EXPECT_EQ(r.layout.hierarchy.root.size, (Vec2{4.0, 4.5}));
}

TEST(Synth, ByteIdenticalAcrossRuns) {
    const auto p = fixture_pipeline();
    const auto a = p.synth("a master bedroom", {4.5, 5}, 7);
    const auto b = p.synth("a master bedroom", {4.5, 5}, 7);
    EXPECT_EQ(a.layout.objects.size(), 8u);
    EXPECT_EQ(io::serialize(a.layout).text, io::serialize(b.layout).text);
    EXPECT_EQ(render_svg(a.layout), render_svg(b.layout));
}

TEST(Synth, OversizedFixtureIsUnrepairable) {
    EXPECT_THROW(fixture_pipeline().synth("a tiny room", {1.5, 1.5}, 7), Unrepairable);
}

TEST(Edit, RemovingTheDeskKeepsEverythingElse) {
    const auto p = fixture_pipeline();
    const auto before = p.synth("a bedroom", {3.5, 4}, 7).layout;
    const auto r = p.edit(before, "remove the desk", 7);
    EXPECT_EQ(r.layout.find("desk"), nullptr);
    EXPECT_LT(max_unchanged_delta(r.deltas), 0.01);
    int removed = 0;
    for (const auto& d : r.deltas) removed += d.kind == PoseDelta::Kind::Removed;
    EXPECT_EQ(removed, 1);
}

TEST(Edit, NoOpIsByteIdentical) {
    const auto p = fixture_pipeline();
    const auto before = p.synth("a bedroom", {3.5, 4}, 7).layout;
    const auto r = p.edit(before, "keep everything as it is", 7);
    EXPECT_EQ(io::serialize(r.layout).text, io::serialize(before).text);
    for (const auto& d : r.deltas) EXPECT_EQ(d.kind, PoseDelta::Kind::Unchanged) << d.id;
}

TEST(Edit, AddingAReadingChair) {
    const auto p = fixture_pipeline();
    const auto before = p.synth("a living room", {5.5, 4.5}, 3).layout;
    const auto r = p.edit(before, "add a reading chair near the sofa", 3);
    ASSERT_NE(r.layout.find("reading_chair"), nullptr);
    const auto old = metrics::semantic_alignment(before.hierarchy, r.layout);
    EXPECT_EQ(old.rel_match(), 1.0);
}

TEST(Edit, OverfullEditIsUnrepairable) {
    const auto p = fixture_pipeline();
    const auto before = p.synth("a bedroom", {3.5, 4}, 7).layout;
    EXPECT_THROW(p.edit(before, "fill the room with wardrobes", 7), Unrepairable);
}

TEST(PoseDeltas, Kinds) {
    const auto before = fixture_pipeline(false).synth("a bedroom", {3.5, 4}, 7).layout;
    auto after = before;
    after.objects.erase(after.objects.begin());
    after.objects.back().pose.center.x += 0.5;
    after.objects.back().pose.theta = Rot4::quarter_turns(1) + after.objects.back().pose.theta;
    PlacedObject extra = after.objects.front();
    extra.id = "zz_new";
    after.objects.push_back(extra);
    const auto d = pose_deltas(before, after);
    ASSERT_EQ(d.size(), before.objects.size() + 1);
    EXPECT_EQ(d.front().kind, PoseDelta::Kind::Removed);
    EXPECT_EQ(d.back().kind, PoseDelta::Kind::Added);
    const auto& moved = d[d.size() - 2];
    EXPECT_EQ(moved.kind, PoseDelta::Kind::Moved);
    EXPECT_NEAR(moved.distance, 0.5, 1e-12);
    EXPECT_EQ(moved.turns, 1);
    EXPECT_EQ(to_string(PoseDelta::Kind::Added), "added");
}

TEST(Plot, ContainsEveryObjectAndArea) {
    const auto l = fixture_pipeline(false).synth("a bedroom", {3.5, 4}, 7).layout;
    const auto svg = render_svg(l);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
    for (const auto& o : l.objects) EXPECT_NE(svg.find(">" + o.id + "<"), std::string::npos) << o.id;
    for (const auto& a : l.hierarchy.areas) EXPECT_NE(svg.find(">" + a.id + "<"), std::string::npos) << a.id;
    EXPECT_NE(svg.find("width=\"390\""), std::string::npos);
}
