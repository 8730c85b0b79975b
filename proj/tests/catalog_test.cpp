#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "hilayout/catalog.hpp"
#include "hilayout/corpus.hpp"
#include "hilayout/error.hpp"
#include "hilayout/hierarchy_io.hpp"
#include "hilayout/layout_solver.hpp"
#include "hilayout/placement_net.hpp"

using namespace hilayout;

namespace {

const std::string kDefault = std::string(HILAYOUT_DATA_DIR) + "/catalog/default.cat";

Asset box(std::string id, std::string category, std::string name, Vec3 size = {1, 1, 1}) {
    return {std::move(id), std::move(category), std::move(name), size, {}, {}};
}

// Cosine of two token bags assembled from single-token embeddings.
double bag_cosine(const std::string& a, const std::string& b) {
    std::map<std::size_t, double> va, vb;
    auto fill = [](const std::string& s, std::map<std::size_t, double>& v) {
        for (const auto& t : tokenize(s)) {
            const auto e = hash_embed(t);
            for (std::size_t i = 0; i < kTextDim; ++i) {
                if (e[i] != 0.0) v[i] += e[i];
            }
        }
    };
    fill(a, va);
    fill(b, vb);
    double dot = 0, na = 0, nb = 0;
    for (auto [i, x] : va) {
        na += x * x;
        if (vb.count(i)) dot += x * vb[i];
    }
    for (auto [i, x] : vb) nb += x * x;
    return na == 0 || nb == 0 ? 0.0 : dot / std::sqrt(na * nb);
}

}  // namespace

TEST(Retrieve, SingleMatchingAsset) {
    const Catalog c({box("b1", "bed", "bed"), box("d1", "desk", "desk")});
    EXPECT_EQ(c.retrieve("double bed", {1, 1, 1}).asset->id, "b1");
}

TEST(Retrieve, TiesGoToTheSmallerId) {
    const Catalog c({box("zeta", "bed", "bed"), box("alpha", "bed", "bed"), box("mid", "bed", "bed")});
    const auto r = c.retrieve("bed", {1, 1, 1});
    EXPECT_EQ(r.asset->id, "alpha");
    EXPECT_NEAR(r.similarity, 1.0, 1e-12);
    EXPECT_EQ(Catalog({box("b", "x", "lamp"), box("a", "x", "sofa")}).retrieve("", {1, 1, 1}).asset->id, "a");
}

TEST(Retrieve, KingSizeBedMatchesHandComputedCosines) {
    const Catalog c({box("bed", "bed", "bed"), box("desk", "desk", "desk"), box("sofa", "sofa", "sofa")});
    const std::string q = "king size bed";
    std::string best;
    double best_score = -2;
    for (const std::string name : {"bed", "desk", "sofa"}) {
        const double s = bag_cosine(q, name);
        EXPECT_NEAR(cosine(hash_embed(q), c.find(name)->embedding), s, 1e-12) << name;
        if (s > best_score) best_score = s, best = name;
    }
    EXPECT_EQ(best, "bed");
    EXPECT_NEAR(bag_cosine(q, "bed"), 1.0 / std::sqrt(3.0), 1e-12);
    const auto r = c.retrieve(q, {1, 1, 1});
    EXPECT_EQ(r.asset->id, "bed");
    EXPECT_NEAR(r.similarity, best_score, 1e-12);
}

TEST(Retrieve, ScaleIsTargetOverCanonical) {
    const Catalog c({box("b", "bed", "bed", {2.0, 1.0, 0.5})});
    const auto r = c.retrieve("bed", {1.0, 2.0, 0.5});
    EXPECT_DOUBLE_EQ(r.scale.x, 0.5);
    EXPECT_DOUBLE_EQ(r.scale.y, 2.0);
    EXPECT_DOUBLE_EQ(r.scale.z, 1.0);
}

TEST(Retrieve, EmptyCatalogThrows) {
    EXPECT_THROW(Catalog().retrieve("bed", {1, 1, 1}), EmptyCatalog);
}

TEST(CatalogFile, ParsesRecords) {
    const auto c = Catalog::parse(
        "# comment\n"
        "\n"
        "b2 bed \"double bed # big\" 1.5 2 0.5 double, queen  # trailing\n"
        "b1 bed \"single bed\" 0.9 2 0.5\n");
    ASSERT_EQ(c.assets().size(), 2u);
    EXPECT_EQ(c.assets()[0].id, "b1");
    const Asset* b2 = c.find("b2");
    ASSERT_TRUE(b2);
    EXPECT_EQ(b2->name, "double bed # big");
    EXPECT_EQ(b2->tags, (std::vector<std::string>{"double", "queen"}));
    EXPECT_EQ(b2->size, (Vec3{1.5, 2, 0.5}));
    EXPECT_EQ(c.find("b3"), nullptr);
}

TEST(CatalogFile, RejectsMalformedRecords) {
    EXPECT_THROW(Catalog::parse("b bed bed 1 1 1\n"), FormatError);
    EXPECT_THROW(Catalog::parse("b bed \"bed\" 1 1\n"), FormatError);
    EXPECT_THROW(Catalog::parse("b bed \"bed\" 1 0 1\n"), FormatError);
    EXPECT_THROW(Catalog::parse("b bed \"bed\" 1 1 1\nb sofa \"sofa\" 1 1 1\n"), FormatError);
    EXPECT_THROW(Catalog::parse("lonely\n"), FormatError);
    EXPECT_THROW(Catalog::load("/nonexistent/default.cat"), IoError);
}

TEST(DefaultCatalog, CoversEveryCorpusCategory) {
    const auto c = Catalog::load(kDefault);
    EXPECT_GE(c.assets().size(), 50u);
    for (const auto& [category, range] : corpus::category_sizes()) {
        SceneObject o;
        o.category = category;
        const auto r = c.retrieve(describe(o), range.hi);
        EXPECT_EQ(r.asset->category, category) << category << " -> " << r.asset->id;
    }
}

TEST(DefaultCatalog, DeterministicAndPoseNeutral) {
    const auto c = Catalog::load(kDefault);
    const auto h = io::parse_hierarchy({io::read_file(std::string(HILAYOUT_DATA_DIR) + "/fixtures/bedroom_small.hi")});
    const auto layout = solve_scene(h, rule_predictions(h), 7);
    auto a = layout, b = layout;
    assign_assets(a, c);
    assign_assets(b, c);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.objects, layout.objects);
    for (const auto& [id, o] : a.hierarchy.objects) {
        ASSERT_TRUE(o.asset) << id;
        EXPECT_EQ(o.size, layout.hierarchy.objects.at(id).size);
        EXPECT_EQ(o.pose, layout.hierarchy.objects.at(id).pose);
    }
    EXPECT_EQ(c.find(*a.hierarchy.objects.at("bed").asset)->category, "bed");
}
