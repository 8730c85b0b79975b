#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "hilayout/corpus.hpp"
#include "hilayout/error.hpp"
#include "hilayout/hierarchy_io.hpp"
#include "hilayout/placement_net.hpp"
#include "hilayout/relations.hpp"

using namespace hilayout;

namespace {

NetConfig small_net() {
    NetConfig c;
    c.embed = 16;
    c.hidden = 16;
    c.latent = 8;
    return c;
}

SceneHierarchy bedroom() {
    return io::parse_hierarchy({io::read_file(std::string(HILAYOUT_DATA_DIR) + "/fixtures/bedroom_small.hi")});
}

PlacementNet random_net(std::uint64_t seed = 3) {
    const PlacementModel<float> m(small_net());
    return PlacementNet(small_net(), m.init(seed));
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

// Straight-line evaluation of one message-passing round: every edge from its
// endpoints, then every node from the mean of its out-neighbors.
struct NaiveRound {
    int nd, ed, hid;
    const std::vector<double>& p;
    const nn::Mlp& edge;
    const nn::Mlp& node;

    std::vector<double> mlp(const nn::Mlp& m, const std::vector<double>& x) const {
        std::vector<double> a(static_cast<std::size_t>(m.l1.out));
        for (int j = 0; j < m.l1.out; ++j) {
            double z = p[m.l1.b + static_cast<std::size_t>(j)];
            for (int i = 0; i < m.l1.in; ++i) z += x[static_cast<std::size_t>(i)] * p[m.l1.w + static_cast<std::size_t>(i * m.l1.out + j)];
            a[static_cast<std::size_t>(j)] = silu(z);
        }
        std::vector<double> y(static_cast<std::size_t>(m.l2.out));
        for (int j = 0; j < m.l2.out; ++j) {
            double z = p[m.l2.b + static_cast<std::size_t>(j)];
            for (int i = 0; i < m.l2.in; ++i) z += a[static_cast<std::size_t>(i)] * p[m.l2.w + static_cast<std::size_t>(i * m.l2.out + j)];
            y[static_cast<std::size_t>(j)] = z;
        }
        return y;
    }
};

SceneHierarchy tiny_scene() {
    SceneHierarchy h;
    h.root = {"room", {4, 4}};
    h.objects["a"] = {"a", "a bed", "bed", std::nullopt, {1.6, 2.0, 0.5}, std::nullopt};
    h.objects["b"] = {"b", "a nightstand", "nightstand", std::nullopt, {0.5, 0.4, 0.5}, std::nullopt};
    h.areas.push_back({"s", "sleep", {3, 3}, std::nullopt, "a", {"a", "b"}});
    h.relations.push_back({"b", "a", "left of", EdgePlacement{{-1.1, 0.02}, Rot4{}, true}});
    return h;
}

void set_tensor(const nn::ParamLayout& layout, std::vector<double>& p, const std::string& name, const std::vector<double>& v) {
    for (const auto& t : layout.tensors()) {
        if (t.name != name) continue;
        ASSERT_EQ(v.size(), static_cast<std::size_t>(t.rows * t.cols));
        std::copy(v.begin(), v.end(), p.begin() + static_cast<std::ptrdiff_t>(t.offset));
        return;
    }
    FAIL() << "no tensor " << name;
}

SceneHierarchy relabeled(const SceneHierarchy& h, const std::string& prefix) {
    auto f = [&](const std::string& id) { return prefix + std::string(id.rbegin(), id.rend()); };
    SceneHierarchy out = h;
    out.objects.clear();
    for (auto [id, o] : h.objects) {
        o.id = f(id);
        out.objects.emplace(o.id, o);
    }
    for (auto& a : out.areas) {
        a.anchor = f(a.anchor);
        for (auto& m : a.members) m = f(m);
    }
    for (auto& r : out.relations) {
        r.from = f(r.from);
        r.to = f(r.to);
    }
    return out;
}

// Finite-difference probes move along a unit direction, so the step is the
// distance travelled in parameter space.
void normalize(std::vector<double>& v) {
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    for (auto& x : v) x /= std::sqrt(n2);
}

}  // namespace

TEST(BuildGraph, CompleteDigraphPerArea) {
    const auto h = bedroom();
    const auto g = build_graph(h, GraphMode::Infer);
    std::size_t expected = 0;
    for (const auto& a : h.areas) expected += a.members.size() * (a.members.size() - 1);
    EXPECT_EQ(static_cast<std::size_t>(g.index.edges()), expected);
    for (int e = 0; e < g.index.edges(); ++e) {
        const auto s = static_cast<std::size_t>(g.index.src[static_cast<std::size_t>(e)]);
        const auto d = static_cast<std::size_t>(g.index.dst[static_cast<std::size_t>(e)]);
        EXPECT_EQ(g.node_area[s], g.node_area[d]);
        EXPECT_NE(s, d);
    }
}

TEST(BuildGraph, AreasOfTwoAndThreeGiveEightEdges) {
    SceneHierarchy h;
    h.root = {"r", {8, 8}};
    for (const char* id : {"a", "b", "c", "d", "e"}) h.objects[id] = {id, id, "chair", std::nullopt, {0.5, 0.5, 0.5}, std::nullopt};
    h.areas.push_back({"x", "", {2, 2}, std::nullopt, "a", {"a", "b"}});
    h.areas.push_back({"y", "", {2, 2}, std::nullopt, "c", {"c", "d", "e"}});
    const auto g = build_graph(h, GraphMode::Infer);
    EXPECT_EQ(g.index.edges(), 8);
    EXPECT_EQ(g.latent_edges.size(), 3u);
    EXPECT_EQ(split_by_area(g).size(), 2u);
}

TEST(BuildGraph, TextAndPlacementSlices) {
    const auto h = bedroom();
    const auto g = build_graph(h, GraphMode::Infer);
    int with_text = 0;
    for (int e = 0; e < g.index.edges(); ++e) {
        if (!g.has_text[static_cast<std::size_t>(e)]) {
            EXPECT_EQ(g.edge_text.row(e).squaredNorm(), 0.0);
        } else {
            ++with_text;
            EXPECT_NEAR(g.edge_text.row(e).norm(), 1.0, 1e-12);
        }
        EXPECT_EQ(g.edge_place.row(e).squaredNorm(), 0.0);
        EXPECT_FALSE(g.has_place[static_cast<std::size_t>(e)]);
    }
    EXPECT_EQ(static_cast<std::size_t>(with_text), h.textual_relation_count());
}

TEST(BuildGraph, TrainModeNeedsGroundTruth) {
    EXPECT_THROW(build_graph(bedroom(), GraphMode::Train), MissingGroundTruth);
    const auto g = build_graph(tiny_scene(), GraphMode::Train);
    ASSERT_EQ(g.latent_edges.size(), 1u);
    const int e = g.latent_edges[0];
    EXPECT_TRUE(g.has_place[static_cast<std::size_t>(e)]);
    EXPECT_DOUBLE_EQ(g.edge_place(e, 0), -1.1);
    EXPECT_DOUBLE_EQ(g.edge_place(e, 2), 1.0);
    EXPECT_DOUBLE_EQ(g.edge_place(e, 6), 1.0);
}

TEST(MessagePassing, IdentityParamsByHand) {
    nn::ParamLayout layout;
    const auto mp = nn::MessagePassing::make(layout, "mp", 2, 2, 2, 1);
    std::vector<double> p(layout.size(), 0.0);
    // edge MLP reads only the h_e slice, node MLP is the identity up to SiLU
    const auto& em = mp.edge_mlps[0];
    p[em.l1.w + 2 * 2 + 0] = 1.0;
    p[em.l1.w + 3 * 2 + 1] = 1.0;
    p[em.l2.w + 0] = p[em.l2.w + 3] = 1.0;
    const auto& nm = mp.node_mlps[0];
    p[nm.l1.w + 0] = p[nm.l1.w + 3] = 1.0;
    p[nm.l2.w + 0] = p[nm.l2.w + 3] = 1.0;

    nn::GraphIndex g;
    g.nodes = 2;
    g.src = {0, 1};
    g.dst = {1, 0};
    g.rebuild_neighbors();
    nn::Mat<double> h(2, 2), e(2, 2);
    h << 1.0, -2.0, 0.5, 3.0;
    e << 0.25, -1.0, 2.0, 0.0;
    mp.forward(p.data(), g, h, e);

    EXPECT_DOUBLE_EQ(e(0, 0), 0.25 / (1 + std::exp(-0.25)));
    EXPECT_DOUBLE_EQ(e(0, 1), -1.0 / (1 + std::exp(1.0)));
    EXPECT_DOUBLE_EQ(e(1, 0), 2.0 / (1 + std::exp(-2.0)));
    EXPECT_DOUBLE_EQ(e(1, 1), 0.0);
    EXPECT_DOUBLE_EQ(h(0, 0), 1.0 + 0.5 / (1 + std::exp(-0.5)));
    EXPECT_DOUBLE_EQ(h(0, 1), -2.0 + 3.0 / (1 + std::exp(-3.0)));
    EXPECT_DOUBLE_EQ(h(1, 0), 0.5 + 1.0 / (1 + std::exp(-1.0)));
    EXPECT_DOUBLE_EQ(h(1, 1), 3.0 + -2.0 / (1 + std::exp(2.0)));
}

TEST(MessagePassing, MatchesNaiveRoundOnRandomGraphs) {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        nn::ParamLayout layout;
        const int nd = 3, ed = 2, hid = 4;
        const auto mp = nn::MessagePassing::make(layout, "mp", nd, ed, hid, 1);
        std::vector<double> p(layout.size());
        for (auto& v : p) v = rng.uniform(-1, 1);
        nn::GraphIndex g;
        g.nodes = 4;
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                if (i != j && rng.uniform() < 0.5) {
                    g.src.push_back(i);
                    g.dst.push_back(j);
                }
            }
        }
        g.rebuild_neighbors();
        nn::Mat<double> h = nn::Mat<double>::Random(4, nd), e = nn::Mat<double>::Random(g.edges(), ed);
        const nn::Mat<double> h0 = h, e0 = e;
        mp.forward(p.data(), g, h, e);

        const NaiveRound naive{nd, ed, hid, p, mp.edge_mlps[0], mp.node_mlps[0]};
        for (int k = 0; k < g.edges(); ++k) {
            std::vector<double> x;
            for (int c = 0; c < nd; ++c) x.push_back(h0(g.src[static_cast<std::size_t>(k)], c));
            for (int c = 0; c < ed; ++c) x.push_back(e0(k, c));
            for (int c = 0; c < nd; ++c) x.push_back(h0(g.dst[static_cast<std::size_t>(k)], c));
            const auto y = naive.mlp(naive.edge, x);
            for (int c = 0; c < ed; ++c) EXPECT_NEAR(e(k, c), y[static_cast<std::size_t>(c)], 1e-12);
        }
        for (int i = 0; i < 4; ++i) {
            const auto& nb = g.neighbors[static_cast<std::size_t>(i)];
            if (nb.empty()) {
                for (int c = 0; c < nd; ++c) EXPECT_EQ(h(i, c), h0(i, c));
                continue;
            }
            std::vector<double> avg(nd, 0.0);
            for (int j : nb) {
                for (int c = 0; c < nd; ++c) avg[static_cast<std::size_t>(c)] += h0(j, c) / static_cast<double>(nb.size());
            }
            const auto y = naive.mlp(naive.node, avg);
            for (int c = 0; c < nd; ++c) EXPECT_NEAR(h(i, c), h0(i, c) + y[static_cast<std::size_t>(c)], 1e-12);
        }
    }
}

TEST(MessagePassing, IsolatedNodeIsUnchanged) {
    nn::ParamLayout layout;
    const auto mp = nn::MessagePassing::make(layout, "mp", 4, 3, 8, 5);
    Rng rng(5);
    std::vector<double> p(layout.size());
    mp.init(p.data(), rng);
    nn::GraphIndex g;
    g.nodes = 3;
    g.src = {0, 1};
    g.dst = {1, 0};
    g.rebuild_neighbors();
    nn::Mat<double> h = nn::Mat<double>::Random(3, 4), e = nn::Mat<double>::Random(2, 3);
    const nn::Mat<double> before = h;
    mp.forward(p.data(), g, h, e);
    EXPECT_EQ(h.row(2), before.row(2));
    EXPECT_NE(h.row(0), before.row(0));
}

TEST(PlacementModel, LossIsZeroAtItsMinimum) {
    const PlacementModel<double> m(small_net());
    const auto g = build_graph(tiny_scene(), GraphMode::Train);
    const auto b = make_batch<double>({&g});
    std::vector<double> p(m.size(), 0.0);
    set_tensor(m.layout(), p, "head.position.1.b", {-1.1, 0.02});
    set_tensor(m.layout(), p, "head.theta.1.b", {60, 0, 0, 0});
    set_tensor(m.layout(), p, "head.aligned.1.b", {60});
    const auto l = m.loss(p, b, nn::Mat<double>::Random(1, 8), 1.0);
    EXPECT_EQ(l.kl, 0.0);
    EXPECT_NEAR(l.ep, 0.0, 1e-15);
    EXPECT_NEAR(l.etheta, 0.0, 1e-20);
    EXPECT_NEAR(l.ed, 0.0, 1e-20);
}

TEST(PlacementModel, UnitMeanShiftCostsHalfANat) {
    const PlacementModel<double> m(small_net());
    const auto g = build_graph(tiny_scene(), GraphMode::Train);
    const auto b = make_batch<double>({&g});
    std::vector<double> p(m.size(), 0.0);
    std::vector<double> bias(16, 0.0);
    bias[0] = 1.0;
    set_tensor(m.layout(), p, "posterior.1.b", bias);
    const auto l = m.loss(p, b, nn::Mat<double>::Zero(1, 8), 0.3);
    EXPECT_DOUBLE_EQ(l.kl, 0.5);
    EXPECT_DOUBLE_EQ(l.total, 0.3 * l.kl + l.ep + l.etheta + l.ed);
}

TEST(PlacementModel, ReductionIsMeanOverEdgesThenGraphs) {
    const PlacementModel<double> m(small_net());
    const auto scenes = corpus::generate(3, 8);
    std::vector<ContextualGraph> gs;
    for (const auto& h : scenes) gs.push_back(build_graph(h, GraphMode::Train));
    const auto p = m.init(1);
    double sum = 0.0;
    for (const auto& g : gs) {
        const auto b = make_batch<double>({&g});
        sum += m.loss(p, b, nn::Mat<double>::Zero(b.latent_count(), 8), 1.0).total;
    }
    const auto all = make_batch<double>({&gs[0], &gs[1], &gs[2]});
    const double joint = m.loss(p, all, nn::Mat<double>::Zero(all.latent_count(), 8), 1.0).total;
    EXPECT_NEAR(joint, sum / 3.0, 1e-12);
}

TEST(PlacementModel, GradientMatchesCentralDifferences) {
    const PlacementModel<double> m(small_net());
    const auto scenes = corpus::generate(2, 12);
    const auto g0 = build_graph(scenes[0], GraphMode::Train);
    const auto g1 = build_graph(scenes[1], GraphMode::Train);
    const auto b = make_batch<double>({&g0, &g1});
    const double h = 1e-5;
    double worst = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
        Rng rng = Rng::derive(77, static_cast<std::uint64_t>(draw));
        const auto p = m.init(static_cast<std::uint64_t>(draw));
        nn::Mat<double> eps(b.latent_count(), 8);
        for (int i = 0; i < eps.size(); ++i) eps.data()[i] = rng.normal();
        const double beta = rng.uniform();
        std::vector<double> grad;
        const auto l = m.loss(p, b, eps, beta, &grad);
        ASSERT_GE(l.kl, 0.0);

        std::vector<double> v(p.size());
        for (auto& x : v) x = rng.normal();
        normalize(v);
        auto along = [&](double t) {
            std::vector<double> q = p;
            for (std::size_t i = 0; i < q.size(); ++i) q[i] += t * v[i];
            return m.loss(q, b, eps, beta).total;
        };
        double analytic = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) analytic += grad[i] * v[i];
        const double numeric = (along(h) - along(-h)) / (2 * h);
        const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-12});
        worst = std::max(worst, rel);
        EXPECT_LE(rel, 1e-4) << "draw " << draw << " analytic " << analytic << " numeric " << numeric;
    }
    RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(PlacementModel, EveryTensorGradientMatches) {
    const PlacementModel<double> m(small_net());
    const auto scenes = corpus::generate(2, 13);
    const auto g0 = build_graph(scenes[0], GraphMode::Train);
    const auto g1 = build_graph(scenes[1], GraphMode::Train);
    const auto b = make_batch<double>({&g0, &g1});
    for (int draw = 0; draw < 3; ++draw) {
        Rng rng = Rng::derive(78, static_cast<std::uint64_t>(draw));
        const auto p = m.init(100 + static_cast<std::uint64_t>(draw));
        nn::Mat<double> eps(b.latent_count(), 8);
        for (int i = 0; i < eps.size(); ++i) eps.data()[i] = rng.normal();
        std::vector<double> grad;
        m.loss(p, b, eps, 0.7, &grad);
        for (const auto& t : m.layout().tensors()) {
            const std::size_t n = static_cast<std::size_t>(t.rows * t.cols);
            std::vector<double> v(n);
            for (auto& x : v) x = rng.normal();
            normalize(v);
            auto along = [&](double s) {
                std::vector<double> q = p;
                for (std::size_t i = 0; i < n; ++i) q[t.offset + i] += s * v[i];
                return m.loss(q, b, eps, 0.7).total;
            };
            double analytic = 0.0;
            for (std::size_t i = 0; i < n; ++i) analytic += grad[t.offset + i] * v[i];
            const double numeric = (along(1e-5) - along(-1e-5)) / 2e-5;
            const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-9});
            EXPECT_LE(std::abs(analytic - numeric) / scale, 1e-4) << t.name;
        }
    }
}

TEST(PlacementModel, KlIsNonNegative) {
    const PlacementModel<double> m(small_net());
    const auto scenes = corpus::generate(4, 14);
    std::vector<ContextualGraph> gs;
    for (const auto& h : scenes) gs.push_back(build_graph(h, GraphMode::Train));
    const auto b = make_batch<double>({&gs[0], &gs[1], &gs[2], &gs[3]});
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto p = m.init(s);
        Rng rng(s);
        for (auto& x : p) x *= rng.uniform(0.5, 3.0);
        const auto post = m.encode(p, b);
        const auto l = m.loss(p, b, nn::Mat<double>::Zero(b.latent_count(), 8), 1.0);
        EXPECT_GE(l.kl, 0.0);
        EXPECT_EQ(post.mu.rows(), b.latent_count());
    }
}

TEST(Infer, DeterministicPerSeedAndDiverseAcrossSeeds) {
    const auto net = random_net();
    const auto h = bedroom();
    const auto a = net.infer(h, 1);
    EXPECT_EQ(a, net.infer(h, 1));
    const auto b = net.infer(h, 2);
    double max_diff = 0.0;
    for (const auto& [id, p] : a) {
        const auto& q = b.at(id);
        max_diff = std::max({max_diff, std::abs(p.position.x - q.position.x), std::abs(p.position.y - q.position.y)});
    }
    EXPECT_GT(max_diff, 0.0);
}

TEST(Infer, OnePredictionPerSatelliteWithNormalizedTheta) {
    const auto net = random_net();
    const auto h = bedroom();
    const auto preds = net.infer(h, 9);
    std::size_t satellites = 0;
    for (const auto& a : h.areas) satellites += a.members.size() - 1;
    EXPECT_EQ(preds.size(), satellites);
    for (const auto& [id, p] : preds) {
        EXPECT_NE(h.area_of(id)->anchor, id);
        double s = 0.0;
        for (double v : p.theta_probs) s += v;
        EXPECT_NEAR(s, 1.0, 1e-6);
        EXPECT_TRUE(std::isfinite(p.position.x) && std::isfinite(p.position.y));
        EXPECT_GE(p.aligned_prob, 0.0);
        EXPECT_LE(p.aligned_prob, 1.0);
    }
}

TEST(Infer, RelabelingObjectsPermutesPredictionsExactly) {
    const auto net = random_net();
    const auto h = bedroom();
    const auto base = net.infer(h, 5);
    const auto moved = net.infer(relabeled(h, "z_"), 5);
    ASSERT_EQ(base.size(), moved.size());
    for (const auto& [id, p] : base) EXPECT_EQ(moved.at("z_" + std::string(id.rbegin(), id.rend())), p) << id;
}

TEST(Infer, AreasAreIsolated) {
    const auto net = random_net();
    const auto h = bedroom();
    const auto base = net.infer(h, 6);
    SceneHierarchy other = h;
    auto& b = other.areas[1];
    for (const auto& id : b.members) {
        auto& o = other.objects.at(id);
        o.text += " painted red";
        o.size.x *= 1.3;
    }
    for (auto& r : other.relations) {
        if (other.area_of(r.from) == &b) r.text = "next to";
    }
    other.objects["lamp"] = {"lamp", "floor lamp", "floor_lamp", std::nullopt, {0.3, 0.3, 1.5}, std::nullopt};
    b.members.push_back("lamp");
    const auto changed = net.infer(other, 6);
    for (const auto& id : h.areas[0].members) {
        if (id == h.areas[0].anchor) continue;
        EXPECT_EQ(changed.at(id), base.at(id)) << id;
    }
}

TEST(Checkpoint, RoundTripsAndResumesBitIdentically) {
    TrainConfig cfg;
    cfg.net = small_net();
    cfg.epochs = 3;
    cfg.seed = 5;
    const auto scenes = corpus::generate(10, 21);
    Trainer straight(cfg, scenes);
    while (!straight.done()) straight.run_epoch();

    Trainer first(cfg, scenes);
    first.run_epoch();
    const auto path = (std::filesystem::temp_directory_path() / "hilayout_ckpt_test.bin").string();
    save_checkpoint(first.checkpoint(), path);
    const Checkpoint loaded = load_checkpoint(path);
    EXPECT_EQ(loaded.params, first.checkpoint().params);
    EXPECT_EQ(loaded.history, first.history());
    Trainer resumed(cfg, scenes, loaded);
    while (!resumed.done()) resumed.run_epoch();
    EXPECT_EQ(resumed.checkpoint().params, straight.checkpoint().params);
    EXPECT_EQ(resumed.history(), straight.history());
    std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsBadFiles) {
    const auto dir = std::filesystem::temp_directory_path();
    EXPECT_THROW(load_checkpoint((dir / "hilayout_no_such_ckpt.bin").string()), IoError);
    const auto path = (dir / "hilayout_bad_ckpt.bin").string();
    {
        std::ofstream(path) << "HILCKPT1\n{\"version\": 1}\n";
    }
    EXPECT_THROW(load_checkpoint(path), FormatError);
    Checkpoint c;
    c.net = small_net();
    c.params = PlacementModel<float>(c.net).init(1);
    save_checkpoint(c, path);
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 4);
    EXPECT_THROW(load_checkpoint(path), FormatError);
    std::filesystem::remove(path);
}

TEST(Trainer, NonFiniteLossAborts) {
    TrainConfig cfg;
    cfg.net = small_net();
    cfg.epochs = 1;
    auto scenes = corpus::generate(2, 3);
    scenes[0].relations[0].placement->position.x = std::nan("");
    Trainer t(cfg, scenes);
    EXPECT_THROW(t.run_epoch(), NonFiniteLoss);
}

TEST(Trainer, KlWeightWarmsUpLinearly) {
    TrainConfig cfg;
    cfg.epochs = 200;
    EXPECT_EQ(cfg.kl_weight(0), 0.0);
    EXPECT_DOUBLE_EQ(cfg.kl_weight(10), 0.5);
    EXPECT_EQ(cfg.kl_weight(20), 1.0);
    EXPECT_EQ(cfg.kl_weight(150), 1.0);
}

TEST(RuleFallback, InFrontOfOffset) {
    const auto p = rule_fallback("in front of", {1.5, 2.0}, {0.5, 0.4});
    EXPECT_DOUBLE_EQ(p.position.y, 1.25);
    EXPECT_DOUBLE_EQ(p.position.x, 0.0);
    EXPECT_EQ(p.theta().degrees(), 180);
    EXPECT_EQ(p.theta_probs[2], 1.0);
}

TEST(RuleFallback, LeftOfOffset) {
    const auto p = rule_fallback("Left  Of", {2.0, 2.0}, {0.5, 0.4});
    EXPECT_DOUBLE_EQ(p.position.x, -(1.0 + 0.25 + 0.05));
    EXPECT_EQ(p.position.y, 0.0);
    EXPECT_TRUE(p.aligned());
}

TEST(RuleFallback, NextToIsMirrored) {
    const auto l = rule_fallback("next to", {1.2, 0.6}, {0.4, 0.4}, -1);
    const auto r = rule_fallback("next to", {1.2, 0.6}, {0.4, 0.4}, 1);
    EXPECT_EQ(l.position.x, -r.position.x);
    EXPECT_EQ(l.position.y, r.position.y);
}

TEST(RuleFallback, UnknownPhrase) { EXPECT_THROW(rule_fallback("on top of", {1, 1}, {1, 1}), UnknownRelation); }

TEST(RuleFallback, PredictionsSatisfyTheirRelations) {
    for (const auto& h : corpus::generate(20, 31)) {
        const auto preds = rule_predictions(h);
        for (const auto& r : h.relations) {
            if (!r.text) continue;
            const auto& p = preds.at(r.from);
            EXPECT_TRUE(relation_holds(*lookup_relation(*r.text), p.as_rel(), h.objects.at(r.to).footprint(),
                                       h.objects.at(r.from).footprint()));
        }
    }
}
