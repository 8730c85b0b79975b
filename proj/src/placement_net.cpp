#include "hilayout/placement_net.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "hilayout/error.hpp"
#include "hilayout/relations.hpp"

namespace hilayout {

namespace {

constexpr const char* kMagic = "HILCKPT1";

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

std::string object_content(const SceneObject& o) {
    return o.text + '\x1f' + o.category + '\x1f' + hex(o.size.x) + ',' + hex(o.size.y) + ',' + hex(o.size.z);
}

std::string node_text(const SceneObject& o) { return o.text.empty() ? o.category : o.text; }

}  // namespace

NetConfig NetConfig::from_json(const nlohmann::json& j) {
    NetConfig c;
    c.embed = j.value("embed", c.embed);
    c.hidden = j.value("hidden", c.hidden);
    c.latent = j.value("latent", c.latent);
    c.rounds = j.value("rounds", c.rounds);
    if (c.embed <= 0 || c.hidden <= 0 || c.latent <= 0 || c.rounds <= 0) {
        throw FormatError("network dimensions must be positive");
    }
    return c;
}

nlohmann::json NetConfig::to_json() const {
    return {{"embed", embed}, {"hidden", hidden}, {"latent", latent}, {"rounds", rounds}};
}

ContextualGraph build_graph(const SceneHierarchy& h, GraphMode mode, const TextEmbedder& embedder) {
    ContextualGraph g;
    std::vector<TextEmbedding> ntext, etext;
    std::vector<Vec3> nsize;
    std::vector<std::array<double, kPlacementDim>> eplace;
    std::vector<std::array<double, 2>> tpos;

    for (std::size_t ai = 0; ai < h.areas.size(); ++ai) {
        const auto& area = h.areas[ai];
        const int base = g.index.nodes;
        const int k = static_cast<int>(area.members.size());
        int anchor = -1;
        for (int i = 0; i < k; ++i) {
            const auto& id = area.members[static_cast<std::size_t>(i)];
            const auto& o = h.objects.at(id);
            g.node_ids.push_back(id);
            g.node_area.push_back(ai);
            ntext.push_back(embedder.embed(node_text(o)));
            nsize.push_back(o.size);
            if (id == area.anchor) anchor = i;
        }
        g.index.nodes += k;
        const SceneObject& anchor_obj = h.objects.at(area.anchor);
        std::map<std::string, int> seen;

        for (int i = 0; i < k; ++i) {
            const auto& id = area.members[static_cast<std::size_t>(i)];
            const RelationEdge* rel = h.relation_from(id);
            if (rel && rel->to != area.anchor) rel = nullptr;
            for (int j = 0; j < k; ++j) {
                if (i == j) continue;
                const bool to_anchor = j == anchor;
                const int e = g.index.edges();
                g.index.src.push_back(base + i);
                g.index.dst.push_back(base + j);
                g.touches_anchor.push_back(i == anchor || j == anchor);
                const bool text = to_anchor && rel && rel->text && !rel->text->empty();
                g.has_text.push_back(text);
                etext.push_back(text ? embedder.embed(*rel->text) : TextEmbedding{});

                std::array<double, kPlacementDim> place{};
                bool has_place = false;
                if (to_anchor) {
                    g.latent_edges.push_back(e);
                    g.latent_ids.push_back(id);
                    const std::string content = object_content(h.objects.at(id)) + '\x1e' + object_content(anchor_obj) +
                                                '\x1e' + (rel && rel->text ? *rel->text : std::string());
                    const int occurrence = seen[content]++;
                    g.latent_keys.push_back(fnv1a(content + '\x1d' + std::to_string(occurrence)));
                    if (mode == GraphMode::Train) {
                        if (!rel || !rel->placement) {
                            throw MissingGroundTruth("object \"" + id + "\" has no ground-truth placement relative to \"" +
                                                     area.anchor + "\"");
                        }
                        const auto& pl = *rel->placement;
                        place = {pl.position.x, pl.position.y, 0, 0, 0, 0, pl.aligned ? 1.0 : 0.0};
                        place[static_cast<std::size_t>(2 + pl.theta.quarters())] = 1.0;
                        has_place = true;
                        tpos.push_back({pl.position.x, pl.position.y});
                        g.target_theta.push_back(pl.theta.quarters());
                        g.target_aligned.push_back(pl.aligned ? 1.0 : 0.0);
                    }
                }
                g.has_place.push_back(has_place);
                eplace.push_back(place);
            }
        }
    }

    const int n = g.index.nodes, m = g.index.edges();
    g.node_text.resize(n, kTextDim);
    g.node_size.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < kTextDim; ++c) g.node_text(i, static_cast<int>(c)) = ntext[static_cast<std::size_t>(i)][c];
        const Vec3 s = nsize[static_cast<std::size_t>(i)];
        g.node_size.row(i) << s.x, s.y, s.z;
    }
    g.edge_text.resize(m, kTextDim);
    g.edge_place.resize(m, kPlacementDim);
    for (int e = 0; e < m; ++e) {
        const auto es = static_cast<std::size_t>(e);
        for (std::size_t c = 0; c < kTextDim; ++c) g.edge_text(e, static_cast<int>(c)) = etext[es][c];
        for (int c = 0; c < kPlacementDim; ++c) g.edge_place(e, c) = eplace[es][static_cast<std::size_t>(c)];
    }
    g.target_pos.resize(static_cast<int>(tpos.size()), 2);
    for (std::size_t r = 0; r < tpos.size(); ++r) g.target_pos.row(static_cast<int>(r)) << tpos[r][0], tpos[r][1];
    g.index.rebuild_neighbors();
    return g;
}

std::vector<ContextualGraph> split_by_area(const ContextualGraph& g) {
    std::vector<ContextualGraph> parts;
    std::vector<int> local(static_cast<std::size_t>(g.index.nodes), -1);
    std::vector<std::size_t> part_of(static_cast<std::size_t>(g.index.nodes));
    std::map<std::size_t, std::size_t> area_part;
    for (int i = 0; i < g.index.nodes; ++i) {
        const std::size_t a = g.node_area[static_cast<std::size_t>(i)];
        auto [it, fresh] = area_part.emplace(a, parts.size());
        if (fresh) parts.emplace_back();
        ContextualGraph& p = parts[it->second];
        local[static_cast<std::size_t>(i)] = p.index.nodes++;
        part_of[static_cast<std::size_t>(i)] = it->second;
        p.node_ids.push_back(g.node_ids[static_cast<std::size_t>(i)]);
        p.node_area.push_back(a);
    }
    std::vector<std::vector<int>> node_rows(parts.size()), edge_rows(parts.size());
    for (int i = 0; i < g.index.nodes; ++i) node_rows[part_of[static_cast<std::size_t>(i)]].push_back(i);
    std::vector<int> edge_local(static_cast<std::size_t>(g.index.edges()), -1);
    for (int e = 0; e < g.index.edges(); ++e) {
        const auto es = static_cast<std::size_t>(e);
        const auto s = static_cast<std::size_t>(g.index.src[es]);
        const auto d = static_cast<std::size_t>(g.index.dst[es]);
        ContextualGraph& p = parts[part_of[s]];
        edge_local[es] = p.index.edges();
        edge_rows[part_of[s]].push_back(e);
        p.index.src.push_back(local[s]);
        p.index.dst.push_back(local[d]);
        p.has_text.push_back(g.has_text[es]);
        p.touches_anchor.push_back(g.touches_anchor[es]);
        p.has_place.push_back(g.has_place[es]);
    }
    const bool supervised = g.target_pos.rows() == static_cast<int>(g.latent_edges.size());
    std::vector<std::vector<int>> latent_rows(parts.size());
    for (std::size_t r = 0; r < g.latent_edges.size(); ++r) {
        const int e = g.latent_edges[r];
        const std::size_t k = part_of[static_cast<std::size_t>(g.index.src[static_cast<std::size_t>(e)])];
        ContextualGraph& p = parts[k];
        p.latent_edges.push_back(edge_local[static_cast<std::size_t>(e)]);
        p.latent_ids.push_back(g.latent_ids[r]);
        p.latent_keys.push_back(g.latent_keys[r]);
        latent_rows[k].push_back(static_cast<int>(r));
        if (supervised) {
            p.target_theta.push_back(g.target_theta[r]);
            p.target_aligned.push_back(g.target_aligned[r]);
        }
    }
    auto rows = [](const nn::Mat<double>& m, const std::vector<int>& idx) {
        nn::Mat<double> out(static_cast<int>(idx.size()), m.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<int>(r)) = m.row(idx[r]);
        return out;
    };
    for (std::size_t k = 0; k < parts.size(); ++k) {
        ContextualGraph& p = parts[k];
        p.node_text = rows(g.node_text, node_rows[k]);
        p.node_size = rows(g.node_size, node_rows[k]);
        p.edge_text = rows(g.edge_text, edge_rows[k]);
        p.edge_place = rows(g.edge_place, edge_rows[k]);
        p.target_pos = supervised ? rows(g.target_pos, latent_rows[k]) : nn::Mat<double>(0, 2);
        p.index.rebuild_neighbors();
    }
    return parts;
}

PlacementNet::PlacementNet(const NetConfig& cfg, std::vector<float> params) : model_(cfg), params_(std::move(params)) {
    if (params_.size() != model_.size()) {
        throw FormatError("expected " + std::to_string(model_.size()) + " parameters, got " +
                          std::to_string(params_.size()));
    }
    for (float v : params_) {
        if (!std::isfinite(v)) throw FormatError("non-finite network parameter");
    }
}

PlacementMap PlacementNet::infer(const SceneHierarchy& h, std::uint64_t seed, const TextEmbedder& embedder) const {
    return infer(build_graph(h, GraphMode::Infer, embedder), seed);
}

PlacementMap PlacementNet::infer(const ContextualGraph& g, std::uint64_t seed) const {
    PlacementMap out;
    for (const auto& part : split_by_area(g)) {
        if (part.latent_edges.empty()) continue;
        decode_area(part, seed, out);
    }
    return out;
}

void PlacementNet::decode_area(const ContextualGraph& g, std::uint64_t seed, PlacementMap& out) const {
    const Batch<float> b = make_batch<float>({&g});
    const int s = b.latent_count(), Z = config().latent;
    nn::Mat<float> z(s, Z);
    for (int r = 0; r < s; ++r) {
        Rng rng = Rng::derive(seed, g.latent_keys[static_cast<std::size_t>(r)]);
        for (int k = 0; k < Z; ++k) z(r, k) = static_cast<float>(rng.normal());
    }
    const Decoded<float> d = model_.decode(params_, b, z);
    for (int r = 0; r < s; ++r) {
        PredictedPlacement p;
        p.position = {static_cast<double>(d.position(r, 0)), static_cast<double>(d.position(r, 1))};
        double mx = d.theta_logits(r, 0);
        for (int k = 1; k < 4; ++k) mx = std::max(mx, static_cast<double>(d.theta_logits(r, k)));
        double sum = 0.0;
        for (int k = 0; k < 4; ++k) {
            p.theta_probs[static_cast<std::size_t>(k)] = std::exp(static_cast<double>(d.theta_logits(r, k)) - mx);
            sum += p.theta_probs[static_cast<std::size_t>(k)];
        }
        for (auto& v : p.theta_probs) v /= sum;
        p.aligned_prob = nn::sigmoid(static_cast<double>(d.aligned_logit(r, 0)));
        out[g.latent_ids[static_cast<std::size_t>(r)]] = p;
    }
}

double TrainConfig::kl_weight(int epoch) const {
    const int warm = std::max(1, static_cast<int>(std::lround(warmup_fraction * epochs)));
    return std::min(1.0, static_cast<double>(epoch) / warm);
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
    if (j.contains("adam")) {
        const auto& a = j.at("adam");
        c.adam_beta1 = a.value("beta1", c.adam_beta1);
        c.adam_beta2 = a.value("beta2", c.adam_beta2);
        c.adam_eps = a.value("eps", c.adam_eps);
    }
    if (j.contains("net")) c.net = NetConfig::from_json(j.at("net"));
    if (c.epochs <= 0 || c.batch_size <= 0 || !(c.learning_rate > 0)) {
        throw FormatError("epochs, batch_size and learning_rate must be positive");
    }
    return c;
}

nlohmann::json TrainConfig::to_json() const {
    return {{"learning_rate", learning_rate},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"seed", seed},
            {"warmup_fraction", warmup_fraction},
            {"adam", {{"beta1", adam_beta1}, {"beta2", adam_beta2}, {"eps", adam_eps}}},
            {"net", net.to_json()}};
}

namespace {

nlohmann::json loss_json(const LossBreakdown& l) {
    return {{"kl", l.kl}, {"ep", l.ep}, {"etheta", l.etheta}, {"ed", l.ed}, {"total", l.total}};
}

LossBreakdown loss_from_json(const nlohmann::json& j) {
    return {j.at("kl").get<double>(), j.at("ep").get<double>(), j.at("etheta").get<double>(), j.at("ed").get<double>(),
            j.at("total").get<double>()};
}

void write_floats(std::ostream& os, const std::vector<float>& v) {
    static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::vector<float> read_floats(std::istream& is, std::size_t n, const std::string& path) {
    std::vector<float> v(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (static_cast<std::size_t>(is.gcount()) != n * sizeof(float)) throw FormatError(path + ": truncated checkpoint");
    return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    const PlacementModel<float> model(c.net);
    if (c.params.size() != model.size()) throw FormatError("checkpoint parameter count does not match its config");
    const bool optimizer = !c.adam_m.empty();
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& t : model.layout().tensors()) tensors.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}});
    nlohmann::json history = nlohmann::json::array();
    for (const auto& l : c.history) history.push_back(loss_json(l));
    const nlohmann::json manifest = {{"format", "hilayout-checkpoint"},
                                     {"version", 1},
                                     {"dtype", "float32"},
                                     {"net", c.net.to_json()},
                                     {"param_count", c.params.size()},
                                     {"tensors", tensors},
                                     {"epochs_done", c.epochs_done},
                                     {"step", c.step},
                                     {"optimizer", optimizer},
                                     {"train_config", c.train_config},
                                     {"history", history}};
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write " + path);
        os << kMagic << '\n' << manifest.dump() << '\n';
        write_floats(os, c.params);
        if (optimizer) {
            write_floats(os, c.adam_m);
            write_floats(os, c.adam_v);
        }
        if (!os) throw IoError("write failed for " + path);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot replace " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    std::string magic, line;
    std::getline(is, magic);
    if (magic != kMagic) throw FormatError(path + ": not a checkpoint file");
    std::getline(is, line);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": bad manifest: " + e.what());
    }
    Checkpoint c;
    try {
        if (j.at("version").get<int>() != 1) throw FormatError(path + ": unsupported checkpoint version");
        c.net = NetConfig::from_json(j.at("net"));
        const PlacementModel<float> model(c.net);
        const auto& tensors = j.at("tensors");
        const auto& expected = model.layout().tensors();
        if (tensors.size() != expected.size() || j.at("param_count").get<std::size_t>() != model.size()) {
            throw FormatError(path + ": tensor manifest does not match the network config");
        }
        for (std::size_t i = 0; i < expected.size(); ++i) {
            const auto& t = tensors[i];
            if (t.at("name").get<std::string>() != expected[i].name || t.at("shape")[0].get<int>() != expected[i].rows ||
                t.at("shape")[1].get<int>() != expected[i].cols) {
                throw FormatError(path + ": tensor " + expected[i].name + " has an unexpected shape");
            }
        }
        c.epochs_done = j.at("epochs_done").get<int>();
        c.step = j.at("step").get<long>();
        c.train_config = j.value("train_config", nlohmann::json());
        for (const auto& l : j.at("history")) c.history.push_back(loss_from_json(l));
        c.params = read_floats(is, model.size(), path);
        if (j.at("optimizer").get<bool>()) {
            c.adam_m = read_floats(is, model.size(), path);
            c.adam_v = read_floats(is, model.size(), path);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": bad manifest: " + e.what());
    }
    if (is.peek() != std::char_traits<char>::eof()) throw FormatError(path + ": trailing bytes");
    return c;
}

Trainer::Trainer(const TrainConfig& cfg, const std::vector<SceneHierarchy>& corpus, const TextEmbedder& embedder)
    : cfg_(cfg), model_(cfg.net) {
    graphs_.reserve(corpus.size());
    for (const auto& h : corpus) graphs_.push_back(build_graph(h, GraphMode::Train, embedder));
    params_ = model_.init(cfg.seed);
    m_.assign(params_.size(), 0.0f);
    v_.assign(params_.size(), 0.0f);
}

Trainer::Trainer(const TrainConfig& cfg, const std::vector<SceneHierarchy>& corpus, const Checkpoint& resume,
                 const TextEmbedder& embedder)
    : Trainer(cfg, corpus, embedder) {
    if (!(resume.net == cfg.net)) throw FormatError("checkpoint network config differs from the training config");
    if (resume.adam_m.size() != params_.size()) throw FormatError("checkpoint has no optimizer state to resume from");
    params_ = resume.params;
    m_ = resume.adam_m;
    v_ = resume.adam_v;
    step_ = resume.step;
    epoch_ = resume.epochs_done;
    history_ = resume.history;
}

LossBreakdown Trainer::run_epoch() {
    Rng rng = Rng::derive(cfg_.seed, 0x7000 + static_cast<std::uint64_t>(epoch_));
    std::vector<std::size_t> order(graphs_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    const auto beta = static_cast<float>(cfg_.kl_weight(epoch_));
    const auto bs = static_cast<std::size_t>(cfg_.batch_size);
    const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
    LossBreakdown sum;
    int batches = 0;
    std::vector<float> grad(params_.size());
    for (std::size_t start = 0; start < order.size(); start += bs) {
        std::vector<const ContextualGraph*> part;
        for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) part.push_back(&graphs_[order[i]]);
        const Batch<float> b = make_batch<float>(part);
        nn::Mat<float> eps(b.latent_count(), cfg_.net.latent);
        for (int r = 0; r < eps.rows(); ++r) {
            for (int k = 0; k < eps.cols(); ++k) eps(r, k) = static_cast<float>(rng.normal());
        }
        std::fill(grad.begin(), grad.end(), 0.0f);
        const LossBreakdown l = model_.loss(params_, b, eps, beta, &grad);
        bool finite = std::isfinite(l.total);
        for (float g : grad) finite = finite && std::isfinite(g);
        if (!finite) {
            throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch_ + 1) + ", batch " +
                                std::to_string(batches) + " (kl " + std::to_string(l.kl) + ", ep " + std::to_string(l.ep) +
                                ", etheta " + std::to_string(l.etheta) + ", ed " + std::to_string(l.ed) + ")");
        }
        ++step_;
        const double t = static_cast<double>(step_);
        const auto lr = static_cast<float>(cfg_.learning_rate * std::sqrt(1.0 - std::pow(b2, t)) / (1.0 - std::pow(b1, t)));
        const auto fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2), eps_adam = static_cast<float>(cfg_.adam_eps);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i] = fb1 * m_[i] + (1.0f - fb1) * grad[i];
            v_[i] = fb2 * v_[i] + (1.0f - fb2) * grad[i] * grad[i];
            params_[i] -= lr * m_[i] / (std::sqrt(v_[i]) + eps_adam);
        }
        sum.kl += l.kl;
        sum.ep += l.ep;
        sum.etheta += l.etheta;
        sum.ed += l.ed;
        sum.total += l.total;
        ++batches;
    }
    if (batches > 0) {
        const double inv = 1.0 / batches;
        sum = {sum.kl * inv, sum.ep * inv, sum.etheta * inv, sum.ed * inv, sum.total * inv};
    }
    history_.push_back(sum);
    ++epoch_;
    return sum;
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint c;
    c.net = cfg_.net;
    c.params = params_;
    c.epochs_done = epoch_;
    c.step = step_;
    c.adam_m = m_;
    c.adam_v = v_;
    c.train_config = cfg_.to_json();
    c.history = history_;
    return c;
}

PredictedPlacement rule_fallback(const std::string& relation, Vec2 anchor_size, Vec2 object_size, int side) {
    const auto r = lookup_relation(relation);
    if (!r) throw UnknownRelation("unknown relation phrase \"" + relation + "\"");
    const RelPlacement off = canonical_offset(*r, anchor_size, object_size, side);
    PredictedPlacement p;
    p.position = off.position;
    p.theta_probs = {0, 0, 0, 0};
    p.theta_probs[static_cast<std::size_t>(off.theta.quarters())] = 1.0;
    p.aligned_prob = alignment_predicate(off) ? 1.0 : 0.0;
    return p;
}

PlacementMap rule_predictions(const SceneHierarchy& h) {
    PlacementMap out;
    for (const auto& a : h.areas) {
        const Vec2 anchor = h.objects.at(a.anchor).footprint();
        int side = -1;
        for (const auto& id : a.members) {
            if (id == a.anchor) continue;
            const auto* e = h.relation_from(id);
            const std::string phrase_text = (e && e->text && !e->text->empty()) ? *e->text : std::string(phrase(Relation::NextTo));
            out[id] = rule_fallback(phrase_text, anchor, h.objects.at(id).footprint(), side);
            side = -side;
        }
    }
    return out;
}

}  // namespace hilayout
