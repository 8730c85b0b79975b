#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hilayout/graph_net.hpp"
#include "hilayout/prediction.hpp"
#include "hilayout/scene_model.hpp"
#include "hilayout/text_embed.hpp"
#include "json.hpp"

namespace hilayout {

struct NetConfig {
    int embed = 64;   ///< width of the size / placement / latent embeddings
    int hidden = 128;
    int latent = 32;
    int rounds = 5;

    int node_dim() const { return static_cast<int>(kTextDim) + embed; }
    int edge_dim() const { return static_cast<int>(kTextDim) + embed; }

    static NetConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// Placement feature of an edge: p (2), one-hot θ (4), d (1).
inline constexpr int kPlacementDim = 7;

enum class GraphMode { Train, Infer };

/// Per-area complete directed graph of a hierarchy with its input features.
struct ContextualGraph {
    nn::GraphIndex index;
    std::vector<std::string> node_ids;
    std::vector<std::size_t> node_area;
    nn::Mat<double> node_text;   ///< n x kTextDim
    nn::Mat<double> node_size;   ///< n x 3
    nn::Mat<double> edge_text;   ///< m x kTextDim, zero rows without a textual relation
    nn::Mat<double> edge_place;  ///< m x kPlacementDim, zero rows without ground truth
    std::vector<bool> has_text;
    std::vector<bool> touches_anchor;
    std::vector<bool> has_place;

    /// Satellite -> anchor edges: they carry the latent and the supervision.
    std::vector<int> latent_edges;
    std::vector<std::string> latent_ids;      ///< satellite id per latent edge
    std::vector<std::uint64_t> latent_keys;   ///< content key for inference noise

    nn::Mat<double> target_pos;  ///< train mode, s x 2
    std::vector<int> target_theta;
    std::vector<double> target_aligned;
};

/// Throws MissingGroundTruth in train mode when a satellite lacks a
/// relation edge with a placement.
ContextualGraph build_graph(const SceneHierarchy& h, GraphMode mode, const TextEmbedder& embedder = {});

/// One subgraph per functional area, in area order.
std::vector<ContextualGraph> split_by_area(const ContextualGraph& g);

struct LossBreakdown {
    double kl = 0.0;
    double ep = 0.0;
    double etheta = 0.0;
    double ed = 0.0;
    double total = 0.0;
    friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

/// Disjoint union of graphs in scalar type S, plus per-latent-edge loss
/// weights (mean over a graph's edges, then mean over graphs).
template <typename S>
struct Batch {
    nn::GraphIndex index;
    nn::Mat<S> node_text, node_size, edge_text, edge_place;
    std::vector<S> place_mask;
    std::vector<int> latent;
    std::vector<S> weight;
    nn::Mat<S> target_pos;
    std::vector<int> target_theta;
    std::vector<S> target_aligned;

    int latent_count() const { return static_cast<int>(latent.size()); }
};

template <typename S>
Batch<S> make_batch(const std::vector<const ContextualGraph*>& graphs);

template <typename S>
struct Decoded {
    nn::Mat<S> position;      ///< s x 2
    nn::Mat<S> theta_logits;  ///< s x 4
    nn::Mat<S> aligned_logit; ///< s x 1
};

template <typename S>
struct Posterior {
    nn::Mat<S> mu;
    nn::Mat<S> logvar;
};

/// Conditional VAE over latent edges: an encoder stack sees ground-truth
/// placements and yields a Gaussian per latent edge, a decoder stack sees
/// the context plus a latent sample and emits the placement heads.
template <typename S>
class PlacementModel {
public:
    explicit PlacementModel(const NetConfig& cfg);

    const NetConfig& config() const { return cfg_; }
    const nn::ParamLayout& layout() const { return layout_; }
    std::size_t size() const { return layout_.size(); }
    std::vector<S> init(std::uint64_t seed) const;

    /// Loss for the reparameterized sample z = μ + σ·eps (eps is s x latent).
    /// Adds gradients into *grad when given.
    LossBreakdown loss(const std::vector<S>& p, const Batch<S>& b, const nn::Mat<S>& eps, S beta,
                       std::vector<S>* grad = nullptr) const;

    Posterior<S> encode(const std::vector<S>& p, const Batch<S>& b) const;
    Decoded<S> decode(const std::vector<S>& p, const Batch<S>& b, const nn::Mat<S>& z) const;

    const nn::MessagePassing& encoder() const { return enc_; }
    const nn::MessagePassing& decoder() const { return dec_; }

private:
    struct Forward;
    nn::Mat<S> node_input(const S* p, const Batch<S>& b) const;
    void run(const S* p, const Batch<S>& b, const nn::Mat<S>& eps, Forward& f) const;

    NetConfig cfg_;
    nn::ParamLayout layout_;
    nn::Linear size_embed_, place_embed_, latent_embed_;
    nn::MessagePassing enc_, dec_;
    nn::Mlp posterior_head_, position_head_, theta_head_, aligned_head_;
};

extern template class PlacementModel<float>;
extern template class PlacementModel<double>;
extern template Batch<float> make_batch<float>(const std::vector<const ContextualGraph*>&);
extern template Batch<double> make_batch<double>(const std::vector<const ContextualGraph*>&);

/// Trained parameters, immutable after construction; infer is reentrant.
class PlacementNet {
public:
    PlacementNet(const NetConfig& cfg, std::vector<float> params);

    const NetConfig& config() const { return model_.config(); }
    const std::vector<float>& params() const { return params_; }

    /// One prediction per satellite, latents drawn from the prior with a
    /// stream keyed by (seed, edge content) so unchanged areas reproduce.
    /// Areas are decoded separately, which makes them exactly independent.
    PlacementMap infer(const SceneHierarchy& h, std::uint64_t seed, const TextEmbedder& embedder = {}) const;
    PlacementMap infer(const ContextualGraph& g, std::uint64_t seed) const;

private:
    void decode_area(const ContextualGraph& g, std::uint64_t seed, PlacementMap& out) const;

    PlacementModel<float> model_;
    std::vector<float> params_;
};

struct TrainConfig {
    double learning_rate = 1e-4;
    int epochs = 200;
    int batch_size = 4;
    std::uint64_t seed = 1;
    double warmup_fraction = 0.1;  ///< β rises linearly from 0 to 1 over this share of epochs
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    NetConfig net;

    /// β for a zero-based epoch.
    double kl_weight(int epoch) const;

    static TrainConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct Checkpoint {
    NetConfig net;
    std::vector<float> params;
    int epochs_done = 0;
    long step = 0;
    std::vector<float> adam_m;
    std::vector<float> adam_v;
    nlohmann::json train_config;  ///< provenance, may be null
    std::vector<LossBreakdown> history;
};

/// Binary format: magic line, one-line JSON manifest (config, tensor shapes,
/// counters, loss history), then little-endian float32 parameter data
/// followed by the optimizer moments.
void save_checkpoint(const Checkpoint& c, const std::string& path);
/// Throws IoError or FormatError.
Checkpoint load_checkpoint(const std::string& path);

/// Mini-batch Adam on the summed loss. Each epoch draws its shuffle and
/// noise from a stream derived from (seed, epoch), so a run resumed from a
/// checkpoint continues bit-identically.
class Trainer {
public:
    Trainer(const TrainConfig& cfg, const std::vector<SceneHierarchy>& corpus, const TextEmbedder& embedder = {});
    Trainer(const TrainConfig& cfg, const std::vector<SceneHierarchy>& corpus, const Checkpoint& resume,
            const TextEmbedder& embedder = {});

    /// Throws NonFiniteLoss naming the epoch and batch.
    LossBreakdown run_epoch();
    int epoch() const { return epoch_; }
    bool done() const { return epoch_ >= cfg_.epochs; }
    const std::vector<LossBreakdown>& history() const { return history_; }
    Checkpoint checkpoint() const;
    PlacementNet net() const { return PlacementNet(cfg_.net, params_); }

private:
    TrainConfig cfg_;
    PlacementModel<float> model_;
    std::vector<ContextualGraph> graphs_;
    std::vector<float> params_, m_, v_;
    long step_ = 0;
    int epoch_ = 0;
    std::vector<LossBreakdown> history_;
};

/// Deterministic placement for a relation phrase: the canonical offset with
/// a one-hot orientation. Throws UnknownRelation.
PredictedPlacement rule_fallback(const std::string& relation, Vec2 anchor_size, Vec2 object_size, int side = 1);

/// rule_fallback for every satellite of h. Satellites without a textual
/// relation are treated as "next to", alternating sides in member order.
PlacementMap rule_predictions(const SceneHierarchy& h);

}  // namespace hilayout
