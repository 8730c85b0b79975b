#include <algorithm>
#include <cmath>

#include "hilayout/placement_net.hpp"

namespace hilayout {

namespace {

constexpr int kText = static_cast<int>(kTextDim);

template <typename S>
nn::Mat<S> gather_rows(const nn::Mat<S>& m, const std::vector<int>& rows) {
    nn::Mat<S> out(static_cast<int>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<int>(r)) = m.row(rows[r]);
    return out;
}

}  // namespace

template <typename S>
Batch<S> make_batch(const std::vector<const ContextualGraph*>& graphs) {
    Batch<S> b;
    int n = 0, m = 0, s = 0, active = 0;
    for (const auto* g : graphs) {
        n += g->index.nodes;
        m += g->index.edges();
        s += static_cast<int>(g->latent_edges.size());
        if (!g->latent_edges.empty()) ++active;
    }
    b.index.nodes = n;
    b.node_text.resize(n, kText);
    b.node_size.resize(n, 3);
    b.edge_text.resize(m, kText);
    b.edge_place.resize(m, kPlacementDim);
    b.target_pos.resize(s, 2);
    int no = 0, eo = 0, so = 0;
    for (const auto* g : graphs) {
        const int gn = g->index.nodes, gm = g->index.edges(), gs = static_cast<int>(g->latent_edges.size());
        b.node_text.middleRows(no, gn) = g->node_text.cast<S>();
        b.node_size.middleRows(no, gn) = g->node_size.cast<S>();
        b.edge_text.middleRows(eo, gm) = g->edge_text.cast<S>();
        b.edge_place.middleRows(eo, gm) = g->edge_place.cast<S>();
        for (int e = 0; e < gm; ++e) {
            b.index.src.push_back(g->index.src[static_cast<std::size_t>(e)] + no);
            b.index.dst.push_back(g->index.dst[static_cast<std::size_t>(e)] + no);
            b.place_mask.push_back(g->has_place[static_cast<std::size_t>(e)] ? S(1) : S(0));
        }
        const bool supervised = g->target_pos.rows() == gs;
        for (int r = 0; r < gs; ++r) {
            b.latent.push_back(g->latent_edges[static_cast<std::size_t>(r)] + eo);
            b.weight.push_back(static_cast<S>(1.0 / (static_cast<double>(gs) * active)));
            if (supervised) {
                b.target_pos.row(so + r) = g->target_pos.row(r).cast<S>();
                b.target_theta.push_back(g->target_theta[static_cast<std::size_t>(r)]);
                b.target_aligned.push_back(static_cast<S>(g->target_aligned[static_cast<std::size_t>(r)]));
            } else {
                b.target_pos.row(so + r).setZero();
                b.target_theta.push_back(0);
                b.target_aligned.push_back(S(0));
            }
        }
        no += gn;
        eo += gm;
        so += gs;
    }
    b.index.rebuild_neighbors();
    return b;
}

template <typename S>
struct PlacementModel<S>::Forward {
    nn::Mat<S> h0, e0, place, le, stats, mu, logvar, sd, z, de;
    nn::MessagePassing::Cache<S> enc, dec;
    nn::Mlp::Cache<S> post, pos, theta, aligned;
    Decoded<S> out;
};

template <typename S>
PlacementModel<S>::PlacementModel(const NetConfig& cfg) : cfg_(cfg) {
    const int N = cfg.node_dim(), E = cfg.edge_dim(), H = cfg.hidden, P = cfg.embed, Z = cfg.latent;
    size_embed_ = nn::Linear::make(layout_, "size_embed", 3, P);
    place_embed_ = nn::Linear::make(layout_, "place_embed", kPlacementDim, P);
    latent_embed_ = nn::Linear::make(layout_, "latent_embed", Z, P);
    enc_ = nn::MessagePassing::make(layout_, "encoder", N, E, H, cfg.rounds);
    dec_ = nn::MessagePassing::make(layout_, "decoder", N, E, H, cfg.rounds);
    posterior_head_ = nn::Mlp::make(layout_, "posterior", E, H, 2 * Z);
    position_head_ = nn::Mlp::make(layout_, "head.position", E, H, 2);
    theta_head_ = nn::Mlp::make(layout_, "head.theta", E, H, 4);
    aligned_head_ = nn::Mlp::make(layout_, "head.aligned", E, H, 1);
}

template <typename S>
std::vector<S> PlacementModel<S>::init(std::uint64_t seed) const {
    std::vector<S> p(size());
    Rng rng = Rng::derive(seed, 0x1417);
    S* d = p.data();
    size_embed_.init(d, rng);
    place_embed_.init(d, rng);
    latent_embed_.init(d, rng);
    enc_.init(d, rng);
    dec_.init(d, rng);
    posterior_head_.init(d, rng);
    position_head_.init(d, rng);
    theta_head_.init(d, rng);
    aligned_head_.init(d, rng);
    return p;
}

template <typename S>
nn::Mat<S> PlacementModel<S>::node_input(const S* p, const Batch<S>& b) const {
    nn::Mat<S> h(b.index.nodes, cfg_.node_dim());
    h.leftCols(kText) = b.node_text;
    h.rightCols(cfg_.embed) = size_embed_.forward(p, b.node_size);
    return h;
}

template <typename S>
void PlacementModel<S>::run(const S* p, const Batch<S>& b, const nn::Mat<S>& eps, Forward& f) const {
    const int m = b.index.edges(), P = cfg_.embed, Z = cfg_.latent;
    f.h0 = node_input(p, b);
    f.place = place_embed_.forward(p, b.edge_place);
    for (int j = 0; j < m; ++j) f.place.row(j) *= b.place_mask[static_cast<std::size_t>(j)];
    f.e0.resize(m, cfg_.edge_dim());
    f.e0.leftCols(kText) = b.edge_text;
    f.e0.rightCols(P) = f.place;

    nn::Mat<S> h = f.h0, e = f.e0;
    enc_.forward(p, b.index, h, e, false, &f.enc);
    f.le = gather_rows(e, b.latent);
    f.stats = posterior_head_.forward(p, f.le, &f.post);
    f.mu = f.stats.leftCols(Z);
    f.logvar = f.stats.rightCols(Z);
    f.sd = (f.logvar.array() * S(0.5)).exp().matrix();
    f.z = f.mu + f.sd.cwiseProduct(eps);

    nn::Mat<S> ze = latent_embed_.forward(p, f.z);
    nn::Mat<S> ed(m, cfg_.edge_dim());
    ed.leftCols(kText) = b.edge_text;
    ed.rightCols(P).setZero();
    for (std::size_t r = 0; r < b.latent.size(); ++r) ed.row(b.latent[r]).tail(P) = ze.row(static_cast<int>(r));
    nn::Mat<S> hd = f.h0;
    dec_.forward(p, b.index, hd, ed, false, &f.dec);
    f.de = gather_rows(ed, b.latent);
    f.out.position = position_head_.forward(p, f.de, &f.pos);
    f.out.theta_logits = theta_head_.forward(p, f.de, &f.theta);
    f.out.aligned_logit = aligned_head_.forward(p, f.de, &f.aligned);
}

template <typename S>
LossBreakdown PlacementModel<S>::loss(const std::vector<S>& p, const Batch<S>& b, const nn::Mat<S>& eps, S beta,
                                      std::vector<S>* grad) const {
    Forward f;
    run(p.data(), b, eps, f);
    const int s = b.latent_count(), Z = cfg_.latent, P = cfg_.embed;

    LossBreakdown L;
    nn::Mat<S> dpos = nn::Mat<S>::Zero(s, 2), dtheta = nn::Mat<S>::Zero(s, 4), dal = nn::Mat<S>::Zero(s, 1);
    nn::Mat<S> dmu = nn::Mat<S>::Zero(s, Z), dlv = nn::Mat<S>::Zero(s, Z);
    for (int r = 0; r < s; ++r) {
        const S w = b.weight[static_cast<std::size_t>(r)];
        for (int c = 0; c < 2; ++c) {
            const S diff = f.out.position(r, c) - b.target_pos(r, c);
            L.ep += static_cast<double>(w * std::abs(diff));
            dpos(r, c) = diff > 0 ? w : (diff < 0 ? -w : S(0));
        }
        const auto lg = f.out.theta_logits.row(r);
        const S mx = lg.maxCoeff();
        const S se = (lg.array() - mx).exp().sum();
        const S lse = mx + std::log(se);
        const int y = b.target_theta[static_cast<std::size_t>(r)];
        L.etheta += static_cast<double>(w * (lse - lg(y)));
        for (int k = 0; k < 4; ++k) dtheta(r, k) = w * (std::exp(lg(k) - lse) - (k == y ? S(1) : S(0)));

        const S x = f.out.aligned_logit(r, 0);
        const S t = b.target_aligned[static_cast<std::size_t>(r)];
        L.ed += static_cast<double>(w * (std::max(x, S(0)) - x * t + std::log1p(std::exp(-std::abs(x)))));
        dal(r, 0) = w * (nn::sigmoid(x) - t);

        for (int k = 0; k < Z; ++k) {
            const S mu = f.mu(r, k), lv = f.logvar(r, k), var = f.sd(r, k) * f.sd(r, k);
            L.kl += static_cast<double>(w * S(0.5) * (mu * mu + var - S(1) - lv));
            dmu(r, k) = beta * w * mu;
            dlv(r, k) = beta * w * S(0.5) * (var - S(1));
        }
    }
    L.total = static_cast<double>(beta) * L.kl + L.ep + L.etheta + L.ed;
    if (!grad) return L;

    if (grad->size() != p.size()) grad->assign(p.size(), S(0));
    const S* pd = p.data();
    S* g = grad->data();
    const int m = b.index.edges();

    nn::Mat<S> dde = position_head_.backward(pd, g, f.pos, dpos);
    dde += theta_head_.backward(pd, g, f.theta, dtheta);
    dde += aligned_head_.backward(pd, g, f.aligned, dal);
    nn::Mat<S> ded = nn::Mat<S>::Zero(m, cfg_.edge_dim());
    for (int r = 0; r < s; ++r) ded.row(b.latent[static_cast<std::size_t>(r)]) = dde.row(r);
    nn::Mat<S> dhd = nn::Mat<S>::Zero(b.index.nodes, cfg_.node_dim());
    dec_.backward(pd, g, b.index, f.dec, dhd, ded);

    nn::Mat<S> dze(s, P);
    for (int r = 0; r < s; ++r) dze.row(r) = ded.row(b.latent[static_cast<std::size_t>(r)]).tail(P);
    const nn::Mat<S> dz = latent_embed_.backward(pd, g, f.z, dze);
    dmu += dz;
    dlv += (dz.array() * eps.array() * f.sd.array() * S(0.5)).matrix();
    nn::Mat<S> dstats(s, 2 * Z);
    dstats.leftCols(Z) = dmu;
    dstats.rightCols(Z) = dlv;
    const nn::Mat<S> dle = posterior_head_.backward(pd, g, f.post, dstats);

    nn::Mat<S> de = nn::Mat<S>::Zero(m, cfg_.edge_dim());
    for (int r = 0; r < s; ++r) de.row(b.latent[static_cast<std::size_t>(r)]) = dle.row(r);
    nn::Mat<S> dh = nn::Mat<S>::Zero(b.index.nodes, cfg_.node_dim());
    enc_.backward(pd, g, b.index, f.enc, dh, de);

    nn::Mat<S> dplace = de.rightCols(P);
    for (int j = 0; j < m; ++j) dplace.row(j) *= b.place_mask[static_cast<std::size_t>(j)];
    place_embed_.backward(pd, g, b.edge_place, dplace);
    dh += dhd;
    size_embed_.backward(pd, g, b.node_size, nn::Mat<S>(dh.rightCols(P)));
    return L;
}

template <typename S>
Posterior<S> PlacementModel<S>::encode(const std::vector<S>& p, const Batch<S>& b) const {
    Forward f;
    run(p.data(), b, nn::Mat<S>::Zero(b.latent_count(), cfg_.latent), f);
    return {f.mu, f.logvar};
}

template <typename S>
Decoded<S> PlacementModel<S>::decode(const std::vector<S>& p, const Batch<S>& b, const nn::Mat<S>& z) const {
    const S* pd = p.data();
    const int m = b.index.edges(), P = cfg_.embed;
    const nn::Mat<S> ze = latent_embed_.forward(pd, z);
    nn::Mat<S> e(m, cfg_.edge_dim());
    e.leftCols(kText) = b.edge_text;
    e.rightCols(P).setZero();
    for (std::size_t r = 0; r < b.latent.size(); ++r) e.row(b.latent[r]).tail(P) = ze.row(static_cast<int>(r));
    nn::Mat<S> h = node_input(pd, b);
    dec_.forward<S>(pd, b.index, h, e, false);
    const nn::Mat<S> de = gather_rows(e, b.latent);
    return {position_head_.forward(pd, de), theta_head_.forward(pd, de), aligned_head_.forward(pd, de)};
}

template class PlacementModel<float>;
template class PlacementModel<double>;
template Batch<float> make_batch<float>(const std::vector<const ContextualGraph*>&);
template Batch<double> make_batch<double>(const std::vector<const ContextualGraph*>&);

}  // namespace hilayout
