#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "hilayout/rng.hpp"

// Dense building blocks of the placement network with hand-written
// backward passes. Parameters live in one flat buffer so that optimizers,
// checkpoints and finite-difference checks can treat them uniformly.
namespace hilayout::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Tensor {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::size_t offset = 0;
};

class ParamLayout {
public:
    std::size_t add(std::string name, int rows, int cols) {
        const std::size_t off = size_;
        tensors_.push_back({std::move(name), rows, cols, off});
        size_ += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
        return off;
    }
    const std::vector<Tensor>& tensors() const { return tensors_; }
    std::size_t size() const { return size_; }

private:
    std::vector<Tensor> tensors_;
    std::size_t size_ = 0;
};

template <typename S>
S sigmoid(S x) {
    return x >= 0 ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

struct Linear {
    int in = 0;
    int out = 0;
    std::size_t w = 0;
    std::size_t b = 0;

    static Linear make(ParamLayout& layout, const std::string& name, int in, int out) {
        Linear l;
        l.in = in;
        l.out = out;
        l.w = layout.add(name + ".w", in, out);
        l.b = layout.add(name + ".b", 1, out);
        return l;
    }

    // Glorot uniform weights, zero bias.
    template <typename S>
    void init(S* p, Rng& rng) const {
        const double a = std::sqrt(6.0 / (in + out));
        for (int i = 0; i < in * out; ++i) p[w + i] = static_cast<S>(rng.uniform(-a, a));
        for (int i = 0; i < out; ++i) p[b + i] = S(0);
    }

    template <typename S>
    Mat<S> forward(const S* p, const Mat<S>& x) const {
        Eigen::Map<const Mat<S>> W(p + w, in, out);
        Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>> B(p + b, out);
        Mat<S> y = x * W;
        y.rowwise() += B;
        return y;
    }

    // Accumulates parameter gradients into g and returns dL/dx.
    template <typename S>
    Mat<S> backward(const S* p, S* g, const Mat<S>& x, const Mat<S>& dy) const {
        Eigen::Map<const Mat<S>> W(p + w, in, out);
        Eigen::Map<Mat<S>> gW(g + w, in, out);
        Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>> gB(g + b, out);
        gW.noalias() += x.transpose() * dy;
        gB += dy.colwise().sum();
        return dy * W.transpose();
    }
};

// Two-layer perceptron with a SiLU hidden layer.
struct Mlp {
    Linear l1;
    Linear l2;

    template <typename S>
    struct Cache {
        Mat<S> x;
        Mat<S> z;
        Mat<S> a;
    };

    static Mlp make(ParamLayout& layout, const std::string& name, int in, int hidden, int out) {
        return {Linear::make(layout, name + ".0", in, hidden), Linear::make(layout, name + ".1", hidden, out)};
    }

    template <typename S>
    void init(S* p, Rng& rng) const {
        l1.init(p, rng);
        l2.init(p, rng);
    }

    template <typename S>
    Mat<S> forward(const S* p, const Mat<S>& x, Cache<S>* cache = nullptr) const {
        Mat<S> z = l1.forward(p, x);
        Mat<S> a = z.unaryExpr([](S v) { return v * sigmoid(v); });
        Mat<S> y = l2.forward(p, a);
        if (cache) {
            cache->x = x;
            cache->z = std::move(z);
            cache->a = std::move(a);
        }
        return y;
    }

    template <typename S>
    Mat<S> backward(const S* p, S* g, const Cache<S>& c, const Mat<S>& dy) const {
        Mat<S> da = l2.backward(p, g, c.a, dy);
        Mat<S> dz = da.binaryExpr(c.z, [](S d, S v) {
            const S s = sigmoid(v);
            return d * s * (S(1) + v * (S(1) - s));
        });
        return l1.backward(p, g, c.x, dz);
    }
};

// Directed graph over n nodes; neighbors[i] lists the heads of edges
// leaving i, which is the 1-ring used for node aggregation.
struct GraphIndex {
    int nodes = 0;
    std::vector<int> src;
    std::vector<int> dst;
    std::vector<std::vector<int>> neighbors;

    int edges() const { return static_cast<int>(src.size()); }

    void rebuild_neighbors() {
        neighbors.assign(static_cast<std::size_t>(nodes), {});
        for (std::size_t e = 0; e < src.size(); ++e) neighbors[static_cast<std::size_t>(src[e])].push_back(dst[e]);
    }
};

// Rounds of edge update h_e <- g_e(h_i, h_e, h_j) followed by the residual
// node update h_o <- h_o + g_o(mean of neighbor node features). Nodes
// without neighbors keep their features.
struct MessagePassing {
    int node_dim = 0;
    int edge_dim = 0;
    std::vector<Mlp> edge_mlps;
    std::vector<Mlp> node_mlps;

    static MessagePassing make(ParamLayout& layout, const std::string& name, int node_dim, int edge_dim, int hidden,
                               int rounds) {
        MessagePassing m;
        m.node_dim = node_dim;
        m.edge_dim = edge_dim;
        for (int k = 0; k < rounds; ++k) {
            const std::string r = name + "." + std::to_string(k);
            m.edge_mlps.push_back(Mlp::make(layout, r + ".edge", 2 * node_dim + edge_dim, hidden, edge_dim));
            m.node_mlps.push_back(Mlp::make(layout, r + ".node", node_dim, hidden, node_dim));
        }
        return m;
    }

    int rounds() const { return static_cast<int>(edge_mlps.size()); }

    template <typename S>
    void init(S* p, Rng& rng) const {
        for (int k = 0; k < rounds(); ++k) {
            edge_mlps[static_cast<std::size_t>(k)].init(p, rng);
            node_mlps[static_cast<std::size_t>(k)].init(p, rng);
        }
    }

    template <typename S>
    struct Cache {
        std::vector<typename Mlp::Cache<S>> edge;
        std::vector<typename Mlp::Cache<S>> node;
        std::vector<int> active;  // nodes with at least one neighbor
    };

    // With update_last_nodes false the final node update is skipped; the
    // edge outputs are unaffected.
    template <typename S>
    void forward(const S* p, const GraphIndex& g, Mat<S>& h, Mat<S>& e, bool update_last_nodes = true,
                 Cache<S>* cache = nullptr) const {
        std::vector<int> active;
        for (int i = 0; i < g.nodes; ++i) {
            if (!g.neighbors[static_cast<std::size_t>(i)].empty()) active.push_back(i);
        }
        if (cache) {
            cache->edge.assign(static_cast<std::size_t>(rounds()), {});
            cache->node.assign(static_cast<std::size_t>(rounds()), {});
            cache->active = active;
        }
        const int m = g.edges();
        for (int k = 0; k < rounds(); ++k) {
            const auto ks = static_cast<std::size_t>(k);
            Mat<S> x(m, 2 * node_dim + edge_dim);
            for (int j = 0; j < m; ++j) {
                x.row(j).head(node_dim) = h.row(g.src[static_cast<std::size_t>(j)]);
                x.row(j).segment(node_dim, edge_dim) = e.row(j);
                x.row(j).tail(node_dim) = h.row(g.dst[static_cast<std::size_t>(j)]);
            }
            Mat<S> e_next = edge_mlps[ks].forward(p, x, cache ? &cache->edge[ks] : nullptr);
            if ((k + 1 < rounds() || update_last_nodes) && !active.empty()) {
                Mat<S> agg = Mat<S>::Zero(static_cast<int>(active.size()), node_dim);
                for (std::size_t r = 0; r < active.size(); ++r) {
                    const auto& nb = g.neighbors[static_cast<std::size_t>(active[r])];
                    for (int j : nb) agg.row(static_cast<int>(r)) += h.row(j);
                    agg.row(static_cast<int>(r)) /= static_cast<S>(nb.size());
                }
                const Mat<S> upd = node_mlps[ks].forward(p, agg, cache ? &cache->node[ks] : nullptr);
                for (std::size_t r = 0; r < active.size(); ++r) h.row(active[r]) += upd.row(static_cast<int>(r));
            }
            e = std::move(e_next);
        }
    }

    // dh and de hold gradients of the outputs and are replaced by gradients
    // of the inputs.
    template <typename S>
    void backward(const S* p, S* grad, const GraphIndex& g, const Cache<S>& c, Mat<S>& dh, Mat<S>& de) const {
        const int m = g.edges();
        for (int k = rounds() - 1; k >= 0; --k) {
            const auto ks = static_cast<std::size_t>(k);
            Mat<S> dh_in = dh;
            if (c.node[ks].z.rows() > 0) {
                Mat<S> dupd(static_cast<int>(c.active.size()), node_dim);
                for (std::size_t r = 0; r < c.active.size(); ++r) dupd.row(static_cast<int>(r)) = dh.row(c.active[r]);
                const Mat<S> dagg = node_mlps[ks].backward(p, grad, c.node[ks], dupd);
                for (std::size_t r = 0; r < c.active.size(); ++r) {
                    const auto& nb = g.neighbors[static_cast<std::size_t>(c.active[r])];
                    const S inv = S(1) / static_cast<S>(nb.size());
                    for (int j : nb) dh_in.row(j) += inv * dagg.row(static_cast<int>(r));
                }
            }
            const Mat<S> dx = edge_mlps[ks].backward(p, grad, c.edge[ks], de);
            Mat<S> de_in(m, edge_dim);
            for (int j = 0; j < m; ++j) {
                dh_in.row(g.src[static_cast<std::size_t>(j)]) += dx.row(j).head(node_dim);
                de_in.row(j) = dx.row(j).segment(node_dim, edge_dim);
                dh_in.row(g.dst[static_cast<std::size_t>(j)]) += dx.row(j).tail(node_dim);
            }
            dh = std::move(dh_in);
            de = std::move(de_in);
        }
    }
};

}  // namespace hilayout::nn
