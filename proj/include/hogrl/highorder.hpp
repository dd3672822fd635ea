#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hogrl/graph.hpp"
#include "hogrl/matrix.hpp"

namespace hogrl {

/// How order-l neighborhoods are read.
///
/// WalkCount: S^l = A^l - A^(l-1) + I, built from walk-count powers of A.
/// Entries may be negative; they are kept as is.
/// ExactHop: row-normalized indicator of {u : dist(v,u) = l} plus v itself.
enum class PropagationMode { WalkCount, ExactHop };

inline const char* to_string(PropagationMode m) noexcept {
    return m == PropagationMode::WalkCount ? "walk" : "hop";
}

inline PropagationMode parse_propagation_mode(const std::string& s) {
    if (s == "walk") return PropagationMode::WalkCount;
    if (s == "hop") return PropagationMode::ExactHop;
    throw InvalidArgument("unknown propagation mode '" + s + "' (expected walk|hop)");
}

struct HighOrderConfig {
    std::size_t max_order = 7;
    PropagationMode mode = PropagationMode::WalkCount;
    bool normalized = true;  // row-normalize A before powering (WalkCount only)
};

/// S^l·X for l = 1..max_order. Parameter-independent, computed once per graph.
struct PropagatedFeatures {
    std::vector<Matrix> orders;  // orders[l-1] holds S^l·X
    HighOrderConfig config;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t num_orders() const noexcept { return orders.size(); }
    [[nodiscard]] const Matrix& order(std::size_t l) const { return orders.at(l - 1); }
};

namespace detail {

/// Truncated BFS from one source. Visits nodes level by level up to
/// `max_depth`, calling `on_level(depth, nodes)` for depth = 1..max_depth
/// (possibly with an empty span once the frontier dies out).
class BoundedBfs {
public:
    explicit BoundedBfs(const RelationGraph& g) : g_(g), stamp_(g.num_nodes(), 0) {}

    template <class OnLevel>
    void run(std::size_t source, std::size_t max_depth, OnLevel&& on_level) {
        ++epoch_;
        stamp_[source] = epoch_;
        frontier_.assign(1, static_cast<NodeId>(source));
        for (std::size_t depth = 1; depth <= max_depth; ++depth) {
            next_.clear();
            for (NodeId u : frontier_) {
                for (NodeId w : g_.neighbors(u)) {
                    if (stamp_[w] == epoch_) continue;
                    stamp_[w] = epoch_;
                    next_.push_back(w);
                }
            }
            std::sort(next_.begin(), next_.end());
            on_level(depth, std::span<const NodeId>(next_));
            frontier_.swap(next_);
        }
    }

private:
    const RelationGraph& g_;
    std::vector<std::uint64_t> stamp_;
    std::uint64_t epoch_ = 0;
    std::vector<NodeId> frontier_;
    std::vector<NodeId> next_;
};

inline void axpy(std::span<double> dst, double a, std::span<const double> src) noexcept {
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += a * src[j];
}

} // namespace detail

inline PropagatedFeatures propagate_features(const RelationGraph& g, const Matrix& features,
                                             const HighOrderConfig& cfg) {
    if (features.rows() != g.num_nodes()) {
        throw InvalidArgument("propagate_features: features have " + std::to_string(features.rows()) +
                              " rows, graph has " + std::to_string(g.num_nodes()) + " nodes");
    }
    if (cfg.max_order < 1) throw InvalidArgument("propagate_features: max order must be at least 1");

    PropagatedFeatures out;
    out.config = cfg;
    out.orders.reserve(cfg.max_order);

    if (cfg.mode == PropagationMode::WalkCount) {
        // P_l = A·P_(l-1), P_0 = X; emit P_l - P_(l-1) + X. A^l is never formed.
        // only the weights change under normalization, so skip building a second graph
        const bool rescale = cfg.normalized && !g.normalized();
        const std::vector<double> scaled = rescale ? detail::row_normalized_values(g) : std::vector<double>{};
        const std::span<const double> weights = rescale ? std::span<const double>(scaled) : std::span<const double>(g.values());
        // order 1 reads X in place; the second walk buffer is only needed from order 2 on
        Matrix cur(features.rows(), features.cols());
        Matrix prev;
        for (std::size_t l = 1; l <= cfg.max_order; ++l) {
            const Matrix& in = l == 1 ? features : prev;
            detail::spmm_pattern(g, weights, in, cur);
            Matrix s(features.rows(), features.cols());
            auto sv = s.values();
            auto cv = cur.values();
            auto pv = in.values();
            auto xv = features.values();
            // X - P_(l-1) first, so order 1 reproduces A·X exactly
            for (std::size_t i = 0; i < sv.size(); ++i) sv[i] = cv[i] + (xv[i] - pv[i]);
            out.orders.push_back(std::move(s));
            if (l == cfg.max_order) break;
            if (l == 1) prev = Matrix(features.rows(), features.cols());
            std::swap(prev, cur);
        }
        return out;
    }

    for (std::size_t l = 0; l < cfg.max_order; ++l) out.orders.emplace_back(features.rows(), features.cols());
    std::vector<std::size_t> nonempty(cfg.max_order, 0);
    detail::BoundedBfs bfs(g);
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
        bfs.run(v, cfg.max_order, [&](std::size_t depth, std::span<const NodeId> ring) {
            auto dst = out.orders[depth - 1].row(v);
            const double w = 1.0 / static_cast<double>(ring.size() + 1);
            detail::axpy(dst, w, features.row(v));
            for (NodeId u : ring) detail::axpy(dst, w, features.row(u));
            if (!ring.empty()) ++nonempty[depth - 1];
        });
    }
    for (std::size_t l = 0; l < cfg.max_order; ++l) {
        if (nonempty[l] == 0) {
            out.warnings.push_back("order " + std::to_string(l + 1) +
                                   ": no node has neighbors at this exact distance; rows hold self features only");
        }
    }
    return out;
}

/// Exact-distance rings with the center node added: ring(l, v) = {u : dist(v,u) = l} ∪ {v}.
class HopRing {
public:
    HopRing() = default;
    HopRing(std::size_t max_order, std::vector<std::vector<std::vector<NodeId>>> rings)
        : max_order_(max_order), rings_(std::move(rings)) {}

    [[nodiscard]] std::size_t max_order() const noexcept { return max_order_; }
    [[nodiscard]] std::size_t num_nodes() const noexcept { return rings_.empty() ? 0 : rings_.front().size(); }

    /// Sorted members of ring l (1-based) for node v, v included.
    [[nodiscard]] const std::vector<NodeId>& members(std::size_t l, std::size_t v) const {
        return rings_.at(l - 1).at(v);
    }

private:
    std::size_t max_order_ = 0;
    std::vector<std::vector<std::vector<NodeId>>> rings_;  // [l-1][v]
};

inline HopRing hop_rings(const RelationGraph& g, std::size_t max_order) {
    if (max_order < 1) throw InvalidArgument("hop_rings: max order must be at least 1");
    std::vector<std::vector<std::vector<NodeId>>> rings(max_order,
                                                        std::vector<std::vector<NodeId>>(g.num_nodes()));
    detail::BoundedBfs bfs(g);
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
        bfs.run(v, max_order, [&](std::size_t depth, std::span<const NodeId> ring) {
            auto& dst = rings[depth - 1][v];
            dst.assign(ring.begin(), ring.end());
            dst.insert(std::lower_bound(dst.begin(), dst.end(), static_cast<NodeId>(v)), static_cast<NodeId>(v));
        });
    }
    return {max_order, std::move(rings)};
}

/// Fraud-node homophily per order, read two ways: over the whole ball of
/// radius l (mixed-order view) and over the exact ring at distance l
/// (decoupled view). The center node is excluded from both.
struct LayerHomophily {
    std::vector<double> mixed;      // defined values, one per fraud node with labeled members
    std::vector<double> decoupled;
    std::size_t mixed_undefined = 0;
    std::size_t decoupled_undefined = 0;
    Histogram mixed_hist;
    Histogram decoupled_hist;

    [[nodiscard]] static double mean_of(const std::vector<double>& xs) {
        if (xs.empty()) return std::nan("");
        double s = 0.0;
        for (double x : xs) s += x;
        return s / static_cast<double>(xs.size());
    }
    [[nodiscard]] double mixed_mean() const { return mean_of(mixed); }
    [[nodiscard]] double decoupled_mean() const { return mean_of(decoupled); }
};

struct LayerwiseHomophily {
    std::vector<LayerHomophily> layers;  // layers[l-1]
};

inline LayerwiseHomophily layerwise_homophily(const RelationGraph& g, const LabelVector& labels,
                                              std::size_t max_order, std::size_t bins = 10) {
    if (labels.size() != g.num_nodes()) throw InvalidArgument("layerwise_homophily: label count mismatch");
    if (max_order < 1) throw InvalidArgument("layerwise_homophily: max order must be at least 1");
    if (bins < 2) throw InvalidArgument("layerwise_homophily: need at least 2 bins");

    LayerwiseHomophily out;
    for (std::size_t l = 0; l < max_order; ++l) {
        LayerHomophily layer;
        layer.mixed_hist = Histogram(bins);
        layer.decoupled_hist = Histogram(bins);
        out.layers.push_back(std::move(layer));
    }

    detail::BoundedBfs bfs(g);
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
        if (labels[v] != 1) continue;
        std::size_t ball_same = 0;
        std::size_t ball_total = 0;
        bfs.run(v, max_order, [&](std::size_t depth, std::span<const NodeId> ring) {
            std::size_t same = 0;
            std::size_t total = 0;
            for (NodeId u : ring) {
                if (!labels.labeled(u)) continue;
                ++total;
                if (labels[u] == 1) ++same;
            }
            ball_same += same;
            ball_total += total;
            auto& layer = out.layers[depth - 1];
            if (total) {
                const double h = static_cast<double>(same) / static_cast<double>(total);
                layer.decoupled.push_back(h);
                layer.decoupled_hist.add(h);
            } else {
                ++layer.decoupled_undefined;
            }
            if (ball_total) {
                const double h = static_cast<double>(ball_same) / static_cast<double>(ball_total);
                layer.mixed.push_back(h);
                layer.mixed_hist.add(h);
            } else {
                ++layer.mixed_undefined;
            }
        });
    }
    return out;
}

} // namespace hogrl
