#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "hogrl/graph.hpp"
#include "hogrl/highorder.hpp"
#include "hogrl/matrix.hpp"
#include "hogrl/random.hpp"

namespace hogrl {

/// Architecture hyperparameters. `gamma` is fixed during training.
struct ModelConfig {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 64;               // width of experts and aggregator layers
    std::size_t orders = 7;                    // high-order experts per relation
    std::size_t agg_depth = 2;                 // mean-aggregator layers
    std::vector<std::size_t> head_hidden{64};  // MLP hidden widths
    double gamma = 1.0;
    double dropout = 0.3;
    bool expert_branch = true;                 // false: original-graph branch only, no expert parameters
    std::size_t num_relations = 1;

    [[nodiscard]] std::size_t embedding_dim() const noexcept { return num_relations * hidden_dim; }
};

struct RelationParams {
    std::vector<Matrix> expert;  // per order: input_dim x hidden_dim
    Matrix gate_w;               // orders x hidden_dim, row l is the gating vector of expert l
    Matrix gate_b;               // 1 x orders
    std::vector<Matrix> sage;    // per layer: (2 * in) x hidden_dim, self block first
};

struct HeadParams {
    std::vector<Matrix> weights;  // layer j: in_j x out_j, last layer has one output
    std::vector<Matrix> biases;   // 1 x out_j
};

/// Every learnable tensor. Also used for gradients and optimizer moments.
struct ModelParams {
    ModelConfig config;
    std::vector<RelationParams> relations;
    HeadParams head;

    /// Zero tensors with the shapes implied by `cfg`.
    static ModelParams zeros(const ModelConfig& cfg) {
        if (cfg.input_dim == 0 || cfg.hidden_dim == 0) throw InvalidArgument("ModelConfig: zero dimension");
        if (cfg.agg_depth < 1) throw InvalidArgument("ModelConfig: aggregator depth must be at least 1");
        if (cfg.expert_branch && cfg.orders < 1) throw InvalidArgument("ModelConfig: need at least one order");
        if (cfg.num_relations < 1) throw InvalidArgument("ModelConfig: need at least one relation");
        if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw InvalidArgument("ModelConfig: dropout must be in [0,1)");
        if (!(cfg.gamma >= 0.0)) throw InvalidArgument("ModelConfig: gamma must be non-negative");

        ModelParams p;
        p.config = cfg;
        for (std::size_t r = 0; r < cfg.num_relations; ++r) {
            RelationParams rp;
            if (cfg.expert_branch) {
                for (std::size_t l = 0; l < cfg.orders; ++l) rp.expert.emplace_back(cfg.input_dim, cfg.hidden_dim);
                rp.gate_w = Matrix(cfg.orders, cfg.hidden_dim);
                rp.gate_b = Matrix(1, cfg.orders);
            }
            std::size_t in = cfg.input_dim;
            for (std::size_t k = 0; k < cfg.agg_depth; ++k) {
                rp.sage.emplace_back(2 * in, cfg.hidden_dim);
                in = cfg.hidden_dim;
            }
            p.relations.push_back(std::move(rp));
        }
        std::size_t in = cfg.embedding_dim();
        for (std::size_t width : cfg.head_hidden) {
            p.head.weights.emplace_back(in, width);
            p.head.biases.emplace_back(1, width);
            in = width;
        }
        p.head.weights.emplace_back(in, 1);
        p.head.biases.emplace_back(1, 1);
        return p;
    }

    /// Visits (name, tensor) in manifest order.
    template <class F>
    void for_each(F&& f) {
        for (std::size_t r = 0; r < relations.size(); ++r) {
            auto& rp = relations[r];
            const std::string pre = "rel" + std::to_string(r) + ".";
            for (std::size_t l = 0; l < rp.expert.size(); ++l) f(pre + "expert" + std::to_string(l + 1), rp.expert[l]);
            if (!rp.expert.empty()) {
                f(pre + "gate_w", rp.gate_w);
                f(pre + "gate_b", rp.gate_b);
            }
            for (std::size_t k = 0; k < rp.sage.size(); ++k) f(pre + "sage" + std::to_string(k + 1), rp.sage[k]);
        }
        for (std::size_t j = 0; j < head.weights.size(); ++j) {
            f("head.w" + std::to_string(j), head.weights[j]);
            f("head.b" + std::to_string(j), head.biases[j]);
        }
    }

    template <class F>
    void for_each(F&& f) const {
        const_cast<ModelParams*>(this)->for_each(
            [&](const std::string& name, Matrix& m) { f(name, static_cast<const Matrix&>(m)); });
    }

    [[nodiscard]] std::size_t num_values() const {
        std::size_t total = 0;
        for_each([&](const std::string&, const Matrix& m) { total += m.size(); });
        return total;
    }

    /// Hash over every value; detects parameter changes between forward and backward.
    [[nodiscard]] std::uint64_t fingerprint() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for_each([&](const std::string&, const Matrix& m) {
            for (double v : m.values()) {
                std::uint64_t bits;
                std::memcpy(&bits, &v, sizeof bits);
                h = splitmix64(h ^ bits);
            }
        });
        return h;
    }
};

/// Glorot-uniform weights, zero biases. Each tensor draws from its own
/// stream keyed by name, so disabling a branch leaves the others unchanged.
inline ModelParams initialize_params(const ModelConfig& cfg, std::uint64_t seed) {
    ModelParams p = ModelParams::zeros(cfg);
    p.for_each([&](const std::string& name, Matrix& m) {
        const bool is_bias = name.find("gate_b") != std::string::npos || name.find(".b") != std::string::npos;
        if (is_bias) return;
        // gate rows are independent (hidden -> 1) maps
        const bool is_gate = name.find("gate_w") != std::string::npos;
        const double fan_in = static_cast<double>(is_gate ? m.cols() : m.rows());
        const double fan_out = is_gate ? 1.0 : static_cast<double>(m.cols());
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        Rng rng(derive_seed(seed, name));
        for (double& v : m.values()) v = rng.uniform(-bound, bound);
    });
    return p;
}

// --- inputs --------------------------------------------------------------

/// Parameter-independent inputs: features, the per-relation mean operator
/// and (when the expert branch is on) the cached S^l·X matrices.
struct ModelInputs {
    Matrix features;
    std::vector<RelationGraph> mean_operators;
    std::vector<PropagatedFeatures> propagated;

    [[nodiscard]] std::size_t num_nodes() const noexcept { return features.rows(); }
    [[nodiscard]] std::size_t num_relations() const noexcept { return mean_operators.size(); }
};

inline ModelInputs prepare_inputs(const MultiRelationGraph& graphs, Matrix features, const HighOrderConfig& hcfg,
                                  bool with_propagation = true) {
    if (features.rows() != graphs.num_nodes()) {
        throw InvalidArgument("prepare_inputs: feature rows (" + std::to_string(features.rows()) +
                              ") != node count (" + std::to_string(graphs.num_nodes()) + ")");
    }
    if (!features.all_finite()) throw InvalidArgument("prepare_inputs: features contain non-finite values");
    ModelInputs in;
    for (const auto& g : graphs.relations()) {
        in.mean_operators.push_back(g.normalized() ? g : row_normalize(g));
        if (with_propagation) in.propagated.push_back(propagate_features(g, features, hcfg));
    }
    in.features = std::move(features);
    return in;
}

// --- trace ---------------------------------------------------------------

struct RelationTrace {
    std::vector<Matrix> expert_out;  // h'^l after ReLU
    Matrix scores;                   // n x L gating scores
    Matrix alpha;                    // n x L gating weights
    Matrix mixed;                    // n x d_h, sum_l alpha^l h'^l
    std::vector<Matrix> sage_in;     // h^(k-1)
    std::vector<Matrix> sage_nbr;    // neighbor means
    std::vector<Matrix> sage_act;    // ReLU output, before dropout
    std::vector<Matrix> sage_mask;   // dropout scale per entry; empty outside train mode
    Matrix sage_out;                 // h^K after dropout
    Matrix fused;                    // h + gamma h'
};

struct ForwardTrace {
    std::vector<RelationTrace> relations;
    Matrix embedding;                // Z, n x (R * d_h)
    std::vector<Matrix> head_in;     // input of each head layer
    std::vector<Matrix> head_act;    // hidden ReLU outputs, before dropout
    std::vector<Matrix> head_mask;
    Matrix logits;                   // n x 1
    std::vector<double> probabilities;
    bool train_mode = false;
    std::uint64_t params_fingerprint = 0;
};

namespace detail {

inline void relu_inplace(Matrix& m) noexcept {
    for (double& v : m.values()) v = v > 0.0 ? v : 0.0;
}

/// Inverted-dropout scale matrix: 0 with probability `rate`, else 1/(1-rate).
inline Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, std::uint64_t seed) {
    Matrix mask(rows, cols, 1.0);
    if (rate <= 0.0) return mask;
    const double keep = 1.0 / (1.0 - rate);
    Rng rng(seed);
    for (double& v : mask.values()) v = rng.uniform() < rate ? 0.0 : keep;
    return mask;
}

inline void hadamard_inplace(Matrix& m, const Matrix& scale) noexcept {
    auto a = m.values();
    auto b = scale.values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
}

inline double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct DropoutPlan {
    bool active = false;
    double rate = 0.0;
    std::uint64_t seed = 0;
};

inline void sage_forward_into(const RelationGraph& mean_op, const Matrix& x, const RelationParams& rp,
                              const DropoutPlan& drop, std::size_t relation, RelationTrace& t) {
    Matrix h = x;
    for (std::size_t k = 0; k < rp.sage.size(); ++k) {
        if (rp.sage[k].rows() != 2 * h.cols()) throw InvalidArgument("sage_forward: weight shape mismatch");
        Matrix nbr = spmm(mean_op, h);
        Matrix act = matmul(hconcat(h, nbr), rp.sage[k]);
        relu_inplace(act);
        Matrix out = act;
        if (drop.active) {
            Matrix mask = dropout_mask(act.rows(), act.cols(), drop.rate,
                                       derive_seed(drop.seed, "sage", relation * 1024 + k));
            hadamard_inplace(out, mask);
            t.sage_mask.push_back(std::move(mask));
        }
        t.sage_in.push_back(std::move(h));
        t.sage_nbr.push_back(std::move(nbr));
        t.sage_act.push_back(std::move(act));
        h = std::move(out);
    }
    t.sage_out = std::move(h);
}

} // namespace detail

/// h'^l = ReLU((S^l X) W'^l) for each order, from the cached propagation.
inline std::vector<Matrix> expert_forward(const PropagatedFeatures& prop, const ModelParams& params, std::size_t r) {
    const auto& rp = params.relations.at(r);
    if (prop.num_orders() != rp.expert.size()) {
        throw InvalidArgument("expert_forward: cache holds " + std::to_string(prop.num_orders()) +
                              " orders, model expects " + std::to_string(rp.expert.size()));
    }
    std::vector<Matrix> out;
    out.reserve(rp.expert.size());
    for (std::size_t l = 0; l < rp.expert.size(); ++l) {
        Matrix h = matmul(prop.orders[l], rp.expert[l]);
        detail::relu_inplace(h);
        out.push_back(std::move(h));
    }
    return out;
}

struct GateOutput {
    Matrix scores;  // n x L
    Matrix alpha;   // n x L
    Matrix mixed;   // n x d_h
};

/// Per-node softmax gate over the expert outputs and the weighted mixture.
inline GateOutput gate_and_mix(const std::vector<Matrix>& expert_out, const ModelParams& params, std::size_t r) {
    const auto& rp = params.relations.at(r);
    const std::size_t orders = expert_out.size();
    if (orders == 0 || orders != rp.gate_w.rows()) throw InvalidArgument("gate_and_mix: order count mismatch");
    const std::size_t n = expert_out.front().rows();
    const std::size_t dh = expert_out.front().cols();
    GateOutput g{Matrix(n, orders), Matrix(n, orders), Matrix(n, dh)};
    for (std::size_t v = 0; v < n; ++v) {
        double top = -INFINITY;
        for (std::size_t l = 0; l < orders; ++l) {
            auto h = expert_out[l].row(v);
            auto w = rp.gate_w.row(l);
            double f = rp.gate_b(0, l);
            for (std::size_t j = 0; j < dh; ++j) f += w[j] * h[j];
            g.scores(v, l) = f;
            top = std::max(top, f);
        }
        double z = 0.0;
        for (std::size_t l = 0; l < orders; ++l) {
            const double e = std::exp(g.scores(v, l) - top);
            g.alpha(v, l) = e;
            z += e;
        }
        auto mixed = g.mixed.row(v);
        for (std::size_t l = 0; l < orders; ++l) {
            g.alpha(v, l) /= z;
            detail::axpy(mixed, g.alpha(v, l), expert_out[l].row(v));
        }
    }
    return g;
}

/// Mean-aggregator branch in inference mode: h^k = ReLU([h^(k-1), mean_N h^(k-1)] W^k).
/// `mean_op` must be row-normalized (isolated rows yield a zero neighbor mean).
inline Matrix sage_forward(const RelationGraph& mean_op, const Matrix& x, const ModelParams& params, std::size_t r) {
    if (x.rows() != mean_op.num_nodes()) throw InvalidArgument("sage_forward: feature rows mismatch");
    if (!mean_op.normalized()) throw InvalidArgument("sage_forward: mean operator must be row-normalized");
    RelationTrace t;
    detail::sage_forward_into(mean_op, x, params.relations.at(r), {}, r, t);
    return std::move(t.sage_out);
}

/// z^(r) = h^(r) + gamma h'^(r), concatenated over relations in declared order.
/// An empty `mixed` list means the expert branch is absent.
inline Matrix fuse_and_concat(const std::vector<Matrix>& sage_out, const std::vector<Matrix>& mixed, double gamma) {
    if (sage_out.empty()) throw InvalidArgument("fuse_and_concat: no relations");
    if (!mixed.empty() && mixed.size() != sage_out.size()) throw InvalidArgument("fuse_and_concat: relation count mismatch");
    const std::size_t n = sage_out.front().rows();
    const std::size_t dh = sage_out.front().cols();
    Matrix z(n, dh * sage_out.size());
    for (std::size_t r = 0; r < sage_out.size(); ++r) {
        if (sage_out[r].rows() != n || sage_out[r].cols() != dh) throw InvalidArgument("fuse_and_concat: dimension mismatch");
        if (!mixed.empty()) require_same_shape(sage_out[r], mixed[r], "fuse_and_concat");
        for (std::size_t v = 0; v < n; ++v) {
            auto h = sage_out[r].row(v);
            for (std::size_t j = 0; j < dh; ++j) {
                z(v, r * dh + j) = mixed.empty() ? h[j] : h[j] + gamma * mixed[r](v, j);
            }
        }
    }
    return z;
}

namespace detail {

inline void head_forward_into(const Matrix& z, const HeadParams& head, const DropoutPlan& drop, ForwardTrace& t) {
    Matrix a = z;
    const std::size_t layers = head.weights.size();
    for (std::size_t j = 0; j < layers; ++j) {
        if (head.weights[j].rows() != a.cols()) throw InvalidArgument("predict: head input width mismatch");
        Matrix pre = matmul(a, head.weights[j]);
        for (std::size_t v = 0; v < pre.rows(); ++v) {
            auto row = pre.row(v);
            auto b = head.biases[j].row(0);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
        }
        t.head_in.push_back(std::move(a));
        if (j + 1 == layers) {
            t.logits = std::move(pre);
            break;
        }
        relu_inplace(pre);
        Matrix out = pre;
        if (drop.active) {
            Matrix mask = dropout_mask(pre.rows(), pre.cols(), drop.rate, derive_seed(drop.seed, "head", j));
            hadamard_inplace(out, mask);
            t.head_mask.push_back(std::move(mask));
        }
        t.head_act.push_back(std::move(pre));
        a = std::move(out);
    }
    t.probabilities.resize(t.logits.rows());
    for (std::size_t v = 0; v < t.logits.rows(); ++v) t.probabilities[v] = sigmoid(t.logits(v, 0));
}

} // namespace detail

/// Fraud probability per row of Z (inference mode).
inline std::vector<double> predict(const Matrix& z, const ModelParams& params) {
    ForwardTrace t;
    detail::head_forward_into(z, params.head, {}, t);
    return std::move(t.probabilities);
}

/// Full forward pass with every intermediate kept for the backward pass.
/// Dropout masks are a pure function of `dropout_seed` and the layer, so the
/// trace is deterministic given (params, inputs, seed, train_mode).
inline ForwardTrace forward_full(const ModelInputs& in, const ModelParams& params, bool train_mode,
                                 std::uint64_t dropout_seed) {
    const auto& cfg = params.config;
    if (in.num_relations() != cfg.num_relations) throw InvalidArgument("forward_full: relation count mismatch");
    if (in.features.cols() != cfg.input_dim) throw InvalidArgument("forward_full: feature width mismatch");
    if (cfg.expert_branch && in.propagated.size() != cfg.num_relations) {
        throw InvalidArgument("forward_full: propagation cache missing for the expert branch");
    }

    const detail::DropoutPlan drop{train_mode && cfg.dropout > 0.0, cfg.dropout, dropout_seed};
    ForwardTrace t;
    t.train_mode = train_mode;
    t.params_fingerprint = params.fingerprint();
    t.relations.resize(cfg.num_relations);

    std::vector<Matrix> sage_outs;
    std::vector<Matrix> mixed;
    for (std::size_t r = 0; r < cfg.num_relations; ++r) {
        auto& rt = t.relations[r];
        if (cfg.expert_branch) {
            rt.expert_out = expert_forward(in.propagated[r], params, r);
            GateOutput g = gate_and_mix(rt.expert_out, params, r);
            rt.scores = std::move(g.scores);
            rt.alpha = std::move(g.alpha);
            rt.mixed = std::move(g.mixed);
            mixed.push_back(rt.mixed);
        }
        detail::sage_forward_into(in.mean_operators[r], in.features, params.relations[r], drop, r, rt);
        sage_outs.push_back(rt.sage_out);
    }
    t.embedding = fuse_and_concat(sage_outs, mixed, cfg.gamma);
    const std::size_t dh = cfg.hidden_dim;
    for (std::size_t r = 0; r < cfg.num_relations; ++r) {
        auto& fused = t.relations[r].fused;
        fused = Matrix(t.embedding.rows(), dh);
        for (std::size_t v = 0; v < fused.rows(); ++v) {
            for (std::size_t j = 0; j < dh; ++j) fused(v, j) = t.embedding(v, r * dh + j);
        }
    }
    detail::head_forward_into(t.embedding, params.head, drop, t);
    return t;
}

} // namespace hogrl
