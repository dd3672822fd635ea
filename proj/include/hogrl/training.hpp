#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hogrl/error.hpp"
#include "hogrl/graph.hpp"
#include "hogrl/metrics.hpp"
#include "hogrl/model.hpp"
#include "hogrl/random.hpp"

namespace hogrl {

inline constexpr double kProbabilityClamp = 1e-12;

// --- loss ----------------------------------------------------------------

/// Per-node loss weights; empty means unit weights.
using NodeWeights = std::vector<double>;

/// Summed binary cross-entropy over `nodes`, probabilities clamped to [1e-12, 1-1e-12].
inline double bce_loss(std::span<const double> p, const LabelVector& labels, std::span<const std::size_t> nodes,
                       const NodeWeights& weights = {}) {
    if (nodes.empty()) throw InvalidArgument("bce_loss: empty node set");
    double total = 0.0;
    for (std::size_t v : nodes) {
        if (!labels.labeled(v)) throw InvalidArgument("bce_loss: node " + std::to_string(v) + " is unlabeled");
        const double q = std::clamp(p[v], kProbabilityClamp, 1.0 - kProbabilityClamp);
        const double w = weights.empty() ? 1.0 : weights[v];
        total -= w * (labels[v] == 1 ? std::log(q) : std::log(1.0 - q));
    }
    return total;
}

// --- reverse mode --------------------------------------------------------

namespace detail {

inline void relu_backward_inplace(Matrix& grad, const Matrix& activation) noexcept {
    auto g = grad.values();
    auto a = activation.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(a[i] > 0.0)) g[i] = 0.0;
    }
}

inline void column_sums_into(const Matrix& m, Matrix& out) noexcept {
    auto dst = out.row(0);
    for (std::size_t v = 0; v < m.rows(); ++v) {
        auto src = m.row(v);
        for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
    }
}

inline Matrix column_block(const Matrix& m, std::size_t first, std::size_t width) {
    Matrix out(m.rows(), width);
    for (std::size_t v = 0; v < m.rows(); ++v) {
        auto src = m.row(v).subspan(first, width);
        std::copy(src.begin(), src.end(), out.row(v).begin());
    }
    return out;
}

} // namespace detail

/// Exact gradients of `bce_loss` over `nodes` with respect to every
/// parameter. Dropout masks recorded in the trace are reused. gamma is a
/// fixed hyperparameter and receives no gradient.
inline ModelParams backward(const ForwardTrace& trace, const ModelInputs& in, const LabelVector& labels,
                            std::span<const std::size_t> nodes, const ModelParams& params,
                            const NodeWeights& weights = {}) {
    if (trace.params_fingerprint != params.fingerprint()) {
        throw InvalidArgument("backward: stale trace, parameters changed since the forward pass");
    }
    const auto& cfg = params.config;
    const std::size_t n = in.num_nodes();
    const std::size_t dh = cfg.hidden_dim;
    ModelParams grads = ModelParams::zeros(cfg);

    // dL/dlogit; zero where the clamp is active.
    Matrix upstream(n, 1);
    for (std::size_t v : nodes) {
        const double p = trace.probabilities[v];
        if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) continue;
        const double w = weights.empty() ? 1.0 : weights[v];
        upstream(v, 0) += w * (p - static_cast<double>(labels[v]));
    }

    // MLP head
    const std::size_t layers = params.head.weights.size();
    for (std::size_t j = layers; j-- > 0;) {
        if (j + 1 < layers) {
            if (trace.train_mode && !trace.head_mask.empty()) detail::hadamard_inplace(upstream, trace.head_mask[j]);
            detail::relu_backward_inplace(upstream, trace.head_act[j]);
        }
        matmul_tn_into(trace.head_in[j], upstream, grads.head.weights[j]);
        detail::column_sums_into(upstream, grads.head.biases[j]);
        upstream = matmul_nt(upstream, params.head.weights[j]);
    }
    const Matrix& d_embedding = upstream;

    for (std::size_t r = 0; r < cfg.num_relations; ++r) {
        const auto& rt = trace.relations[r];
        const auto& rp = params.relations[r];
        auto& rg = grads.relations[r];
        Matrix d_fused = detail::column_block(d_embedding, r * dh, dh);

        if (cfg.expert_branch && cfg.gamma != 0.0) {
            const std::size_t orders = rp.expert.size();
            std::vector<Matrix> d_expert(orders, Matrix(n, dh));
            std::vector<double> d_alpha(orders);
            for (std::size_t v = 0; v < n; ++v) {
                auto g = d_fused.row(v);
                if (std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; })) continue;
                // d mixed = gamma * d fused
                double weighted = 0.0;
                for (std::size_t l = 0; l < orders; ++l) {
                    auto h = rt.expert_out[l].row(v);
                    double s = 0.0;
                    for (std::size_t c = 0; c < dh; ++c) s += cfg.gamma * g[c] * h[c];
                    d_alpha[l] = s;
                    weighted += rt.alpha(v, l) * s;
                }
                for (std::size_t l = 0; l < orders; ++l) {
                    const double a = rt.alpha(v, l);
                    const double d_score = a * (d_alpha[l] - weighted);
                    auto h = rt.expert_out[l].row(v);
                    auto w = rp.gate_w.row(l);
                    auto gw = rg.gate_w.row(l);
                    auto dst = d_expert[l].row(v);
                    for (std::size_t c = 0; c < dh; ++c) {
                        gw[c] += d_score * h[c];
                        dst[c] = a * cfg.gamma * g[c] + d_score * w[c];
                    }
                    rg.gate_b(0, l) += d_score;
                }
            }
            for (std::size_t l = 0; l < orders; ++l) {
                detail::relu_backward_inplace(d_expert[l], rt.expert_out[l]);
                matmul_tn_into(in.propagated[r].orders[l], d_expert[l], rg.expert[l]);
            }
        }

        // mean-aggregator branch
        Matrix d_out = std::move(d_fused);
        for (std::size_t k = rp.sage.size(); k-- > 0;) {
            if (trace.train_mode && !rt.sage_mask.empty()) detail::hadamard_inplace(d_out, rt.sage_mask[k]);
            detail::relu_backward_inplace(d_out, rt.sage_act[k]);
            const std::size_t width = rt.sage_in[k].cols();
            Matrix top(width, dh);
            Matrix bottom(width, dh);
            matmul_tn_into(rt.sage_in[k], d_out, top);
            matmul_tn_into(rt.sage_nbr[k], d_out, bottom);
            auto& gw = rg.sage[k];
            for (std::size_t i = 0; i < width; ++i) {
                auto t = top.row(i);
                auto b = bottom.row(i);
                auto gt = gw.row(i);
                auto gb = gw.row(width + i);
                for (std::size_t c = 0; c < dh; ++c) {
                    gt[c] += t[c];
                    gb[c] += b[c];
                }
            }
            if (k == 0) break;
            Matrix d_concat = matmul_nt(d_out, rp.sage[k]);
            Matrix d_self = detail::column_block(d_concat, 0, width);
            Matrix d_nbr = spmm_transpose(in.mean_operators[r], detail::column_block(d_concat, width, width));
            auto a = d_self.values();
            auto b = d_nbr.values();
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
            d_out = std::move(d_self);
        }
    }
    return grads;
}

// --- optimizer -----------------------------------------------------------

struct AdamConfig {
    double lr = 5e-3;
    double weight_decay = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    ModelParams first;
    ModelParams second;
    std::size_t step = 0;

    static AdamState for_params(const ModelParams& p) {
        return {ModelParams::zeros(p.config), ModelParams::zeros(p.config), 0};
    }
};

namespace detail {
inline std::vector<std::pair<std::string, Matrix*>> tensor_list(ModelParams& p) {
    std::vector<std::pair<std::string, Matrix*>> out;
    p.for_each([&](const std::string& name, Matrix& m) { out.emplace_back(name, &m); });
    return out;
}
} // namespace detail

/// Adam with decoupled weight decay: p <- p - lr*wd*p, then the bias-corrected Adam update.
inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const AdamConfig& cfg) {
    auto p = detail::tensor_list(params);
    auto g = detail::tensor_list(const_cast<ModelParams&>(grads));
    auto m = detail::tensor_list(state.first);
    auto v = detail::tensor_list(state.second);
    if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
        throw InvalidArgument("adam_step: parameter layout mismatch");
    }
    for (std::size_t t = 0; t < p.size(); ++t) {
        require_same_shape(*p[t].second, *g[t].second, "adam_step");
        if (!g[t].second->all_finite()) throw NumericalError("adam_step: non-finite gradient in " + p[t].first);
    }

    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t t = 0; t < p.size(); ++t) {
        auto pv = p[t].second->values();
        auto gv = g[t].second->values();
        auto mv = m[t].second->values();
        auto vv = v[t].second->values();
        for (std::size_t i = 0; i < pv.size(); ++i) {
            pv[i] -= cfg.lr * cfg.weight_decay * pv[i];
            mv[i] = cfg.beta1 * mv[i] + (1.0 - cfg.beta1) * gv[i];
            vv[i] = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * gv[i] * gv[i];
            const double m_hat = mv[i] / c1;
            const double v_hat = vv[i] / c2;
            pv[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

// --- data split ----------------------------------------------------------

struct SplitMasks {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Per-class proportional split of the labeled nodes. Each part gets
/// floor(fraction * class size); the rounding residue goes to test.
inline SplitMasks stratified_split(const LabelVector& labels, std::array<double, 3> fractions = {0.4, 0.4, 0.2},
                                   std::uint64_t seed = 0) {
    SplitMasks masks;
    for (int c = 0; c < 2; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t v = 0; v < labels.size(); ++v) {
            if (labels[v] == c) members.push_back(v);
        }
        if (members.size() < 3) {
            throw InvalidArgument("stratified_split: class " + std::to_string(c) + " has " +
                                  std::to_string(members.size()) + " members, need at least 3");
        }
        Rng rng(derive_seed(seed, "split", static_cast<std::uint64_t>(c)));
        rng.shuffle(members);
        const auto count = static_cast<double>(members.size());
        const auto n_train = static_cast<std::size_t>(std::floor(fractions[0] * count + 1e-9));
        const auto n_val = static_cast<std::size_t>(std::floor(fractions[1] * count + 1e-9));
        auto it = members.begin();
        masks.train.insert(masks.train.end(), it, it + static_cast<std::ptrdiff_t>(n_train));
        it += static_cast<std::ptrdiff_t>(n_train);
        masks.val.insert(masks.val.end(), it, it + static_cast<std::ptrdiff_t>(n_val));
        it += static_cast<std::ptrdiff_t>(n_val);
        masks.test.insert(masks.test.end(), it, members.end());
    }
    for (auto* part : {&masks.train, &masks.val, &masks.test}) std::sort(part->begin(), part->end());
    return masks;
}

// --- training loop -------------------------------------------------------

inline constexpr std::size_t kFullBatch = 0;

struct TrainConfig {
    double lr = 5e-3;
    double weight_decay = 5e-5;
    std::size_t epochs = 1000;
    std::size_t eval_every = 10;
    std::size_t batch_size = 2048;  // kFullBatch: all train nodes each step
    double dropout = 0.3;
    std::size_t orders = 7;
    std::size_t agg_depth = 2;
    std::size_t hidden_dim = 64;
    std::vector<std::size_t> head_hidden{64};
    double gamma = 1.0;
    std::uint64_t seed = 0;
    PropagationMode mode = PropagationMode::WalkCount;
    bool raw_adjacency = false;
    bool expert_branch = true;
    bool class_weighting = false;
    double threshold = 0.5;

    void validate() const {
        if (!(lr > 0.0)) throw InvalidArgument("TrainConfig: lr must be positive");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("TrainConfig: dropout must be in [0,1)");
        if (!(weight_decay >= 0.0 && weight_decay < 1.0)) throw InvalidArgument("TrainConfig: weight_decay must be in [0,1)");
        if (eval_every == 0) throw InvalidArgument("TrainConfig: eval_every must be positive");
        if (!(gamma >= 0.0)) throw InvalidArgument("TrainConfig: gamma must be non-negative");
    }

    [[nodiscard]] HighOrderConfig high_order() const { return {orders, mode, !raw_adjacency}; }

    [[nodiscard]] ModelConfig model(std::size_t input_dim, std::size_t relations) const {
        ModelConfig m;
        m.input_dim = input_dim;
        m.hidden_dim = hidden_dim;
        m.orders = orders;
        m.agg_depth = agg_depth;
        m.head_hidden = head_hidden;
        m.gamma = gamma;
        m.dropout = dropout;
        m.expert_branch = expert_branch;
        m.num_relations = relations;
        return m;
    }
};

struct EpochReport {
    std::size_t epoch = 0;
    double train_loss = 0.0;       // summed over the epoch's steps
    double train_loss_mean = 0.0;  // per train node
    EvalResult val;
    double wall_seconds = 0.0;
};

struct TrainResult {
    ModelParams best;
    std::size_t best_epoch = 0;  // 0: initialization, no evaluation ran
    EvalResult best_val;
    std::vector<EpochReport> reports;
};

class TrainingAborted : public NumericalError {
public:
    TrainingAborted(const std::string& what, std::optional<EpochReport> last)
        : NumericalError(what), last_report(std::move(last)) {}
    std::optional<EpochReport> last_report;
};

inline std::vector<int> labels_of(const LabelVector& labels, std::span<const std::size_t> nodes) {
    std::vector<int> out;
    out.reserve(nodes.size());
    for (auto v : nodes) out.push_back(labels[v]);
    return out;
}

inline std::vector<double> scores_of(std::span<const double> p, std::span<const std::size_t> nodes) {
    std::vector<double> out;
    out.reserve(nodes.size());
    for (auto v : nodes) out.push_back(p[v]);
    return out;
}

/// Inference-mode probabilities for every node.
inline std::vector<double> infer(const ModelInputs& in, const ModelParams& params) {
    return forward_full(in, params, false, 0).probabilities;
}

inline EvalResult evaluate_nodes(std::span<const double> p, const LabelVector& labels,
                                 std::span<const std::size_t> nodes, double threshold) {
    const auto s = scores_of(p, nodes);
    const auto y = labels_of(labels, nodes);
    return evaluate(s, y, threshold);
}

/// Fraud nodes weighted by (#benign / #fraud) over the train set.
inline NodeWeights class_weights(const LabelVector& labels, std::span<const std::size_t> train) {
    std::size_t pos = 0;
    for (auto v : train) pos += labels[v] == 1;
    const std::size_t neg = train.size() - pos;
    NodeWeights w(labels.size(), 1.0);
    if (pos == 0) return w;
    const double fraud_weight = static_cast<double>(neg) / static_cast<double>(pos);
    for (std::size_t v = 0; v < labels.size(); ++v) {
        if (labels[v] == 1) w[v] = fraud_weight;
    }
    return w;
}

/// Full-graph forward every step; the loss covers a shuffled minibatch of
/// train nodes. Validation runs in inference mode every `eval_every` epochs
/// (and after the last epoch); the checkpoint with the highest validation
/// AUC wins, earlier epochs on ties.
inline TrainResult train(const ModelInputs& in, const LabelVector& labels, const SplitMasks& masks,
                         const TrainConfig& cfg) {
    cfg.validate();
    if (labels.size() != in.num_nodes()) throw InvalidArgument("train: label count mismatch");
    if (masks.train.empty() || masks.val.empty()) throw InvalidArgument("train: empty train or validation split");

    const ModelConfig mcfg = cfg.model(in.features.cols(), in.num_relations());
    TrainResult result;
    ModelParams params = initialize_params(mcfg, derive_seed(cfg.seed, "init"));
    AdamState adam = AdamState::for_params(params);
    const AdamConfig acfg{cfg.lr, cfg.weight_decay};
    const NodeWeights weights = cfg.class_weighting ? class_weights(labels, masks.train) : NodeWeights{};
    const std::size_t batch = cfg.batch_size == kFullBatch ? masks.train.size()
                                                           : std::min(cfg.batch_size, masks.train.size());

    bool have_best = false;
    std::uint64_t step = 0;
    std::optional<EpochReport> last;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        std::vector<std::size_t> order = masks.train;
        if (batch < order.size()) Rng(derive_seed(cfg.seed, "batch", epoch)).shuffle(order);

        double epoch_loss = 0.0;
        for (std::size_t first = 0; first < order.size(); first += batch) {
            const std::span<const std::size_t> chunk(order.data() + first, std::min(batch, order.size() - first));
            ForwardTrace trace = forward_full(in, params, true, derive_seed(cfg.seed, "dropout", step));
            const double loss = bce_loss(trace.probabilities, labels, chunk, weights);
            if (!std::isfinite(loss)) {
                throw TrainingAborted("train: non-finite loss at epoch " + std::to_string(epoch), last);
            }
            epoch_loss += loss;
            ModelParams grads = backward(trace, in, labels, chunk, params, weights);
            adam_step(params, grads, adam, acfg);
            ++step;
        }

        if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
            EpochReport report;
            report.epoch = epoch;
            report.train_loss = epoch_loss;
            report.train_loss_mean = epoch_loss / static_cast<double>(masks.train.size());
            report.val = evaluate_nodes(infer(in, params), labels, masks.val, cfg.threshold);
            report.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            if (!have_best || report.val.auc > result.best_val.auc) {
                have_best = true;
                result.best = params;
                result.best_epoch = epoch;
                result.best_val = report.val;
            }
            result.reports.push_back(report);
            last = report;
        }
    }
    if (!have_best) {
        result.best = params;
        result.best_epoch = 0;
        result.best_val = evaluate_nodes(infer(in, params), labels, masks.val, cfg.threshold);
    }
    return result;
}

// --- gradient verification -----------------------------------------------

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t checked = 0;
};

/// Relative error |a - b| / max(|a|, |b|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-8) noexcept {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares `backward` against central differences on every parameter entry.
/// Dropout masks are held fixed through `dropout_seed`.
inline GradCheckResult gradient_check(const ModelInputs& in, const LabelVector& labels,
                                      std::span<const std::size_t> nodes, ModelParams params,
                                      bool train_mode, std::uint64_t dropout_seed, double step = 1e-5) {
    const ForwardTrace trace = forward_full(in, params, train_mode, dropout_seed);
    const ModelParams grads = backward(trace, in, labels, nodes, params);
    auto loss_at = [&](const ModelParams& p) {
        return bce_loss(forward_full(in, p, train_mode, dropout_seed).probabilities, labels, nodes);
    };

    GradCheckResult result;
    auto targets = detail::tensor_list(params);
    auto analytic = detail::tensor_list(const_cast<ModelParams&>(grads));
    for (std::size_t t = 0; t < targets.size(); ++t) {
        auto values = targets[t].second->values();
        auto expected = analytic[t].second->values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + step;
            const double up = loss_at(params);
            values[i] = saved - step;
            const double down = loss_at(params);
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double err = relative_error(expected[i], numeric);
            ++result.checked;
            if (err > result.max_relative_error || result.worst_parameter.empty()) {
                if (err >= result.max_relative_error) {
                    result.max_relative_error = err;
                    result.worst_parameter = targets[t].first + "[" + std::to_string(i) + "]";
                }
            }
        }
    }
    return result;
}

} // namespace hogrl
