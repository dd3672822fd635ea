#pragma once

#include <cstdint>
#include <vector>

#include "hogrl/model.hpp"
#include "hogrl/random.hpp"
#include "hogrl/training.hpp"

namespace hogrl {

/// Small fixed problem for finite-difference verification of `backward`.
struct GradCheckInstance {
    ModelInputs inputs;
    LabelVector labels;
    std::vector<std::size_t> nodes;
    ModelParams params;
    std::uint64_t dropout_seed = 0;
};

/// n = 8 nodes, two relations, 3 orders, one aggregator layer, hidden width 4.
/// Dropout stays on so that mask reuse is exercised.
inline GradCheckInstance make_gradcheck_instance(std::uint64_t seed = 1, std::size_t n = 8, std::size_t orders = 3,
                                                 std::size_t agg_depth = 1, std::size_t hidden = 4) {
    Rng rng(derive_seed(seed, "gradcheck"));
    const std::size_t input_dim = 3;
    std::vector<RelationGraph> relations;
    for (int r = 0; r < 2; ++r) {
        std::vector<Edge> edges;
        for (std::size_t v = 1; v < n; ++v) edges.emplace_back(v, rng.below(v));  // spanning tree
        for (int extra = 0; extra < 3; ++extra) edges.emplace_back(rng.below(n), rng.below(n));
        relations.push_back(build_graph(edges, n, true));
    }
    MultiRelationGraph graph(std::move(relations), {"a", "b"});

    Matrix x(n, input_dim);
    for (double& v : x.values()) v = rng.normal();

    std::vector<int> y(n);
    for (std::size_t v = 0; v < n; ++v) y[v] = static_cast<int>(v % 2);

    ModelConfig cfg;
    cfg.input_dim = input_dim;
    cfg.hidden_dim = hidden;
    cfg.orders = orders;
    cfg.agg_depth = agg_depth;
    cfg.head_hidden = {hidden};
    cfg.gamma = 0.7;
    cfg.dropout = 0.3;
    cfg.num_relations = 2;

    GradCheckInstance inst;
    inst.inputs = prepare_inputs(graph, std::move(x), HighOrderConfig{orders, PropagationMode::WalkCount, true});
    inst.labels = LabelVector(std::move(y));
    for (std::size_t v = 0; v < n; ++v) inst.nodes.push_back(v);
    inst.params = initialize_params(cfg, derive_seed(seed, "gradcheck-init"));
    // nonzero biases so the gate and head biases are not at a symmetric point
    inst.params.for_each([&](const std::string& name, Matrix& m) {
        if (name.find("gate_b") != std::string::npos || name.find(".b") != std::string::npos) {
            for (double& v : m.values()) v = 0.1 * rng.normal();
        }
    });
    inst.dropout_seed = derive_seed(seed, "gradcheck-dropout");
    return inst;
}

inline GradCheckResult run_gradient_check(const GradCheckInstance& inst, double step = 1e-5) {
    return gradient_check(inst.inputs, inst.labels, inst.nodes, inst.params, true, inst.dropout_seed, step);
}

} // namespace hogrl
