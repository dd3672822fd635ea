#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hogrl/error.hpp"
#include "hogrl/graph.hpp"
#include "hogrl/matrix.hpp"
#include "hogrl/random.hpp"

namespace hogrl {

/// Camouflage graph description: fraud rings whose members only reach each
/// other through chains of `depth` benign intermediaries.
struct CamouflageSpec {
    std::size_t n_benign = 2000;
    std::size_t n_rings = 40;
    std::size_t ring_size = 4;
    std::size_t depth = 3;          // intermediaries per fraud-fraud path
    double benign_density = 4.0;    // expected backbone degree
    std::size_t feature_dim = 16;
    double class_separation = 1.0;  // distance between class means
    double noise_sigma = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_benign < 1 || n_rings < 1 || feature_dim < 1) {
            throw InvalidArgument("CamouflageSpec: counts and feature_dim must be at least 1");
        }
        if (ring_size < 2) throw InvalidArgument("CamouflageSpec: ring_size must be at least 2");
        if (!(benign_density >= 0.0) || !(class_separation >= 0.0) || !(noise_sigma >= 0.0)) {
            throw InvalidArgument("CamouflageSpec: density, separation and noise must be non-negative");
        }
        if (n_benign < 2 && benign_density > 0.0) {
            throw InvalidArgument("CamouflageSpec: a backbone with edges needs at least 2 benign nodes");
        }
    }

    [[nodiscard]] std::size_t num_fraud() const noexcept { return n_rings * ring_size; }
    [[nodiscard]] std::size_t pairs_per_ring() const noexcept { return ring_size * (ring_size - 1) / 2; }
    [[nodiscard]] std::size_t num_intermediaries() const noexcept { return n_rings * pairs_per_ring() * depth; }
    [[nodiscard]] std::size_t num_nodes() const noexcept { return n_benign + num_fraud() + num_intermediaries(); }
};

struct CamouflageGraph {
    MultiRelationGraph graph;
    Matrix features;
    LabelVector labels;
    std::vector<std::vector<std::size_t>> rings;  // fraud node ids per ring
};

/// Analytic expectations the generator guarantees.
struct StructureReport {
    std::size_t fraud_pair_distance = 0;
    std::optional<double> fraud_direct_homophily;  // exact value when fixed by construction
    std::size_t num_nodes = 0;
    std::size_t num_fraud = 0;
    std::size_t num_intermediaries = 0;
    std::size_t backbone_edges = 0;
    std::size_t ring_edges = 0;
};

inline std::size_t backbone_edge_count(const CamouflageSpec& spec) {
    const double target = std::round(static_cast<double>(spec.n_benign) * spec.benign_density / 2.0);
    const double max_edges = static_cast<double>(spec.n_benign) * static_cast<double>(spec.n_benign - 1) / 2.0;
    return static_cast<std::size_t>(std::min(target, max_edges));
}

inline StructureReport describe(const CamouflageSpec& spec) {
    spec.validate();
    StructureReport r;
    r.fraud_pair_distance = spec.depth + 1;
    if (spec.depth >= 1) r.fraud_direct_homophily = 0.0;
    r.num_nodes = spec.num_nodes();
    r.num_fraud = spec.num_fraud();
    r.num_intermediaries = spec.num_intermediaries();
    r.backbone_edges = backbone_edge_count(spec);
    r.ring_edges = spec.n_rings * spec.pairs_per_ring() * (spec.depth + 1);
    return r;
}

/// Node layout: backbone [0, n_benign), then per ring its fraud nodes
/// followed by that ring's intermediaries. Intermediaries are fresh per
/// fraud pair and attach only to their own path, so every fraud pair sits
/// at distance exactly depth + 1.
inline CamouflageGraph generate(const CamouflageSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, "camouflage"));
    const std::size_t n = spec.num_nodes();
    std::vector<Edge> edges;
    std::vector<int> labels(n, 0);

    // benign backbone: uniform random simple graph with the target edge count
    const std::size_t m = backbone_edge_count(spec);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    while (seen.size() < m) {
        std::size_t u = rng.below(spec.n_benign);
        std::size_t v = rng.below(spec.n_benign);
        if (u == v) continue;
        if (u > v) std::swap(u, v);
        if (seen.emplace(u, v).second) edges.emplace_back(u, v);
    }

    CamouflageGraph out;
    std::size_t next = spec.n_benign;
    for (std::size_t ring = 0; ring < spec.n_rings; ++ring) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < spec.ring_size; ++i) {
            labels[next] = 1;
            members.push_back(next++);
        }
        for (std::size_t a = 0; a < members.size(); ++a) {
            for (std::size_t b = a + 1; b < members.size(); ++b) {
                std::size_t prev = members[a];
                for (std::size_t step = 0; step < spec.depth; ++step) {
                    edges.emplace_back(prev, next);
                    prev = next++;
                }
                edges.emplace_back(prev, members[b]);
            }
        }
        out.rings.push_back(std::move(members));
    }

    // features: class means separated along a random unit direction
    std::vector<double> direction(spec.feature_dim);
    double norm = 0.0;
    for (double& x : direction) {
        x = rng.normal();
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : direction) x /= norm;

    Matrix features(n, spec.feature_dim);
    for (std::size_t v = 0; v < n; ++v) {
        const double shift = labels[v] == 1 ? spec.class_separation : 0.0;
        for (std::size_t j = 0; j < spec.feature_dim; ++j) {
            features(v, j) = shift * direction[j] + spec.noise_sigma * rng.normal();
        }
    }

    out.graph = MultiRelationGraph({build_graph(edges, n, true)}, {"camouflage"});
    out.features = std::move(features);
    out.labels = LabelVector(std::move(labels));
    return out;
}

} // namespace hogrl
