#include <gtest/gtest.h>

#include "hogrl/highorder.hpp"
#include "hogrl/synth.hpp"
#include "test_support.hpp"

namespace hogrl {
namespace {

CamouflageSpec small_spec(std::size_t depth, std::size_t ring_size = 4, std::uint64_t seed = 0) {
    CamouflageSpec s;
    s.n_benign = 300;
    s.n_rings = 6;
    s.ring_size = ring_size;
    s.depth = depth;
    s.feature_dim = 5;
    s.seed = seed;
    return s;
}

/// Plain BFS distances from one source.
std::vector<std::size_t> bfs(const RelationGraph& g, std::size_t src) {
    std::vector<std::size_t> d(g.num_nodes(), testing::kUnreachable);
    std::vector<std::size_t> queue{src};
    d[src] = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const auto u = queue[head];
        for (auto w : g.neighbors(u))
            if (d[w] == testing::kUnreachable) {
                d[w] = d[u] + 1;
                queue.push_back(w);
            }
    }
    return d;
}

TEST(Generate, LayoutAndCounts) {
    const auto spec = small_spec(2);
    const auto data = generate(spec);
    const auto report = describe(spec);
    EXPECT_EQ(data.graph.num_relations(), 1u);
    EXPECT_EQ(data.graph.num_nodes(), report.num_nodes);
    EXPECT_EQ(data.labels.count(1), report.num_fraud);
    EXPECT_EQ(data.labels.count(0), spec.n_benign + report.num_intermediaries);
    EXPECT_EQ(data.graph.relation(0).num_entries(), 2 * (report.backbone_edges + report.ring_edges));
    EXPECT_EQ(data.features.rows(), report.num_nodes);
    EXPECT_EQ(data.features.cols(), 5u);
    ASSERT_EQ(data.rings.size(), 6u);
    for (const auto& ring : data.rings) EXPECT_EQ(ring.size(), 4u);
}

TEST(Generate, DepthOneRingOfTwoHasZeroFraudHomophily) {
    const auto data = generate(small_spec(1, 2));
    const auto& g = data.graph.relation(0);
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
        if (data.labels[v] == 1) {
            EXPECT_EQ(*node_homophily(g, data.labels, v), 0.0);
        }
    }
}

TEST(Generate, DepthZeroConnectsRingsDirectly) {
    const auto data = generate(small_spec(0));
    const auto& g = data.graph.relation(0);
    for (const auto& ring : data.rings)
        for (auto v : ring) EXPECT_GT(*node_homophily(g, data.labels, v), 0.0);
}

TEST(Generate, FraudPairsAtExactDistance) {
    for (std::size_t depth : {0u, 1u, 2u, 3u, 4u}) {
        const auto data = generate(small_spec(depth, 3, depth));
        const auto& g = data.graph.relation(0);
        for (const auto& ring : data.rings) {
            const auto d = bfs(g, ring[0]);
            for (std::size_t i = 1; i < ring.size(); ++i) EXPECT_EQ(d[ring[i]], depth + 1);
        }
    }
}

TEST(Generate, HopRingContainsRingPartners) {
    const auto data = generate(small_spec(2));
    const auto rings = hop_rings(data.graph.relation(0), 3);
    for (const auto& ring : data.rings)
        for (auto v : ring) {
            const auto& members = rings.members(3, v);
            for (auto u : ring) EXPECT_TRUE(std::binary_search(members.begin(), members.end(), u));
        }
}

TEST(Generate, DecoupledBeatsMixedOnEveryInstance) {
    for (std::uint64_t seed = 0; seed < 5; ++seed)
        for (std::size_t depth : {1u, 2u, 3u}) {
            const auto data = generate(small_spec(depth, 3, seed));
            const auto report = layerwise_homophily(data.graph.relation(0), data.labels, depth + 1);
            const auto& layer = report.layers[depth];
            EXPECT_GT(layer.decoupled_mean(), layer.mixed_mean()) << "seed " << seed << " depth " << depth;
        }
}

TEST(Generate, DefaultSpecHomophilyPattern) {
    const CamouflageSpec spec;
    const auto data = generate(spec);
    const auto r = homophily_distribution(data.graph.relation(0), data.labels, 10);
    EXPECT_EQ(r.per_class[1].counts[0], spec.num_fraud());
    EXPECT_EQ(r.mean[1], 0.0);
    EXPECT_GE(r.mean[0], 0.8);
}

TEST(Generate, FeatureSeparationAlongDirection) {
    auto spec = small_spec(1);
    spec.noise_sigma = 0.0;
    spec.class_separation = 2.5;
    const auto data = generate(spec);
    for (std::size_t v = 0; v < data.features.rows(); ++v) {
        double norm = 0.0;
        for (double x : data.features.row(v)) norm += x * x;
        EXPECT_NEAR(std::sqrt(norm), data.labels[v] == 1 ? 2.5 : 0.0, 1e-12);
    }
}

TEST(Generate, DeterministicUnderSeed) {
    const auto a = generate(small_spec(3, 4, 9));
    const auto b = generate(small_spec(3, 4, 9));
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.graph.relation(0).columns().size(), b.graph.relation(0).columns().size());
    EXPECT_TRUE(std::equal(a.graph.relation(0).columns().begin(), a.graph.relation(0).columns().end(),
                           b.graph.relation(0).columns().begin()));
    EXPECT_NE(generate(small_spec(3, 4, 10)).features, a.features);
}

TEST(Describe, DistanceExamples) {
    EXPECT_EQ(describe(small_spec(1)).fraud_pair_distance, 2u);
    EXPECT_EQ(describe(small_spec(4)).fraud_pair_distance, 5u);
    EXPECT_EQ(describe(small_spec(0)).fraud_pair_distance, 1u);
    EXPECT_FALSE(describe(small_spec(0)).fraud_direct_homophily.has_value());
    EXPECT_EQ(*describe(small_spec(2)).fraud_direct_homophily, 0.0);
}

TEST(Describe, InfeasibleSpecsRejected) {
    EXPECT_THROW(generate(small_spec(2, 1)), InvalidArgument);
    auto s = small_spec(2);
    s.n_rings = 0;
    EXPECT_THROW(describe(s), InvalidArgument);
    s = small_spec(2);
    s.noise_sigma = -1.0;
    EXPECT_THROW(generate(s), InvalidArgument);
}

} // namespace
} // namespace hogrl
