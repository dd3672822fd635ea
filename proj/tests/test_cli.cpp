#include <gtest/gtest.h>

#include "cli_support.hpp"
#include "hogrl/io.hpp"
#include "test_support.hpp"

namespace hogrl {
namespace {

using testing::run_cli;
using testing::ScratchDir;
using testing::slurp;

constexpr const char* kToySpec =
    "n_benign = 200\n"
    "n_rings = 10\n"
    "ring_size = 3\n"
    "depth = 1\n"
    "feature_dim = 4\n"
    "class_separation = 6\n"
    "noise_sigma = 0.3\n"
    "seed = 3\n";

constexpr const char* kToyConfig =
    "epochs = 60\n"
    "eval_every = 10\n"
    "batch_size = full\n"
    "layers = 3\n"
    "hidden = 8\n"
    "head_hidden = 8\n";

class CliTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        scratch_ = new ScratchDir("cli");
        scratch_->write("spec.txt", kToySpec);
        scratch_->write("train.cfg", kToyConfig);
        const auto gen = run_cli("gen --spec " + (*scratch_ / "spec.txt") + " --out " + (*scratch_ / "data"), *scratch_);
        ASSERT_EQ(gen.exit_code, 0) << gen.err;
    }
    static void TearDownTestSuite() {
        delete scratch_;
        scratch_ = nullptr;
    }

    static std::string data(const std::string& file) { return *scratch_ / ("data/" + file); }
    static std::string inputs() {
        return " --graph " + data("graph.txt") + " --features " + data("features.txt") + " --labels " + data("labels.txt");
    }

    static ScratchDir* scratch_;
};

ScratchDir* CliTest::scratch_ = nullptr;

TEST_F(CliTest, GenReportsStructure) {
    const auto r = run_cli("gen --spec " + (*scratch_ / "spec.txt") + " --out " + (*scratch_ / "gen2"), *scratch_);
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_NE(r.out.find("fraud_pair_distance 2"), std::string::npos);
    EXPECT_NE(r.out.find("fraud_direct_homophily 0"), std::string::npos);
    EXPECT_EQ(slurp(*scratch_ / "gen2/graph.txt"), slurp(data("graph.txt")));
}

TEST_F(CliTest, TrainWritesArtifactsAndEvalReproducesTestMetrics) {
    const auto out = *scratch_ / "run";
    const auto r = run_cli("train" + inputs() + " --config " + (*scratch_ / "train.cfg") + " --seed 2 --out " + out,
                           *scratch_);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    for (const char* f : {"checkpoint.txt", "epochs.log", "test_metrics.txt"})
        EXPECT_TRUE(testing::fs::exists(testing::fs::path(out) / f)) << f;
    EXPECT_NE(slurp(out + "/epochs.log").find("epoch=60 "), std::string::npos);
    EXPECT_NE(slurp(out + "/checkpoint.txt").find("config seed 2\n"), std::string::npos);

    const auto e = run_cli("eval --checkpoint " + out + "/checkpoint.txt" + inputs() + " --split test", *scratch_);
    ASSERT_EQ(e.exit_code, 0) << e.err;
    EXPECT_EQ(e.out, slurp(out + "/test_metrics.txt"));
    EXPECT_EQ(e.out.rfind("auc=1 ", 0), 0u) << e.out;
}

TEST_F(CliTest, SetOverridesConfig) {
    const auto out = *scratch_ / "run-set";
    const auto r = run_cli("train" + inputs() + " --config " + (*scratch_ / "train.cfg") +
                               " --set epochs=3 --set mode=hop --out " + out,
                           *scratch_);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto ck = slurp(out + "/checkpoint.txt");
    EXPECT_NE(ck.find("config epochs 3\n"), std::string::npos);
    EXPECT_NE(ck.find("config mode hop\n"), std::string::npos);
}

TEST_F(CliTest, MalformedGraphHeaderNamesLine) {
    scratch_->write("bad_graph.txt", "HOGRL-GRAPH 1\nnodes 3 relations 1\nrelation a 1\n0 x\n");
    const auto r = run_cli("train --graph " + (*scratch_ / "bad_graph.txt") + " --features " + data("features.txt") +
                               " --labels " + data("labels.txt") + " --out " + (*scratch_ / "never"),
                           *scratch_);
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find("bad_graph.txt:4:"), std::string::npos) << r.err;
}

TEST_F(CliTest, MalformedConfigNamesLine) {
    scratch_->write("bad.cfg", "epochs = 5\nlr = fast\n");
    const auto r = run_cli("train" + inputs() + " --config " + (*scratch_ / "bad.cfg") + " --out " + (*scratch_ / "never"),
                           *scratch_);
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find("bad.cfg:2:"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingFileAndUsageErrors) {
    const auto missing = run_cli("eval --checkpoint " + (*scratch_ / "nope.txt") + inputs(), *scratch_);
    EXPECT_EQ(missing.exit_code, 1);
    EXPECT_NE(missing.err.find("nope.txt"), std::string::npos);
    EXPECT_EQ(run_cli("train --graph x", *scratch_).exit_code, 1);
    EXPECT_EQ(run_cli("frobnicate", *scratch_).exit_code, 1);
}

TEST_F(CliTest, HomophilyCliqueAndCamouflage) {
    scratch_->write("clique.txt", "HOGRL-GRAPH 1\nnodes 3 relations 1\nrelation k 3\n0 1\n1 2\n0 2\n");
    scratch_->write("clique_labels.txt", "0 1\n1 1\n2 1\n");
    const auto c = run_cli("homophily --graph " + (*scratch_ / "clique.txt") + " --labels " +
                               (*scratch_ / "clique_labels.txt") + " --bins 4",
                           *scratch_);
    ASSERT_EQ(c.exit_code, 0) << c.err;
    EXPECT_NE(c.out.find("hist 1 0 0 0 3\n"), std::string::npos) << c.out;

    const auto g = run_cli("homophily --graph " + data("graph.txt") + " --labels " + data("labels.txt") + " --layers 1",
                           *scratch_);
    ASSERT_EQ(g.exit_code, 0) << g.err;
    EXPECT_NE(g.out.find("hist 1 30 0 0 0 0 0 0 0 0 0\n"), std::string::npos) << g.out;
    // with one layer both curves read the same neighborhood
    std::istringstream lines(g.out);
    std::string mixed, decoupled;
    for (std::string line; std::getline(lines, line);) {
        if (line.rfind("layer_hist 1 mixed ", 0) == 0) mixed = line.substr(19);
        if (line.rfind("layer_hist 1 decoupled ", 0) == 0) decoupled = line.substr(23);
    }
    EXPECT_FALSE(mixed.empty());
    EXPECT_EQ(mixed, decoupled);
}

TEST_F(CliTest, PropagateOrderOneAndOnesProbe) {
    scratch_->write("path.txt", "HOGRL-GRAPH 1\nnodes 3 relations 1\nrelation p 2\n0 1\n1 2\n");
    scratch_->write("x.txt", "HOGRL-MATRIX 1\n3 2\n1 1\n2 1\n4 1\n");
    const auto r = run_cli("propagate --graph " + (*scratch_ / "path.txt") + " --features " + (*scratch_ / "x.txt") +
                               " --layers 3 --mode walk --out " + (*scratch_ / "prop"),
                           *scratch_);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    std::istringstream in(slurp(*scratch_ / "prop/p.order1.txt"));
    const auto m = io::read_matrix(in);
    // row-normalized path: node 0 -> x1, node 1 -> (x0 + x2) / 2, node 2 -> x1
    EXPECT_EQ(m, Matrix(3, 2, std::vector<double>{2, 1, 2.5, 1, 2, 1}));
    for (int l = 1; l <= 3; ++l) {
        std::istringstream f(slurp(*scratch_ / ("prop/p.order" + std::to_string(l) + ".txt")));
        const auto ml = io::read_matrix(f);
        for (std::size_t v = 0; v < 3; ++v) EXPECT_NEAR(ml(v, 1), 1.0, 1e-12);
    }

    const auto hop = run_cli("propagate --graph " + (*scratch_ / "path.txt") + " --features " + (*scratch_ / "x.txt") +
                                 " --layers 3 --mode hop --out " + (*scratch_ / "prop-hop"),
                             *scratch_);
    EXPECT_EQ(hop.exit_code, 0);
    EXPECT_NE(hop.err.find("warning: p: order 3"), std::string::npos) << hop.err;
}

TEST_F(CliTest, GradcheckPasses) {
    const auto r = run_cli("gradcheck --size small", *scratch_);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.out.find("max_relative_error"), std::string::npos);
}

TEST_F(CliTest, EmbedHasRelationTimesHiddenColumns) {
    const auto out = *scratch_ / "run-embed";
    ASSERT_EQ(run_cli("train" + inputs() + " --config " + (*scratch_ / "train.cfg") + " --set epochs=2 --out " + out,
                      *scratch_)
                  .exit_code,
              0);
    const auto r = run_cli("embed --checkpoint " + out + "/checkpoint.txt --graph " + data("graph.txt") +
                               " --features " + data("features.txt") + " --out " + out + "/z.txt",
                           *scratch_);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    std::istringstream in(slurp(out + "/z.txt"));
    const auto z = io::read_matrix(in);
    EXPECT_EQ(z.cols(), 8u);
    EXPECT_EQ(z.rows(), 200u + 30u + 30u);
}

} // namespace
} // namespace hogrl
