// Command-line front end: training, evaluation, homophily analysis,
// propagation export, synthetic data generation, gradient checks and
// embedding export.
//
// Exit codes: 0 success, 1 usage or parse error, 2 numerical failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hogrl/hogrl.hpp"

namespace fs = std::filesystem;
using namespace hogrl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

MultiRelationGraph load_graph(const std::string& path) {
    auto f = io::open_input(path);
    return io::read_graph(f, path);
}

Matrix load_matrix(const std::string& path) {
    auto f = io::open_input(path);
    return io::read_matrix(f, path);
}

LabelVector load_labels(const std::string& path, std::size_t n) {
    auto f = io::open_input(path);
    return io::read_labels(f, n, path);
}

io::Checkpoint load_checkpoint(const std::string& path) {
    auto f = io::open_input(path);
    return io::read_checkpoint(f, path);
}

void write_file(const fs::path& path, const std::string& text) {
    auto f = io::open_output(path.string());
    f << text;
    if (!f) throw Error(path.string() + ": write failed");
}

std::string format_eval(const EvalResult& r) {
    std::ostringstream s;
    s << "auc=" << io::format_double(r.auc) << " f1_macro=" << io::format_double(r.f1_macro)
      << " gmean=" << io::format_double(r.gmean) << " threshold=" << io::format_double(r.threshold)
      << " tp=" << r.counts.tp << " fp=" << r.counts.fp << " tn=" << r.counts.tn << " fn=" << r.counts.fn;
    return s.str();
}

std::string format_report(const EpochReport& r) {
    std::ostringstream s;
    s << "epoch=" << r.epoch << " train_loss=" << io::format_double(r.train_loss)
      << " train_loss_mean=" << io::format_double(r.train_loss_mean) << " val_auc=" << io::format_double(r.val.auc)
      << " val_f1_macro=" << io::format_double(r.val.f1_macro) << " val_gmean=" << io::format_double(r.val.gmean)
      << " wall_seconds=" << io::format_double(r.wall_seconds);
    return s.str();
}

std::string join_counts(const Histogram& h) {
    std::string out;
    for (std::size_t i = 0; i < h.counts.size(); ++i) out += (i ? " " : "") + std::to_string(h.counts[i]);
    return out;
}

void check_shapes(const MultiRelationGraph& g, const Matrix& x) {
    if (x.rows() != g.num_nodes()) {
        throw InvalidArgument("features have " + std::to_string(x.rows()) + " rows but the graph has " +
                              std::to_string(g.num_nodes()) + " nodes");
    }
}

std::vector<std::size_t> split_nodes(const SplitMasks& masks, const LabelVector& labels, const std::string& which) {
    if (which == "train") return masks.train;
    if (which == "val") return masks.val;
    if (which == "test") return masks.test;
    if (which == "all") return labels.labeled_nodes();
    throw InvalidArgument("unknown split '" + which + "' (expected train|val|test|all)");
}

// --- subcommands ---------------------------------------------------------

struct TrainArgs {
    std::string graph, features, labels, config, out;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

int run_train(const TrainArgs& a) {
    TrainConfig cfg;
    if (!a.config.empty()) {
        auto f = io::open_input(a.config);
        cfg = io::read_train_config(f, a.config);
    }
    for (const auto& kv : a.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got '" + kv + "'");
        io::apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (a.seed_given) cfg.seed = a.seed;
    cfg.validate();

    auto graph = load_graph(a.graph);
    auto x = load_matrix(a.features);
    check_shapes(graph, x);
    auto labels = load_labels(a.labels, graph.num_nodes());
    const auto masks = stratified_split(labels, {0.4, 0.4, 0.2}, cfg.seed);
    const auto input_dim = x.cols();
    const auto inputs = prepare_inputs(graph, std::move(x), cfg.high_order(), cfg.expert_branch);
    for (const auto& prop : inputs.propagated) {
        for (const auto& w : prop.warnings) std::cerr << "warning: " << w << '\n';
    }

    fs::create_directories(a.out);
    const fs::path out(a.out);
    std::ostringstream log;
    TrainResult result;
    try {
        result = train(inputs, labels, masks, cfg);
    } catch (const TrainingAborted& e) {
        if (e.last_report) log << format_report(*e.last_report) << '\n';
        write_file(out / "epochs.log", log.str());
        throw;
    }
    for (const auto& r : result.reports) log << format_report(r) << '\n';
    write_file(out / "epochs.log", log.str());

    io::Checkpoint ck{cfg, input_dim, graph.names(), result.best_epoch, result.best_val, result.best};
    std::ostringstream ckpt;
    io::write_checkpoint(ckpt, ck);
    write_file(out / "checkpoint.txt", ckpt.str());

    const auto test = evaluate_nodes(infer(inputs, result.best), labels, masks.test, cfg.threshold);
    write_file(out / "test_metrics.txt", format_eval(test) + '\n');
    std::cout << "best_epoch=" << result.best_epoch << " val " << format_eval(result.best_val) << '\n';
    std::cout << "test " << format_eval(test) << '\n';
    return kExitOk;
}

struct EvalArgs {
    std::string checkpoint, graph, features, labels, split = "test";
    double threshold = -1.0;
};

int run_eval(const EvalArgs& a) {
    const auto ck = load_checkpoint(a.checkpoint);
    auto graph = load_graph(a.graph);
    auto x = load_matrix(a.features);
    check_shapes(graph, x);
    if (x.cols() != ck.input_dim) throw InvalidArgument("feature width does not match the checkpoint");
    if (graph.num_relations() != ck.relation_names.size()) throw InvalidArgument("relation count does not match the checkpoint");
    auto labels = load_labels(a.labels, graph.num_nodes());
    const auto masks = stratified_split(labels, {0.4, 0.4, 0.2}, ck.config.seed);
    const auto nodes = split_nodes(masks, labels, a.split);
    const auto inputs = prepare_inputs(graph, std::move(x), ck.config.high_order(), ck.config.expert_branch);
    const double threshold = a.threshold >= 0.0 ? a.threshold : ck.config.threshold;
    std::cout << format_eval(evaluate_nodes(infer(inputs, ck.params), labels, nodes, threshold)) << '\n';
    return kExitOk;
}

struct HomophilyArgs {
    std::string graph, labels;
    std::size_t layers = 0;
    std::size_t bins = 10;
};

int run_homophily(const HomophilyArgs& a) {
    auto graph = load_graph(a.graph);
    auto labels = load_labels(a.labels, graph.num_nodes());
    for (std::size_t r = 0; r < graph.num_relations(); ++r) {
        const auto& g = graph.relation(r);
        const auto report = homophily_distribution(g, labels, a.bins);
        std::cout << "relation " << graph.name(r) << '\n';
        for (int c : {1, 0}) {
            std::cout << "class " << c << " defined " << report.per_class[c].total() << " undefined "
                      << report.undefined[c] << " mean " << io::format_double(report.mean[c]) << '\n';
            std::cout << "hist " << c << ' ' << join_counts(report.per_class[c]) << '\n';
        }
        if (a.layers == 0) continue;
        const auto layered = layerwise_homophily(g, labels, a.layers, a.bins);
        for (std::size_t l = 0; l < layered.layers.size(); ++l) {
            const auto& layer = layered.layers[l];
            std::cout << "layer " << l + 1 << " mixed_mean " << io::format_double(layer.mixed_mean())
                      << " decoupled_mean " << io::format_double(layer.decoupled_mean()) << " mixed_undefined "
                      << layer.mixed_undefined << " decoupled_undefined " << layer.decoupled_undefined << '\n';
            std::cout << "layer_hist " << l + 1 << " mixed " << join_counts(layer.mixed_hist) << '\n';
            std::cout << "layer_hist " << l + 1 << " decoupled " << join_counts(layer.decoupled_hist) << '\n';
        }
    }
    return kExitOk;
}

struct PropagateArgs {
    std::string graph, features, mode = "walk", out;
    std::size_t layers = 7;
    bool raw = false;
};

int run_propagate(const PropagateArgs& a) {
    auto graph = load_graph(a.graph);
    auto x = load_matrix(a.features);
    check_shapes(graph, x);
    const HighOrderConfig cfg{a.layers, parse_propagation_mode(a.mode), !a.raw};
    fs::create_directories(a.out);
    for (std::size_t r = 0; r < graph.num_relations(); ++r) {
        const auto prop = propagate_features(graph.relation(r), x, cfg);
        for (const auto& w : prop.warnings) std::cerr << "warning: " << graph.name(r) << ": " << w << '\n';
        for (std::size_t l = 1; l <= prop.num_orders(); ++l) {
            std::ostringstream s;
            io::write_matrix(s, prop.order(l));
            write_file(fs::path(a.out) / (graph.name(r) + ".order" + std::to_string(l) + ".txt"), s.str());
        }
    }
    return kExitOk;
}

int run_gen(const std::string& spec_path, const std::string& out_dir) {
    auto f = io::open_input(spec_path);
    const auto spec = io::read_camouflage_spec(f, spec_path);
    const auto data = generate(spec);
    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    std::ostringstream g, x, y;
    io::write_graph(g, data.graph);
    io::write_matrix(x, data.features);
    io::write_labels(y, data.labels);
    write_file(out / "graph.txt", g.str());
    write_file(out / "features.txt", x.str());
    write_file(out / "labels.txt", y.str());

    const auto d = describe(spec);
    std::cout << "nodes " << d.num_nodes << " fraud " << d.num_fraud << " intermediaries " << d.num_intermediaries
              << " backbone_edges " << d.backbone_edges << " ring_edges " << d.ring_edges << '\n';
    std::cout << "fraud_pair_distance " << d.fraud_pair_distance << '\n';
    std::cout << "fraud_direct_homophily "
              << (d.fraud_direct_homophily ? io::format_double(*d.fraud_direct_homophily) : std::string("positive"))
              << '\n';
    return kExitOk;
}

int run_gradcheck(const std::string& size, std::uint64_t seed) {
    GradCheckInstance inst;
    if (size == "small") inst = make_gradcheck_instance(seed);
    else if (size == "medium") inst = make_gradcheck_instance(seed, 16, 4, 2, 6);
    else throw InvalidArgument("unknown gradcheck size '" + size + "' (expected small|medium)");
    const auto r = run_gradient_check(inst);
    constexpr double tolerance = 1e-5;
    std::cout << "checked " << r.checked << " max_relative_error " << io::format_double(r.max_relative_error)
              << " worst " << r.worst_parameter << '\n';
    if (r.max_relative_error > tolerance) {
        std::cerr << "error: gradient check failed, relative error above " << tolerance << '\n';
        return kExitNumerical;
    }
    return kExitOk;
}

struct EmbedArgs {
    std::string checkpoint, graph, features, labels, out;
};

int run_embed(const EmbedArgs& a) {
    const auto ck = load_checkpoint(a.checkpoint);
    auto graph = load_graph(a.graph);
    auto x = load_matrix(a.features);
    check_shapes(graph, x);
    if (x.cols() != ck.input_dim) throw InvalidArgument("feature width does not match the checkpoint");
    const auto inputs = prepare_inputs(graph, std::move(x), ck.config.high_order(), ck.config.expert_branch);
    const auto trace = forward_full(inputs, ck.params, false, 0);
    std::ostringstream s;
    io::write_matrix(s, trace.embedding);
    write_file(a.out, s.str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"HOGRL fraud-detection engine"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint, epoch log and test metrics");
    train_cmd->add_option("--graph", train_args.graph, "graph file")->required();
    train_cmd->add_option("--features", train_args.features, "feature matrix file")->required();
    train_cmd->add_option("--labels", train_args.labels, "label file")->required();
    train_cmd->add_option("--config", train_args.config, "key = value config file");
    train_cmd->add_option("--set", train_args.overrides, "override a config key (key=value), repeatable");
    auto* seed_opt = train_cmd->add_option("--seed", train_args.seed, "random seed");
    train_cmd->add_option("--out", train_args.out, "output directory")->required();

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    eval_cmd->add_option("--checkpoint", eval_args.checkpoint)->required();
    eval_cmd->add_option("--graph", eval_args.graph)->required();
    eval_cmd->add_option("--features", eval_args.features)->required();
    eval_cmd->add_option("--labels", eval_args.labels)->required();
    eval_cmd->add_option("--split", eval_args.split, "train|val|test|all");
    eval_cmd->add_option("--threshold", eval_args.threshold, "classification threshold (default: checkpoint's)");

    HomophilyArgs hom_args;
    auto* hom_cmd = app.add_subcommand("homophily", "node homophily histograms and layerwise curves");
    hom_cmd->add_option("--graph", hom_args.graph)->required();
    hom_cmd->add_option("--labels", hom_args.labels)->required();
    hom_cmd->add_option("--layers", hom_args.layers, "also report mixed/decoupled curves up to this order");
    hom_cmd->add_option("--bins", hom_args.bins, "histogram bins")->check(CLI::Range(2, 1000000));

    PropagateArgs prop_args;
    auto* prop_cmd = app.add_subcommand("propagate", "write the per-order propagated feature matrices");
    prop_cmd->add_option("--graph", prop_args.graph)->required();
    prop_cmd->add_option("--features", prop_args.features)->required();
    prop_cmd->add_option("--layers", prop_args.layers)->required()->check(CLI::Range(1, 1000000));
    prop_cmd->add_option("--mode", prop_args.mode, "walk|hop");
    prop_cmd->add_flag("--raw-adjacency", prop_args.raw, "power the raw adjacency instead of the row-normalized one");
    prop_cmd->add_option("--out", prop_args.out)->required();

    std::string spec_path, gen_out;
    auto* gen_cmd = app.add_subcommand("gen", "generate a camouflage graph");
    gen_cmd->add_option("--spec", spec_path)->required();
    gen_cmd->add_option("--out", gen_out)->required();

    std::string gc_size = "small";
    std::uint64_t gc_seed = 1;
    auto* gc_cmd = app.add_subcommand("gradcheck", "compare analytic gradients with central differences");
    gc_cmd->add_option("--size", gc_size, "small|medium");
    gc_cmd->add_option("--seed", gc_seed);

    EmbedArgs embed_args;
    auto* embed_cmd = app.add_subcommand("embed", "write the fused node embeddings as a matrix file");
    embed_cmd->add_option("--checkpoint", embed_args.checkpoint)->required();
    embed_cmd->add_option("--graph", embed_args.graph)->required();
    embed_cmd->add_option("--features", embed_args.features)->required();
    embed_cmd->add_option("--labels", embed_args.labels, "accepted for symmetry with eval; unused");
    embed_cmd->add_option("--out", embed_args.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*train_cmd) {
            train_args.seed_given = seed_opt->count() > 0;
            return run_train(train_args);
        }
        if (*eval_cmd) return run_eval(eval_args);
        if (*hom_cmd) return run_homophily(hom_args);
        if (*prop_cmd) return run_propagate(prop_args);
        if (*gen_cmd) return run_gen(spec_path, gen_out);
        if (*gc_cmd) return run_gradcheck(gc_size, gc_seed);
        if (*embed_cmd) return run_embed(embed_args);
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
