#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hogrl/error.hpp"
#include "hogrl/graph.hpp"
#include "hogrl/matrix.hpp"
#include "hogrl/model.hpp"
#include "hogrl/synth.hpp"
#include "hogrl/training.hpp"

namespace hogrl::io {

// Text formats. Reals are written in shortest round-trip form, so
// write -> read -> write reproduces the bytes exactly.

inline std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw Error("format_double: conversion failed");
    return {buf, end};
}

/// Reads a stream line by line, tracking 1-based line numbers for diagnostics.
class LineReader {
public:
    LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    /// Next non-blank line split on whitespace; false at end of input.
    bool next(std::vector<std::string>& tokens) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            tokens.clear();
            std::istringstream ss(line);
            for (std::string t; ss >> t;) tokens.push_back(t);
            if (!tokens.empty()) return true;
        }
        return false;
    }

    std::vector<std::string> expect(const char* what) {
        std::vector<std::string> tokens;
        if (!next(tokens)) fail(std::string("unexpected end of file, expected ") + what);
        return tokens;
    }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, line_no_, what); }

    [[nodiscard]] std::size_t line() const noexcept { return line_no_; }
    [[nodiscard]] const std::string& source() const noexcept { return source_; }

    std::size_t to_size(const std::string& s) const {
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size()) fail("expected a non-negative integer, got '" + s + "'");
        return v;
    }

    double to_double(const std::string& s) const {
        double v = 0.0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size()) fail("expected a real number, got '" + s + "'");
        return v;
    }

    void expect_header(const std::vector<std::string>& tokens, std::string_view magic) const {
        if (tokens.size() != 2 || tokens[0] != magic || tokens[1] != "1") {
            fail("bad header, expected '" + std::string(magic) + " 1'");
        }
    }

private:
    std::istream& in_;
    std::string source_;
    std::size_t line_no_ = 0;
};

inline std::ifstream open_input(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError(path, 0, "cannot open file");
    return f;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(path + ": cannot open for writing");
    return f;
}

// --- matrices ------------------------------------------------------------

inline void write_matrix(std::ostream& out, const Matrix& m) {
    out << "HOGRL-MATRIX 1\n" << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << ' ';
            out << format_double(row[c]);
        }
        out << '\n';
    }
}

inline Matrix read_matrix(std::istream& in, const std::string& source = "<matrix>") {
    LineReader reader(in, source);
    reader.expect_header(reader.expect("header"), "HOGRL-MATRIX");
    auto dims = reader.expect("dimensions");
    if (dims.size() != 2) reader.fail("expected '<rows> <cols>'");
    const std::size_t rows = reader.to_size(dims[0]);
    const std::size_t cols = reader.to_size(dims[1]);
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        auto tokens = reader.expect("matrix row");
        if (tokens.size() != cols) {
            reader.fail("row has " + std::to_string(tokens.size()) + " values, expected " + std::to_string(cols));
        }
        for (std::size_t c = 0; c < cols; ++c) {
            m(r, c) = reader.to_double(tokens[c]);
            if (!std::isfinite(m(r, c))) reader.fail("non-finite value");
        }
    }
    std::vector<std::string> extra;
    if (reader.next(extra)) reader.fail("trailing data after " + std::to_string(rows) + " rows");
    return m;
}

// --- graphs --------------------------------------------------------------

/// Undirected edges (u < v) of a symmetric relation, in CSR order.
inline std::vector<Edge> undirected_edges(const RelationGraph& g) {
    std::vector<Edge> edges;
    for (std::size_t u = 0; u < g.num_nodes(); ++u) {
        for (NodeId v : g.neighbors(u)) {
            if (u < v) edges.emplace_back(u, v);
        }
    }
    return edges;
}

inline void write_graph(std::ostream& out, const MultiRelationGraph& g) {
    out << "HOGRL-GRAPH 1\n";
    out << "nodes " << g.num_nodes() << " relations " << g.num_relations() << '\n';
    for (std::size_t r = 0; r < g.num_relations(); ++r) {
        if (!g.relation(r).is_symmetric()) throw InvalidArgument("write_graph: relation " + g.name(r) + " is not symmetric");
        const auto edges = undirected_edges(g.relation(r));
        out << "relation " << g.name(r) << ' ' << edges.size() << '\n';
        for (const auto& [u, v] : edges) out << u << ' ' << v << '\n';
    }
}

inline MultiRelationGraph read_graph(std::istream& in, const std::string& source = "<graph>") {
    LineReader reader(in, source);
    reader.expect_header(reader.expect("header"), "HOGRL-GRAPH");
    auto sizes = reader.expect("'nodes <n> relations <R>'");
    if (sizes.size() != 4 || sizes[0] != "nodes" || sizes[2] != "relations") reader.fail("expected 'nodes <n> relations <R>'");
    const std::size_t n = reader.to_size(sizes[1]);
    const std::size_t relations = reader.to_size(sizes[3]);
    if (relations == 0) reader.fail("at least one relation is required");

    std::vector<RelationGraph> graphs;
    std::vector<std::string> names;
    for (std::size_t r = 0; r < relations; ++r) {
        auto head = reader.expect("'relation <name> <edge_count>'");
        if (head.size() != 3 || head[0] != "relation") reader.fail("expected 'relation <name> <edge_count>'");
        const std::size_t count = reader.to_size(head[2]);
        std::vector<Edge> edges;
        edges.reserve(count);
        for (std::size_t e = 0; e < count; ++e) {
            auto tokens = reader.expect("edge line");
            if (tokens.size() != 2) reader.fail("expected '<u> <v>'");
            const std::size_t u = reader.to_size(tokens[0]);
            const std::size_t v = reader.to_size(tokens[1]);
            if (u >= n || v >= n) reader.fail("edge (" + tokens[0] + ", " + tokens[1] + ") out of range for " + std::to_string(n) + " nodes");
            edges.emplace_back(u, v);
        }
        graphs.push_back(build_graph(edges, n, true));
        names.push_back(head[1]);
    }
    std::vector<std::string> extra;
    if (reader.next(extra)) reader.fail("trailing data after the last relation");
    return {std::move(graphs), std::move(names)};
}

// --- labels --------------------------------------------------------------

inline void write_labels(std::ostream& out, const LabelVector& labels) {
    for (std::size_t v = 0; v < labels.size(); ++v) {
        if (labels.labeled(v)) out << v << ' ' << labels[v] << '\n';
    }
}

inline LabelVector read_labels(std::istream& in, std::size_t n, const std::string& source = "<labels>") {
    LineReader reader(in, source);
    std::vector<int> values(n, kUnknownLabel);
    std::vector<std::string> tokens;
    while (reader.next(tokens)) {
        if (tokens.size() != 2) reader.fail("expected '<node> <label>'");
        const std::size_t v = reader.to_size(tokens[0]);
        if (v >= n) reader.fail("node " + tokens[0] + " out of range for " + std::to_string(n) + " nodes");
        if (tokens[1] != "0" && tokens[1] != "1") reader.fail("label must be 0 or 1, got '" + tokens[1] + "'");
        if (values[v] != kUnknownLabel) reader.fail("duplicate label for node " + tokens[0]);
        values[v] = tokens[1] == "1" ? 1 : 0;
    }
    return LabelVector(std::move(values));
}

// --- key = value files ---------------------------------------------------

/// Flat `key = value` text; '#' starts a comment. Later keys override earlier ones.
struct KeyValue {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

inline std::vector<KeyValue> read_key_values(std::istream& in, const std::string& source) {
    std::vector<KeyValue> out;
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        const auto first = s.find_first_not_of(" \t\r");
        if (first == std::string::npos) return std::string{};
        const auto last = s.find_last_not_of(" \t\r");
        return s.substr(first, last - first + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(source, line_no, "expected 'key = value'");
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) throw ParseError(source, line_no, "expected 'key = value'");
        out.push_back({std::move(key), std::move(value), line_no});
    }
    return out;
}

namespace detail {

inline std::size_t parse_size(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw InvalidArgument(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw InvalidArgument(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(out)) {
        throw InvalidArgument(key + ": expected a real number, got '" + v + "'");
    }
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw InvalidArgument(key + ": expected true/false, got '" + v + "'");
}

inline std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    if (v == "none") return out;
    std::stringstream ss(v);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_size(key, item));
    return out;
}

inline std::string join_sizes(const std::vector<std::size_t>& xs) {
    if (xs.empty()) return "none";
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
    return out;
}

} // namespace detail

inline void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "lr") cfg.lr = parse_real(key, value);
    else if (key == "weight_decay") cfg.weight_decay = parse_real(key, value);
    else if (key == "epochs") cfg.epochs = parse_size(key, value);
    else if (key == "eval_every") cfg.eval_every = parse_size(key, value);
    else if (key == "batch_size") cfg.batch_size = value == "full" ? kFullBatch : parse_size(key, value);
    else if (key == "dropout") cfg.dropout = parse_real(key, value);
    else if (key == "layers") cfg.orders = parse_size(key, value);
    else if (key == "agg_depth") cfg.agg_depth = parse_size(key, value);
    else if (key == "hidden") cfg.hidden_dim = parse_size(key, value);
    else if (key == "head_hidden") cfg.head_hidden = parse_size_list(key, value);
    else if (key == "gamma") cfg.gamma = parse_real(key, value);
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "mode") cfg.mode = parse_propagation_mode(value);
    else if (key == "raw_adjacency") cfg.raw_adjacency = parse_bool(key, value);
    else if (key == "expert_branch") cfg.expert_branch = parse_bool(key, value);
    else if (key == "class_weighting") cfg.class_weighting = parse_bool(key, value);
    else if (key == "threshold") cfg.threshold = parse_real(key, value);
    else throw InvalidArgument("unknown config key '" + key + "'");
}

/// Every TrainConfig field as (key, value), in a fixed order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& cfg) {
    return {
        {"lr", format_double(cfg.lr)},
        {"weight_decay", format_double(cfg.weight_decay)},
        {"epochs", std::to_string(cfg.epochs)},
        {"eval_every", std::to_string(cfg.eval_every)},
        {"batch_size", cfg.batch_size == kFullBatch ? "full" : std::to_string(cfg.batch_size)},
        {"dropout", format_double(cfg.dropout)},
        {"layers", std::to_string(cfg.orders)},
        {"agg_depth", std::to_string(cfg.agg_depth)},
        {"hidden", std::to_string(cfg.hidden_dim)},
        {"head_hidden", detail::join_sizes(cfg.head_hidden)},
        {"gamma", format_double(cfg.gamma)},
        {"seed", std::to_string(cfg.seed)},
        {"mode", to_string(cfg.mode)},
        {"raw_adjacency", cfg.raw_adjacency ? "true" : "false"},
        {"expert_branch", cfg.expert_branch ? "true" : "false"},
        {"class_weighting", cfg.class_weighting ? "true" : "false"},
        {"threshold", format_double(cfg.threshold)},
    };
}

inline TrainConfig read_train_config(std::istream& in, const std::string& source, TrainConfig base = {}) {
    for (const auto& kv : read_key_values(in, source)) {
        try {
            apply_config_entry(base, kv.key, kv.value);
        } catch (const InvalidArgument& e) {
            throw ParseError(source, kv.line, e.what());
        }
    }
    return base;
}

inline void apply_spec_entry(CamouflageSpec& spec, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "n_benign") spec.n_benign = parse_size(key, value);
    else if (key == "n_rings") spec.n_rings = parse_size(key, value);
    else if (key == "ring_size") spec.ring_size = parse_size(key, value);
    else if (key == "depth") spec.depth = parse_size(key, value);
    else if (key == "benign_density") spec.benign_density = parse_real(key, value);
    else if (key == "feature_dim") spec.feature_dim = parse_size(key, value);
    else if (key == "class_separation") spec.class_separation = parse_real(key, value);
    else if (key == "noise_sigma") spec.noise_sigma = parse_real(key, value);
    else if (key == "seed") spec.seed = parse_u64(key, value);
    else throw InvalidArgument("unknown spec key '" + key + "'");
}

inline CamouflageSpec read_camouflage_spec(std::istream& in, const std::string& source) {
    CamouflageSpec spec;
    for (const auto& kv : read_key_values(in, source)) {
        try {
            apply_spec_entry(spec, kv.key, kv.value);
        } catch (const InvalidArgument& e) {
            throw ParseError(source, kv.line, e.what());
        }
    }
    spec.validate();
    return spec;
}

// --- checkpoints ---------------------------------------------------------

struct Checkpoint {
    TrainConfig config;
    std::size_t input_dim = 0;
    std::vector<std::string> relation_names;
    std::size_t best_epoch = 0;
    EvalResult best_val;
    ModelParams params;
};

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
    out << "HOGRL-CHECKPOINT 1\n";
    for (const auto& [k, v] : config_entries(ck.config)) out << "config " << k << ' ' << v << '\n';
    out << "input_dim " << ck.input_dim << '\n';
    out << "relations " << ck.relation_names.size();
    for (const auto& name : ck.relation_names) out << ' ' << name;
    out << '\n';
    const auto& m = ck.best_val;
    out << "best_epoch " << ck.best_epoch << '\n';
    out << "best_val auc " << format_double(m.auc) << " f1_macro " << format_double(m.f1_macro) << " gmean "
        << format_double(m.gmean) << " threshold " << format_double(m.threshold) << " tp " << m.counts.tp << " fp "
        << m.counts.fp << " tn " << m.counts.tn << " fn " << m.counts.fn << '\n';

    std::size_t tensors = 0;
    ck.params.for_each([&](const std::string&, const Matrix&) { ++tensors; });
    out << "manifest " << tensors << '\n';
    ck.params.for_each([&](const std::string& name, const Matrix& t) {
        out << "param " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    });
    ck.params.for_each([&](const std::string& name, const Matrix& t) {
        out << "data " << name << '\n';
        for (std::size_t r = 0; r < t.rows(); ++r) {
            auto row = t.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << format_double(row[c]);
            out << '\n';
        }
    });
}

inline Checkpoint read_checkpoint(std::istream& in, const std::string& source = "<checkpoint>") {
    LineReader reader(in, source);
    reader.expect_header(reader.expect("header"), "HOGRL-CHECKPOINT");
    Checkpoint ck;
    auto tokens = reader.expect("config");
    while (!tokens.empty() && tokens[0] == "config") {
        if (tokens.size() != 3) reader.fail("expected 'config <key> <value>'");
        try {
            apply_config_entry(ck.config, tokens[1], tokens[2]);
        } catch (const InvalidArgument& e) {
            reader.fail(e.what());
        }
        tokens = reader.expect("checkpoint body");
    }
    if (tokens.size() != 2 || tokens[0] != "input_dim") reader.fail("expected 'input_dim <d>'");
    ck.input_dim = reader.to_size(tokens[1]);
    tokens = reader.expect("relations");
    if (tokens.size() < 2 || tokens[0] != "relations") reader.fail("expected 'relations <R> <names...>'");
    const std::size_t relations = reader.to_size(tokens[1]);
    if (tokens.size() != 2 + relations) reader.fail("relation name count does not match");
    ck.relation_names.assign(tokens.begin() + 2, tokens.end());
    tokens = reader.expect("best_epoch");
    if (tokens.size() != 2 || tokens[0] != "best_epoch") reader.fail("expected 'best_epoch <e>'");
    ck.best_epoch = reader.to_size(tokens[1]);
    tokens = reader.expect("best_val");
    if (tokens.size() != 17 || tokens[0] != "best_val" || tokens[1] != "auc" || tokens[3] != "f1_macro" ||
        tokens[5] != "gmean" || tokens[7] != "threshold" || tokens[9] != "tp" || tokens[11] != "fp" ||
        tokens[13] != "tn" || tokens[15] != "fn") {
        reader.fail("malformed best_val line");
    }
    ck.best_val.auc = reader.to_double(tokens[2]);
    ck.best_val.f1_macro = reader.to_double(tokens[4]);
    ck.best_val.gmean = reader.to_double(tokens[6]);
    ck.best_val.threshold = reader.to_double(tokens[8]);
    ck.best_val.counts = {reader.to_size(tokens[10]), reader.to_size(tokens[12]), reader.to_size(tokens[14]),
                          reader.to_size(tokens[16])};

    try {
        ck.params = ModelParams::zeros(ck.config.model(ck.input_dim, relations));
    } catch (const InvalidArgument& e) {
        reader.fail(std::string("config does not describe a valid model: ") + e.what());
    }
    std::vector<std::pair<std::string, Matrix*>> expected;
    ck.params.for_each([&](const std::string& name, Matrix& m) { expected.emplace_back(name, &m); });

    tokens = reader.expect("manifest");
    if (tokens.size() != 2 || tokens[0] != "manifest") reader.fail("expected 'manifest <count>'");
    if (reader.to_size(tokens[1]) != expected.size()) reader.fail("manifest size does not match the configured model");
    for (const auto& [name, m] : expected) {
        tokens = reader.expect("param");
        if (tokens.size() != 4 || tokens[0] != "param" || tokens[1] != name || reader.to_size(tokens[2]) != m->rows() ||
            reader.to_size(tokens[3]) != m->cols()) {
            reader.fail("expected 'param " + name + " " + std::to_string(m->rows()) + " " + std::to_string(m->cols()) + "'");
        }
    }
    for (const auto& [name, m] : expected) {
        tokens = reader.expect("data");
        if (tokens.size() != 2 || tokens[0] != "data" || tokens[1] != name) reader.fail("expected 'data " + name + "'");
        for (std::size_t r = 0; r < m->rows(); ++r) {
            tokens = reader.expect("parameter row");
            if (tokens.size() != m->cols()) reader.fail(name + ": row has the wrong number of values");
            for (std::size_t c = 0; c < m->cols(); ++c) (*m)(r, c) = reader.to_double(tokens[c]);
        }
    }
    if (reader.next(tokens)) reader.fail("trailing data after the last parameter");
    return ck;
}

} // namespace hogrl::io
