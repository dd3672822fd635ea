#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hogrl/error.hpp"
#include "hogrl/matrix.hpp"

namespace hogrl {

using NodeId = std::uint32_t;
using Edge = std::pair<std::size_t, std::size_t>;

/// One relation's adjacency in CSR form. Immutable once built.
///
/// Column indices are strictly increasing within a row. When `normalized()`
/// holds, every nonempty row sums to one and empty rows stay all-zero.
class RelationGraph {
public:
    RelationGraph() : offsets_(1, 0) {}

    RelationGraph(std::size_t n, std::vector<std::size_t> offsets, std::vector<NodeId> columns,
                  std::vector<double> values, bool normalized)
        : n_(n), offsets_(std::move(offsets)), columns_(std::move(columns)),
          values_(std::move(values)), normalized_(normalized) {
        validate();
    }

    [[nodiscard]] std::size_t num_nodes() const noexcept { return n_; }
    [[nodiscard]] std::size_t num_entries() const noexcept { return columns_.size(); }
    [[nodiscard]] bool normalized() const noexcept { return normalized_; }

    [[nodiscard]] std::size_t degree(std::size_t v) const noexcept {
        return offsets_[v + 1] - offsets_[v];
    }
    [[nodiscard]] std::span<const NodeId> neighbors(std::size_t v) const noexcept {
        return {columns_.data() + offsets_[v], degree(v)};
    }
    [[nodiscard]] std::span<const double> weights(std::size_t v) const noexcept {
        return {values_.data() + offsets_[v], degree(v)};
    }

    [[nodiscard]] const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }
    [[nodiscard]] const std::vector<NodeId>& columns() const noexcept { return columns_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }

    [[nodiscard]] bool has_entry(std::size_t u, std::size_t v) const noexcept {
        auto nb = neighbors(u);
        return std::binary_search(nb.begin(), nb.end(), static_cast<NodeId>(v));
    }

    /// Structural symmetry: (u,v) present iff (v,u) present.
    [[nodiscard]] bool is_symmetric() const noexcept {
        for (std::size_t u = 0; u < n_; ++u) {
            for (NodeId v : neighbors(u)) {
                if (!has_entry(v, u)) return false;
            }
        }
        return true;
    }

    /// Dense copy, for oracles and tiny graphs.
    [[nodiscard]] Matrix to_dense() const {
        Matrix out(n_, n_);
        for (std::size_t u = 0; u < n_; ++u) {
            auto nb = neighbors(u);
            auto w = weights(u);
            for (std::size_t i = 0; i < nb.size(); ++i) out(u, nb[i]) = w[i];
        }
        return out;
    }

private:
    void validate() const {
        if (offsets_.size() != n_ + 1 || offsets_.front() != 0) {
            throw InvalidArgument("RelationGraph: offsets must have n+1 entries starting at 0");
        }
        if (offsets_.back() != columns_.size() || columns_.size() != values_.size()) {
            throw InvalidArgument("RelationGraph: last offset must equal entry count");
        }
        for (std::size_t v = 0; v < n_; ++v) {
            if (offsets_[v + 1] < offsets_[v]) {
                throw InvalidArgument("RelationGraph: offsets decrease at row " + std::to_string(v));
            }
            for (std::size_t i = offsets_[v]; i < offsets_[v + 1]; ++i) {
                if (columns_[i] >= n_) {
                    throw InvalidArgument("RelationGraph: column out of range in row " + std::to_string(v));
                }
                if (i > offsets_[v] && columns_[i] <= columns_[i - 1]) {
                    throw InvalidArgument("RelationGraph: columns not strictly increasing in row " +
                                          std::to_string(v));
                }
            }
        }
    }

    std::size_t n_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<NodeId> columns_;
    std::vector<double> values_;
    bool normalized_ = false;
};

/// R relations over one node set, in declared order.
class MultiRelationGraph {
public:
    MultiRelationGraph() = default;
    MultiRelationGraph(std::vector<RelationGraph> relations, std::vector<std::string> names)
        : relations_(std::move(relations)), names_(std::move(names)) {
        if (relations_.empty()) throw InvalidArgument("MultiRelationGraph: need at least one relation");
        if (names_.size() != relations_.size()) {
            throw InvalidArgument("MultiRelationGraph: one name per relation required");
        }
        for (const auto& r : relations_) {
            if (r.num_nodes() != relations_.front().num_nodes()) {
                throw InvalidArgument("MultiRelationGraph: relations disagree on node count");
            }
        }
    }

    [[nodiscard]] std::size_t num_nodes() const noexcept {
        return relations_.empty() ? 0 : relations_.front().num_nodes();
    }
    [[nodiscard]] std::size_t num_relations() const noexcept { return relations_.size(); }
    [[nodiscard]] const RelationGraph& relation(std::size_t r) const { return relations_.at(r); }
    [[nodiscard]] const std::string& name(std::size_t r) const { return names_.at(r); }
    [[nodiscard]] const std::vector<RelationGraph>& relations() const noexcept { return relations_; }
    [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }

private:
    std::vector<RelationGraph> relations_;
    std::vector<std::string> names_;
};

/// Binary CSR adjacency from an edge list. Self-loops are dropped and
/// duplicates collapse to weight 1.
inline RelationGraph build_graph(const std::vector<Edge>& edges, std::size_t n, bool symmetrize) {
    std::vector<std::size_t> degree(n, 0);
    for (const auto& [u, v] : edges) {
        if (u >= n || v >= n) {
            throw InvalidArgument("build_graph: edge (" + std::to_string(u) + ", " + std::to_string(v) +
                                  ") out of range for n=" + std::to_string(n));
        }
        if (u == v) continue;
        ++degree[u];
        if (symmetrize) ++degree[v];
    }
    std::vector<std::size_t> offsets(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v) offsets[v + 1] = offsets[v] + degree[v];

    std::vector<NodeId> raw(offsets.back());
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const auto& [u, v] : edges) {
        if (u == v) continue;
        raw[cursor[u]++] = static_cast<NodeId>(v);
        if (symmetrize) raw[cursor[v]++] = static_cast<NodeId>(u);
    }

    std::vector<std::size_t> out_offsets(n + 1, 0);
    std::vector<NodeId> columns;
    columns.reserve(raw.size());
    for (std::size_t v = 0; v < n; ++v) {
        auto first = raw.begin() + static_cast<std::ptrdiff_t>(offsets[v]);
        auto last = raw.begin() + static_cast<std::ptrdiff_t>(offsets[v + 1]);
        std::sort(first, last);
        last = std::unique(first, last);
        columns.insert(columns.end(), first, last);
        out_offsets[v + 1] = columns.size();
    }
    std::vector<double> values(columns.size(), 1.0);
    return {n, std::move(out_offsets), std::move(columns), std::move(values), false};
}

/// Rescale each nonempty row to sum to one. Idempotent.
namespace detail {

/// Edge weights of g rescaled so each non-empty row sums to 1.
inline std::vector<double> row_normalized_values(const RelationGraph& g) {
    std::vector<double> values = g.values();
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
        const std::size_t lo = g.offsets()[v];
        const std::size_t hi = g.offsets()[v + 1];
        double sum = 0.0;
        for (std::size_t i = lo; i < hi; ++i) sum += values[i];
        if (hi == lo || sum == 0.0) continue;
        for (std::size_t i = lo; i < hi; ++i) values[i] /= sum;
    }
    return values;
}

/// out = A·X using g's sparsity pattern with `values` substituted for its weights.
inline void spmm_pattern(const RelationGraph& g, std::span<const double> values, const Matrix& dense, Matrix& out) {
    out.fill(0.0);
    const auto& offsets = g.offsets();
    const auto& columns = g.columns();
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
        auto dst = out.row(v);
        for (std::size_t i = offsets[v]; i < offsets[v + 1]; ++i) {
            auto src = dense.row(columns[i]);
            const double s = values[i];
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += s * src[j];
        }
    }
}

} // namespace detail

inline RelationGraph row_normalize(const RelationGraph& g) {
    return {g.num_nodes(), g.offsets(), g.columns(), detail::row_normalized_values(g), true};
}

/// out = A·X, overwriting `out` (which must already have X's shape and must not alias X).
/// Row reductions are sequential, so results are bitwise reproducible.
inline void spmm_into(const RelationGraph& g, const Matrix& dense, Matrix& out) {
    if (dense.rows() != g.num_nodes()) {
        throw InvalidArgument("spmm: dense operand has " + std::to_string(dense.rows()) +
                              " rows, graph has " + std::to_string(g.num_nodes()) + " nodes");
    }
    if (out.rows() != dense.rows() || out.cols() != dense.cols()) throw InvalidArgument("spmm_into: output shape mismatch");
    detail::spmm_pattern(g, g.values(), dense, out);
}

inline Matrix spmm(const RelationGraph& g, const Matrix& dense) {
    Matrix out(dense.rows(), dense.cols());
    spmm_into(g, dense, out);
    return out;
}

/// Aᵀ·X, used by reverse-mode passes through row-normalized (non-symmetric) operators.
inline Matrix spmm_transpose(const RelationGraph& g, const Matrix& dense) {
    if (dense.rows() != g.num_nodes()) throw InvalidArgument("spmm_transpose: dimension mismatch");
    Matrix out(dense.rows(), dense.cols());
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
        auto src = dense.row(v);
        auto nb = g.neighbors(v);
        auto w = g.weights(v);
        for (std::size_t i = 0; i < nb.size(); ++i) {
            auto dst = out.row(nb[i]);
            const double s = w[i];
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += s * src[j];
        }
    }
    return out;
}

// --- labels and homophily -------------------------------------------------

inline constexpr int kUnknownLabel = -1;

/// Per-node label in {0 = benign, 1 = fraud, kUnknownLabel}.
struct LabelVector {
    std::vector<int> values;

    LabelVector() = default;
    explicit LabelVector(std::vector<int> v) : values(std::move(v)) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (values[i] != 0 && values[i] != 1 && values[i] != kUnknownLabel) {
                throw InvalidArgument("LabelVector: label of node " + std::to_string(i) + " is not 0/1/unknown");
            }
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    [[nodiscard]] bool labeled(std::size_t v) const noexcept { return values[v] != kUnknownLabel; }
    [[nodiscard]] int operator[](std::size_t v) const noexcept { return values[v]; }

    [[nodiscard]] std::vector<std::size_t> labeled_nodes() const {
        std::vector<std::size_t> out;
        for (std::size_t v = 0; v < values.size(); ++v) {
            if (labeled(v)) out.push_back(v);
        }
        return out;
    }
    [[nodiscard]] std::size_t count(int label) const noexcept {
        return static_cast<std::size_t>(std::count(values.begin(), values.end(), label));
    }
};

/// Share of `members` whose label equals `label`, over labeled members other
/// than `skip`. Empty when no member qualifies.
template <class Range>
std::optional<double> same_label_fraction(const Range& members, const LabelVector& labels, int label,
                                          std::size_t skip) {
    std::size_t same = 0;
    std::size_t total = 0;
    for (auto u : members) {
        if (static_cast<std::size_t>(u) == skip || !labels.labeled(u)) continue;
        ++total;
        if (labels[u] == label) ++same;
    }
    if (total == 0) return std::nullopt;
    return static_cast<double>(same) / static_cast<double>(total);
}

/// Fraction of labeled neighbors sharing v's label; nullopt when none are labeled.
inline std::optional<double> node_homophily(const RelationGraph& g, const LabelVector& labels, std::size_t v) {
    if (v >= g.num_nodes() || labels.size() != g.num_nodes()) {
        throw InvalidArgument("node_homophily: node or label vector out of range");
    }
    if (!labels.labeled(v)) throw InvalidArgument("node_homophily: node " + std::to_string(v) + " is unlabeled");
    return same_label_fraction(g.neighbors(v), labels, labels[v], v);
}

/// Fixed-width histogram over [0,1]; the value 1.0 falls in the last bin.
struct Histogram {
    std::vector<std::size_t> counts;

    explicit Histogram(std::size_t bins = 10) : counts(bins, 0) {}

    [[nodiscard]] std::size_t bins() const noexcept { return counts.size(); }
    [[nodiscard]] std::size_t bin_of(double value) const noexcept {
        const auto b = static_cast<std::size_t>(std::floor(value * static_cast<double>(bins())));
        return std::min(b, bins() - 1);
    }
    void add(double value) { ++counts[bin_of(value)]; }
    [[nodiscard]] std::size_t total() const noexcept {
        std::size_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }
    [[nodiscard]] double bin_center(std::size_t b) const noexcept {
        return (static_cast<double>(b) + 0.5) / static_cast<double>(bins());
    }
    /// Center of the most populated bin (lowest on ties).
    [[nodiscard]] double mode() const noexcept {
        auto it = std::max_element(counts.begin(), counts.end());
        return bin_center(static_cast<std::size_t>(it - counts.begin()));
    }
};

struct HomophilyReport {
    std::vector<std::optional<double>> per_node;  // nullopt: unlabeled node or undefined homophily
    std::array<Histogram, 2> per_class;           // index = label
    std::array<std::size_t, 2> undefined{0, 0};   // labeled nodes with no labeled neighbor
    std::array<double, 2> mean{0.0, 0.0};         // over defined values; NaN when none
};

inline HomophilyReport homophily_distribution(const RelationGraph& g, const LabelVector& labels,
                                              std::size_t bins) {
    if (bins < 2) throw InvalidArgument("homophily_distribution: need at least 2 bins");
    if (labels.size() != g.num_nodes()) throw InvalidArgument("homophily_distribution: label count mismatch");
    if (labels.count(0) + labels.count(1) == 0) throw InvalidArgument("homophily_distribution: no labeled nodes");

    HomophilyReport report{std::vector<std::optional<double>>(g.num_nodes()), {Histogram(bins), Histogram(bins)}};
    std::array<double, 2> sum{0.0, 0.0};
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
        if (!labels.labeled(v)) continue;
        const int c = labels[v];
        auto h = node_homophily(g, labels, v);
        report.per_node[v] = h;
        if (!h) {
            ++report.undefined[c];
            continue;
        }
        report.per_class[c].add(*h);
        sum[c] += *h;
    }
    for (int c = 0; c < 2; ++c) {
        const auto defined = report.per_class[c].total();
        report.mean[c] = defined ? sum[c] / static_cast<double>(defined) : std::nan("");
    }
    return report;
}

} // namespace hogrl
