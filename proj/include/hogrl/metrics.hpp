#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "hogrl/error.hpp"

namespace hogrl {

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    [[nodiscard]] std::size_t total() const noexcept { return tp + fp + tn + fn; }
    friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct EvalResult {
    double auc = 0.0;
    double f1_macro = 0.0;
    double gmean = 0.0;
    double threshold = 0.5;
    Confusion counts;
};

/// Rank-based (Mann-Whitney) ROC AUC; tied scores share their average rank.
inline double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw InvalidArgument("auc: scores and labels differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double positive_rank_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        // ranks i+1 .. j share their mean
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                positive_rank_sum += rank;
                ++positives;
            }
        }
        i = j;
    }
    const std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0) throw InvalidArgument("auc: both classes must be present");
    const double np = static_cast<double>(positives);
    return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(negatives));
}

/// Predict fraud iff score >= threshold.
inline Confusion confusion_at_threshold(std::span<const double> scores, std::span<const int> labels,
                                        double threshold = 0.5) {
    if (scores.size() != labels.size()) throw InvalidArgument("confusion_at_threshold: length mismatch");
    Confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i] == 1) {
            predicted ? ++c.tp : ++c.fn;
        } else {
            predicted ? ++c.fp : ++c.tn;
        }
    }
    return c;
}

namespace detail {
inline double safe_ratio(double num, double den) noexcept { return den > 0.0 ? num / den : 0.0; }

inline double f1(double tp, double fp, double fn) noexcept {
    const double precision = safe_ratio(tp, tp + fp);
    const double recall = safe_ratio(tp, tp + fn);
    return safe_ratio(2.0 * precision * recall, precision + recall);
}
} // namespace detail

/// Mean of the fraud-class and benign-class F1 scores.
inline double f1_macro(const Confusion& c) noexcept {
    const auto tp = static_cast<double>(c.tp);
    const auto fp = static_cast<double>(c.fp);
    const auto tn = static_cast<double>(c.tn);
    const auto fn = static_cast<double>(c.fn);
    return 0.5 * (detail::f1(tp, fp, fn) + detail::f1(tn, fn, fp));
}

/// sqrt(TPR * TNR); a zero denominator makes its rate zero.
inline double gmean(const Confusion& c) noexcept {
    const double tpr = detail::safe_ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
    const double tnr = detail::safe_ratio(static_cast<double>(c.tn), static_cast<double>(c.tn + c.fp));
    return std::sqrt(tpr * tnr);
}

inline EvalResult evaluate(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
    EvalResult r;
    r.threshold = threshold;
    r.auc = auc(scores, labels);
    r.counts = confusion_at_threshold(scores, labels, threshold);
    r.f1_macro = f1_macro(r.counts);
    r.gmean = gmean(r.counts);
    return r;
}

} // namespace hogrl
