#pragma once
// Model-ranking and performance-prediction metrics.
//
// Score vectors are indexed by model position in the table; that position is
// also the tie-break order when scores are equal.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace lovm {

inline constexpr std::size_t kTopK = 5;

// Indices sorted by descending score, ties by ascending index.
std::vector<std::size_t> descending_order(std::span<const double> scores);

// |top5(pred) ∩ top5(gt)| / 5. Both orderings must be permutations of the
// same universe of at least 5 models.
double top5_recall(std::span<const std::size_t> pred_order, std::span<const std::size_t> gt_order);
double top5_recall_scores(std::span<const double> pred, std::span<const double> gt);

// Kendall tau-a over I = top5(pred) ∩ top5(gt), comparing the predicted and
// ground-truth scores of each pair in I; tied pairs count zero. Returns
// nullopt when |I| < 2.
std::optional<double> top5_tau_or_skip(std::span<const double> pred, std::span<const double> gt);
// Same, but |I| < 2 yields 0.
double top5_tau(std::span<const double> pred, std::span<const double> gt);

// Full Kendall tau-a over all items; tied pairs count zero. n >= 2.
double kendall_tau_a(std::span<const double> x, std::span<const double> y);

double mean_abs_error(std::span<const double> pred, std::span<const double> gt);

// 1 - SS_res / SS_tot with predictions taken as-is (no refit); may be negative.
double r_squared(std::span<const double> pred, std::span<const double> gt);

double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace lovm
