#include "lovm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lovm/error.hpp"

namespace lovm {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    fail(ErrorKind::DimensionMismatch, std::string(what) + ": length mismatch " +
                                           std::to_string(a) + " vs " + std::to_string(b));
  }
}

void require_top_k(std::size_t n, const char* what) {
  if (n < kTopK) {
    fail(ErrorKind::InsufficientData,
         std::string(what) + ": need at least 5 models, got " + std::to_string(n));
  }
}

int sign(double v) noexcept { return (v > 0.0) - (v < 0.0); }

}  // namespace

std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

double top5_recall(std::span<const std::size_t> pred_order, std::span<const std::size_t> gt_order) {
  require_same_length(pred_order.size(), gt_order.size(), "top5_recall");
  require_top_k(pred_order.size(), "top5_recall");
  std::vector<std::size_t> a(pred_order.begin(), pred_order.end());
  std::vector<std::size_t> b(gt_order.begin(), gt_order.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a != b || std::adjacent_find(a.begin(), a.end()) != a.end()) {
    fail(ErrorKind::InvalidArgument, "top5_recall: orderings cover different model sets");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < kTopK; ++i) {
    const auto end = gt_order.begin() + kTopK;
    if (std::find(gt_order.begin(), end, pred_order[i]) != end) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(kTopK);
}

double top5_recall_scores(std::span<const double> pred, std::span<const double> gt) {
  require_same_length(pred.size(), gt.size(), "top5_recall");
  const auto p = descending_order(pred);
  const auto g = descending_order(gt);
  return top5_recall(p, g);
}

std::optional<double> top5_tau_or_skip(std::span<const double> pred, std::span<const double> gt) {
  require_same_length(pred.size(), gt.size(), "top5_tau");
  require_top_k(pred.size(), "top5_tau");
  const auto p = descending_order(pred);
  const auto g = descending_order(gt);
  std::vector<std::size_t> shared;
  for (std::size_t i = 0; i < kTopK; ++i) {
    if (std::find(g.begin(), g.begin() + kTopK, p[i]) != g.begin() + kTopK) shared.push_back(p[i]);
  }
  const std::size_t m = shared.size();
  if (m < 2) return std::nullopt;
  long score = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const std::size_t a = shared[i];
      const std::size_t b = shared[j];
      score += sign(pred[a] - pred[b]) * sign(gt[a] - gt[b]);
    }
  }
  return static_cast<double>(score) / static_cast<double>(m * (m - 1) / 2);
}

double top5_tau(std::span<const double> pred, std::span<const double> gt) {
  return top5_tau_or_skip(pred, gt).value_or(0.0);
}

double kendall_tau_a(std::span<const double> x, std::span<const double> y) {
  require_same_length(x.size(), y.size(), "kendall_tau");
  const std::size_t n = x.size();
  if (n < 2) fail(ErrorKind::InsufficientData, "kendall_tau: need at least 2 items");
  long score = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) score += sign(x[i] - x[j]) * sign(y[i] - y[j]);
  }
  return static_cast<double>(score) / static_cast<double>(n * (n - 1) / 2);
}

double mean_abs_error(std::span<const double> pred, std::span<const double> gt) {
  require_same_length(pred.size(), gt.size(), "mean_abs_error");
  if (pred.empty()) fail(ErrorKind::InsufficientData, "mean_abs_error: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - gt[i]);
  return sum / static_cast<double>(pred.size());
}

double r_squared(std::span<const double> pred, std::span<const double> gt) {
  require_same_length(pred.size(), gt.size(), "r_squared");
  if (gt.size() < 2) fail(ErrorKind::InsufficientData, "r_squared: need at least 2 points");
  const double mean = std::accumulate(gt.begin(), gt.end(), 0.0) / static_cast<double>(gt.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    ss_res += (gt[i] - pred[i]) * (gt[i] - pred[i]);
    ss_tot += (gt[i] - mean) * (gt[i] - mean);
  }
  if (ss_tot == 0.0) fail(ErrorKind::Degenerate, "r_squared: ground truth is constant");
  return 1.0 - ss_res / ss_tot;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require_same_length(x.size(), y.size(), "pearson");
  if (x.size() < 2) fail(ErrorKind::InsufficientData, "pearson: need at least 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace lovm
