#pragma once
// Linear performance predictor p = w·s + b over text-derived scores, and the
// two hold-out protocols:
//   ranking    - fit on every dataset except the target, score all models on
//                the target;
//   prediction - fit on every cell outside the held-out model's row and the
//                held-out dataset's column, predict that one cell.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lovm/datastore.hpp"
#include "lovm/scores.hpp"

namespace lovm {

using ScoreTable = std::map<std::pair<ModelId, DatasetId>, ScoreVector>;

// Parses "INB+G+C"-style subsets. Tokens: INB, C (text_acc1, text_f1),
// G (fisher, silhouette, dispersion, synonym), ALL, or any feature name.
// The result is deduplicated and in canonical feature order.
std::vector<Feature> parse_feature_set(const std::string& text);
std::string feature_set_label(std::span<const Feature> features);

// Dense design matrix aligned with a ground-truth table's model and dataset
// order. Row (m, d) lives at index m * num_datasets + d.
class FeatureTable {
 public:
  // Attaches the ImageNet feature from gt when Inb is requested. Throws
  // Missing for sparse grids, absent score cells or absent ImageNet values.
  static FeatureTable build(const ScoreTable& scores, const GroundTruthTable& gt,
                            std::vector<Feature> features, Target target);

  const std::vector<Feature>& features() const noexcept { return features_; }
  Target target() const noexcept { return target_; }
  const std::vector<ModelId>& models() const noexcept { return models_; }
  const std::vector<DatasetId>& datasets() const noexcept { return datasets_; }
  std::size_t num_models() const noexcept { return models_.size(); }
  std::size_t num_datasets() const noexcept { return datasets_.size(); }
  std::size_t num_features() const noexcept { return features_.size(); }

  std::span<const double> x(std::size_t model, std::size_t dataset) const noexcept {
    const std::size_t k = features_.size();
    return {x_.data() + (model * datasets_.size() + dataset) * k, k};
  }
  double y(std::size_t model, std::size_t dataset) const noexcept {
    return y_[model * datasets_.size() + dataset];
  }
  // ImageNet accuracy per model when Inb is among the features.
  std::optional<double> inb(std::size_t model) const;

  bool inb_only() const noexcept {
    return features_.size() == 1 && features_[0] == Feature::Inb;
  }

 private:
  std::vector<Feature> features_;
  Target target_ = Target::Mpcr;
  std::vector<ModelId> models_;
  std::vector<DatasetId> datasets_;
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> inb_;
};

struct LinearModel {
  std::vector<std::string> feature_names;
  std::vector<double> weights;
  double bias = 0.0;
  // Set when the normal equations were rank-deficient and a 1e-8 ridge was
  // added to the feature diagonal.
  bool regularized = false;

  double predict_raw(std::span<const double> features) const;
  // Clamped to [0, 1].
  double predict(std::span<const double> features) const;
  double predict(const ScoreVector& s) const;
};

// Ordinary least squares with intercept. `x` is row-major (rows x k).
LinearModel fit_linear(std::span<const double> x, std::size_t k, std::span<const double> y,
                       std::vector<std::string> feature_names = {});
LinearModel fit_linear(const std::vector<std::vector<double>>& x, std::span<const double> y,
                       std::vector<std::string> feature_names = {});

struct RankedModel {
  ModelId model;
  double score = 0.0;  // unclamped
};

// Raw (unclamped) predicted scores for every model on `dataset`, in table
// order, fitted without any row from `dataset`.
std::vector<double> ranking_scores(const FeatureTable& table, std::size_t dataset);

std::vector<RankedModel> rank_models(const FeatureTable& table, const DatasetId& dataset);

// Clamped prediction for one cell, fitted without that model's row and that
// dataset's column.
double predict_performance(const FeatureTable& table, std::size_t model, std::size_t dataset);
double predict_performance(const FeatureTable& table, const ModelId& model, const DatasetId& dataset);

struct DatasetEval {
  DatasetId dataset;
  double r5 = 0.0;
  double tau = 0.0;
  bool tau_defined = true;  // false when |top5(pred) ∩ top5(gt)| < 2
  double l1 = 0.0;
};

struct SubsetEval {
  std::vector<Feature> features;
  std::vector<DatasetEval> per_dataset;
  double mean_r5 = 0.0;
  double mean_tau = 0.0;
  double mean_l1 = 0.0;
  double r2 = 0.0;  // over all held-out cell predictions vs ground truth
  // Held-out predictions, row-major model x dataset.
  std::vector<double> predictions;
};

struct EvalOptions {
  // Exclude datasets with undefined top-5 tau from the tau mean instead of
  // counting them as 0.
  bool skip_undefined_tau = false;
  std::size_t jobs = 1;
};

SubsetEval evaluate_subset(const ScoreTable& scores, const GroundTruthTable& gt,
                           std::vector<Feature> features, Target target,
                           const EvalOptions& options = {});

struct AblationRow {
  std::size_t subset_id = 0;  // bitmask over the pool, 1-based
  std::vector<Feature> features;
  double mean_r5 = 0.0;
  double mean_tau = 0.0;
  double mean_l1 = 0.0;
};

// Every non-empty subset of the pool (at most 10 features), ordered by mask.
std::vector<AblationRow> ablate_subsets(const ScoreTable& scores, const GroundTruthTable& gt,
                                        const std::vector<Feature>& pool, Target target,
                                        const EvalOptions& options = {});

}  // namespace lovm
