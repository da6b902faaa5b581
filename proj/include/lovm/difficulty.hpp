#pragma once
// Dataset-difficulty and domain-shift estimators, plus their ranking
// evaluation against measured accuracies.

#include <optional>
#include <string>
#include <vector>

#include "lovm/datastore.hpp"
#include "lovm/ensemble.hpp"

namespace lovm {

double description_similarity(std::span<const float> target_desc, std::span<const float> pretrain_desc);

// Mean row-wise cosine between two matrices whose rows are matched pairwise
// (same row count, same class index per row).
double prompt_similarity(const EmbeddingMatrix& dataset_prompts, const EmbeddingMatrix& generic_prompts);

struct LogitDifficulty {
  double entropy = 0.0;    // mean Shannon entropy in bits
  double max_logit = 0.0;  // mean maximum softmax probability
};

inline constexpr double kDefaultLogitScale = 100.0;

// Entropy / max-probability summary of already-normalized distributions.
LogitDifficulty distribution_difficulty(const std::vector<std::vector<double>>& probabilities);

// Softmax over scale * cos(image, y^c) per image.
LogitDifficulty logit_difficulty(const EmbeddingMatrix& images, const ClassWeights& w,
                                 double logit_scale = kDefaultLogitScale);

struct DistanceSummary {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

// Euclidean distances over every (target, pretrain) row pair.
DistanceSummary embedding_distance(const EmbeddingMatrix& target, const EmbeddingMatrix& pretrain);

struct DifficultyRow {
  DatasetId dataset;
  std::optional<double> desc_sim;
  std::optional<double> prompt_sim;
  std::optional<double> entropy;
  std::optional<double> max_logit;
  std::optional<double> l2_min;
  std::optional<double> l2_mean;
  std::optional<double> l2_max;
};

enum class DifficultyMetric { DescSim, PromptSim, Entropy, MaxLogit, L2Min, L2Mean, L2Max };

struct MetricInfo {
  DifficultyMetric metric;
  const char* method;
  const char* name;
  // True when a larger value predicts an easier dataset (higher accuracy).
  bool higher_is_easier;
};

const std::vector<MetricInfo>& difficulty_metrics();
std::optional<double> metric_value(const DifficultyRow& row, DifficultyMetric metric);

// Kendall tau-a between the metric's easiness ordering and the accuracy
// ordering over all datasets. `values` and `accuracies` are aligned.
double difficulty_rank_eval(std::span<const double> values, std::span<const double> accuracies,
                            bool higher_is_easier = true);

struct DifficultyReport {
  std::vector<DifficultyRow> rows;
  std::vector<double> accuracies;  // aligned with rows
  double logit_scale = kDefaultLogitScale;
};

// Rank of each value (1 = predicted easiest); equal values share a rank.
std::vector<int> easiness_ranks(std::span<const double> values, bool higher_is_easier);

// CSV: method,metric,dataset,value,rank,tau. The first block is the measured
// accuracy ("true_performance").
void write_difficulty_report(const DifficultyReport& report, const std::filesystem::path& path);

// Builds one row from a target bundle and a reference (pre-training) bundle.
// Each field is filled only when the tensors it needs are present.
DifficultyRow assess_dataset(const EmbeddingBundle& target,
                             const std::optional<EmbeddingBundle>& reference,
                             double logit_scale = kDefaultLogitScale);

}  // namespace lovm
