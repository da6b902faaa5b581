#include "lovm/difficulty.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "lovm/csv.hpp"
#include "lovm/error.hpp"
#include "lovm/kernels.hpp"
#include "lovm/metrics.hpp"
#include "lovm/scores.hpp"

namespace lovm {

double description_similarity(std::span<const float> target_desc, std::span<const float> pretrain_desc) {
  return cosine(target_desc, pretrain_desc);
}

double prompt_similarity(const EmbeddingMatrix& dataset_prompts, const EmbeddingMatrix& generic_prompts) {
  if (dataset_prompts.rows() != generic_prompts.rows() || dataset_prompts.empty()) {
    fail(ErrorKind::DimensionMismatch,
         "prompt_similarity: " + std::to_string(dataset_prompts.rows()) + " dataset prompts vs " +
             std::to_string(generic_prompts.rows()) + " generic prompts");
  }
  double total = 0.0;
  for (std::size_t r = 0; r < dataset_prompts.rows(); ++r) {
    if (dataset_prompts.label(r).class_index != generic_prompts.label(r).class_index) {
      fail(ErrorKind::InvalidArgument,
           "prompt_similarity: row " + std::to_string(r) + " pairs different classes");
    }
    total += cosine(dataset_prompts.row(r), generic_prompts.row(r));
  }
  return total / static_cast<double>(dataset_prompts.rows());
}

LogitDifficulty distribution_difficulty(const std::vector<std::vector<double>>& probabilities) {
  if (probabilities.empty()) fail(ErrorKind::InsufficientData, "logit difficulty: no samples");
  LogitDifficulty out;
  for (const auto& p : probabilities) {
    double h = 0.0;
    double best = 0.0;
    for (const double v : p) {
      if (v > 0.0) h -= v * std::log2(v);
      best = std::max(best, v);
    }
    out.entropy += h;
    out.max_logit += best;
  }
  const double n = static_cast<double>(probabilities.size());
  out.entropy /= n;
  out.max_logit /= n;
  return out;
}

LogitDifficulty logit_difficulty(const EmbeddingMatrix& images, const ClassWeights& w,
                                 double logit_scale) {
  if (images.empty()) fail(ErrorKind::InsufficientData, "logit difficulty: no image embeddings");
  if (images.dim() != w.dim()) {
    fail(ErrorKind::DimensionMismatch, "logit difficulty: image dim differs from class weights");
  }
  std::vector<std::vector<double>> probs(images.rows(), std::vector<double>(w.num_classes()));
  for (std::size_t r = 0; r < images.rows(); ++r) {
    auto& p = probs[r];
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < p.size(); ++c) {
      p[c] = logit_scale * cosine(images.row(r), w.row(c));
      top = std::max(top, p[c]);
    }
    double z = 0.0;
    for (auto& v : p) {
      v = std::exp(v - top);
      z += v;
    }
    for (auto& v : p) v /= z;
  }
  return distribution_difficulty(probs);
}

DistanceSummary embedding_distance(const EmbeddingMatrix& target, const EmbeddingMatrix& pretrain) {
  if (target.empty() || pretrain.empty()) {
    fail(ErrorKind::InsufficientData, "embedding distance: empty embedding set");
  }
  if (target.dim() != pretrain.dim()) {
    fail(ErrorKind::DimensionMismatch, "embedding distance: dims differ");
  }
  DistanceSummary out{std::numeric_limits<double>::infinity(), 0.0, 0.0};
  for (std::size_t i = 0; i < target.rows(); ++i) {
    for (std::size_t j = 0; j < pretrain.rows(); ++j) {
      const double d = std::sqrt(kernels::squared_distance(target.row(i), pretrain.row(j)));
      out.min = std::min(out.min, d);
      out.max = std::max(out.max, d);
      out.mean += d;
    }
  }
  out.mean /= static_cast<double>(target.rows() * pretrain.rows());
  return out;
}

const std::vector<MetricInfo>& difficulty_metrics() {
  static const std::vector<MetricInfo> metrics{
      {DifficultyMetric::DescSim, "text_sim", "cosine", true},
      {DifficultyMetric::PromptSim, "prompt_embedding_sim", "cosine", true},
      {DifficultyMetric::Entropy, "image_text_embedding", "entropy", true},
      {DifficultyMetric::MaxLogit, "image_text_embedding", "max_logit", true},
      {DifficultyMetric::L2Min, "image_embedding_dist", "l2_min", false},
      {DifficultyMetric::L2Mean, "image_embedding_dist", "l2_mean", false},
      {DifficultyMetric::L2Max, "image_embedding_dist", "l2_max", false},
  };
  return metrics;
}

std::optional<double> metric_value(const DifficultyRow& row, DifficultyMetric metric) {
  switch (metric) {
    case DifficultyMetric::DescSim: return row.desc_sim;
    case DifficultyMetric::PromptSim: return row.prompt_sim;
    case DifficultyMetric::Entropy: return row.entropy;
    case DifficultyMetric::MaxLogit: return row.max_logit;
    case DifficultyMetric::L2Min: return row.l2_min;
    case DifficultyMetric::L2Mean: return row.l2_mean;
    case DifficultyMetric::L2Max: return row.l2_max;
  }
  return std::nullopt;
}

double difficulty_rank_eval(std::span<const double> values, std::span<const double> accuracies,
                            bool higher_is_easier) {
  if (values.size() < 2) fail(ErrorKind::InsufficientData, "difficulty ranking needs >= 2 datasets");
  std::vector<double> easiness(values.begin(), values.end());
  if (!higher_is_easier) {
    for (auto& v : easiness) v = -v;
  }
  return kendall_tau_a(easiness, accuracies);
}

std::vector<int> easiness_ranks(std::span<const double> values, bool higher_is_easier) {
  std::vector<int> ranks(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    int better = 0;
    for (std::size_t j = 0; j < values.size(); ++j) {
      if (higher_is_easier ? values[j] > values[i] : values[j] < values[i]) ++better;
    }
    ranks[i] = better + 1;
  }
  return ranks;
}

void write_difficulty_report(const DifficultyReport& report, const std::filesystem::path& path) {
  if (report.rows.size() != report.accuracies.size()) {
    fail(ErrorKind::DimensionMismatch, "difficulty report: accuracies not aligned with rows");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  csv::write_row(out, {"method", "metric", "dataset", "value", "rank", "tau"});

  auto emit = [&](const char* method, const char* metric, const std::vector<double>& values,
                  const std::vector<DatasetId>& names, bool higher_is_easier) {
    const auto ranks = easiness_ranks(values, higher_is_easier);
    std::vector<double> acc;
    for (const auto& n : names) {
      for (std::size_t i = 0; i < report.rows.size(); ++i) {
        if (report.rows[i].dataset == n) acc.push_back(report.accuracies[i]);
      }
    }
    const std::string tau =
        values.size() >= 2 ? csv::format_double(difficulty_rank_eval(values, acc, higher_is_easier))
                           : "";
    for (std::size_t i = 0; i < values.size(); ++i) {
      csv::write_row(out, {method, metric, names[i], csv::format_double(values[i]),
                           std::to_string(ranks[i]), tau});
    }
  };

  std::vector<DatasetId> all;
  for (const auto& r : report.rows) all.push_back(r.dataset);
  emit("true_performance", "acc", report.accuracies, all, true);

  for (const auto& info : difficulty_metrics()) {
    std::vector<double> values;
    std::vector<DatasetId> names;
    for (const auto& r : report.rows) {
      if (const auto v = metric_value(r, info.metric)) {
        values.push_back(*v);
        names.push_back(r.dataset);
      }
    }
    if (!values.empty()) emit(info.method, info.name, values, names, info.higher_is_easier);
  }
  out << "# logit_scale=" << csv::format_double(report.logit_scale) << '\n';
}

DifficultyRow assess_dataset(const EmbeddingBundle& target,
                             const std::optional<EmbeddingBundle>& reference, double logit_scale) {
  DifficultyRow row;
  row.dataset = target.task.dataset;
  const std::size_t classes = target.task.num_classes();
  const ClassWeights w = ensemble_prompts(target.class_prompts, classes);
  if (reference && target.description && reference->description) {
    row.desc_sim = description_similarity(target.description->row(0), reference->description->row(0));
  }
  if (target.generic_prompts) {
    const ClassWeights generic = ensemble_prompts(*target.generic_prompts, classes);
    std::vector<float> a, b;
    std::vector<RowLabel> labels;
    for (std::size_t c = 0; c < classes; ++c) {
      a.insert(a.end(), w.row(c).begin(), w.row(c).end());
      b.insert(b.end(), generic.row(c).begin(), generic.row(c).end());
      labels.push_back({static_cast<int>(c), target.task.class_names[c]});
    }
    row.prompt_sim = prompt_similarity(EmbeddingMatrix(w.dim(), std::move(a), labels),
                                       EmbeddingMatrix(w.dim(), std::move(b), labels));
  }
  if (target.images) {
    const auto ld = logit_difficulty(*target.images, w, logit_scale);
    row.entropy = ld.entropy;
    row.max_logit = ld.max_logit;
    if (reference && reference->images) {
      // Distances are taken between unit-length image embeddings.
      const auto dist =
          embedding_distance(l2_normalize(*target.images), l2_normalize(*reference->images));
      row.l2_min = dist.min;
      row.l2_mean = dist.mean;
      row.l2_max = dist.max;
    }
  }
  return row;
}

}  // namespace lovm
