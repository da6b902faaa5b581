#pragma once
// Text-derived features for one (model, dataset) pair: text classification
// scores computed on noise-corrupted caption embeddings, and granularity
// scores computed on the clean caption/synonym embeddings against the
// ensembled class weights.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "lovm/datastore.hpp"
#include "lovm/ensemble.hpp"

namespace lovm {

enum class Feature { Inb, TextAcc1, TextF1, Fisher, Silhouette, Dispersion, Synonym };

inline constexpr std::array<Feature, 7> kAllFeatures{
    Feature::Inb,        Feature::TextAcc1,   Feature::TextF1,  Feature::Fisher,
    Feature::Silhouette, Feature::Dispersion, Feature::Synonym};

std::string_view feature_name(Feature f) noexcept;
Feature parse_feature(std::string_view name);

struct ScoreVector {
  double text_acc1 = 0.0;
  double text_f1 = 0.0;
  double fisher = 0.0;
  double silhouette = 0.0;
  double dispersion = 0.0;
  double synonym = 0.0;
  std::optional<double> inb;

  // Missing only for Inb when it was never attached.
  std::optional<double> get(Feature f) const noexcept;
  void set(Feature f, double value) noexcept;
};

struct NoiseConfig {
  double sigma = 0.1;
  std::uint64_t seed = 0;
};

// Cosine similarity, clamped to [-1, 1].
double cosine(std::span<const float> a, std::span<const float> b);

// Adds i.i.d. N(0, sigma^2) to every entry. Row r draws from a generator keyed
// by (seed, r), so output does not depend on evaluation order.
EmbeddingMatrix corrupt(const EmbeddingMatrix& m, const NoiseConfig& cfg);

struct TextClassification {
  double text_acc1 = 0.0;
  double text_f1 = 0.0;
};

// Nearest class weight by cosine (ties to the lowest class index) for every
// corrupted caption; accuracy and macro-F1 over all classes.
TextClassification text_classification(const EmbeddingMatrix& captions, const ClassWeights& w,
                                       const NoiseConfig& cfg);

double fisher_score(const ClassWeights& w);
double silhouette_score(const EmbeddingMatrix& captions, const ClassWeights& w);
double dispersion_score(const EmbeddingMatrix& captions, const ClassWeights& w);
double synonym_score(const EmbeddingMatrix& synonyms, const ClassWeights& w);

// All six scores for one bundle. Captions are L2-normalized before noise is
// added, so sigma is relative to unit-length embeddings.
ScoreVector score_pair(const EmbeddingBundle& bundle, const NoiseConfig& cfg,
                       std::optional<double> inb = std::nullopt);
ScoreVector score_pair(const EmbeddingBundle& bundle, const ClassWeights& w,
                       const NoiseConfig& cfg, std::optional<double> inb = std::nullopt);

}  // namespace lovm
