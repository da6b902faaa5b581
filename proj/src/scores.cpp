#include "lovm/scores.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "lovm/error.hpp"
#include "lovm/kernels.hpp"

namespace lovm {

std::string_view feature_name(Feature f) noexcept {
  switch (f) {
    case Feature::Inb: return "inb";
    case Feature::TextAcc1: return "text_acc1";
    case Feature::TextF1: return "text_f1";
    case Feature::Fisher: return "fisher";
    case Feature::Silhouette: return "silhouette";
    case Feature::Dispersion: return "dispersion";
    case Feature::Synonym: return "synonym";
  }
  return "unknown";
}

Feature parse_feature(std::string_view name) {
  for (const Feature f : kAllFeatures) {
    if (feature_name(f) == name) return f;
  }
  fail(ErrorKind::InvalidArgument, "unknown feature '" + std::string(name) + "'");
}

std::optional<double> ScoreVector::get(Feature f) const noexcept {
  switch (f) {
    case Feature::Inb: return inb;
    case Feature::TextAcc1: return text_acc1;
    case Feature::TextF1: return text_f1;
    case Feature::Fisher: return fisher;
    case Feature::Silhouette: return silhouette;
    case Feature::Dispersion: return dispersion;
    case Feature::Synonym: return synonym;
  }
  return std::nullopt;
}

void ScoreVector::set(Feature f, double value) noexcept {
  switch (f) {
    case Feature::Inb: inb = value; break;
    case Feature::TextAcc1: text_acc1 = value; break;
    case Feature::TextF1: text_f1 = value; break;
    case Feature::Fisher: fisher = value; break;
    case Feature::Silhouette: silhouette = value; break;
    case Feature::Dispersion: dispersion = value; break;
    case Feature::Synonym: synonym = value; break;
  }
}

namespace {

double norm_of(std::span<const float> v, const char* what) {
  const double n = std::sqrt(kernels::squared_norm(v));
  if (n == 0.0) fail(ErrorKind::ZeroVector, std::string("cosine: zero ") + what + " vector");
  return n;
}

double clamp_unit(double v) noexcept { return std::clamp(v, -1.0, 1.0); }

std::vector<double> weight_norms(const ClassWeights& w) {
  std::vector<double> norms(w.num_classes());
  for (std::size_t c = 0; c < norms.size(); ++c) norms[c] = norm_of(w.row(c), "class weight");
  return norms;
}

void check_dim(const EmbeddingMatrix& m, const ClassWeights& w, const char* name) {
  if (m.dim() != w.dim()) {
    fail(ErrorKind::DimensionMismatch, std::string(name) + ": dim " + std::to_string(m.dim()) +
                                           " vs class weights dim " + std::to_string(w.dim()));
  }
}

// cos(row_r, y^c) for every row r and class c, row-major R x C.
std::vector<double> cosine_table(const EmbeddingMatrix& m, const ClassWeights& w) {
  const std::size_t num_classes = w.num_classes();
  const auto wn = weight_norms(w);
  std::vector<double> out(m.rows() * num_classes);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    const double rn = norm_of(row, "embedding");
    for (std::size_t c = 0; c < num_classes; ++c) {
      out[r * num_classes + c] = clamp_unit(kernels::dot(row, w.row(c)) / (rn * wn[c]));
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> nonempty_groups(const EmbeddingMatrix& m, std::size_t classes,
                                                      const char* name) {
  auto groups = m.rows_by_class(classes);
  for (std::size_t c = 0; c < groups.size(); ++c) {
    if (groups[c].empty()) {
      fail(ErrorKind::Missing, std::string(name) + ": class " + std::to_string(c) + " has no rows");
    }
  }
  return groups;
}

// Mean over classes of the mean own-class cosine (classes weighted equally).
double own_class_similarity(const EmbeddingMatrix& m, const ClassWeights& w, const char* name) {
  check_dim(m, w, name);
  const std::size_t num_classes = w.num_classes();
  const auto groups = nonempty_groups(m, num_classes, name);
  const auto cos = cosine_table(m, w);
  double total = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    double sum = 0.0;
    for (const std::size_t r : groups[c]) sum += cos[r * num_classes + c];
    total += sum / static_cast<double>(groups[c].size());
  }
  return total / static_cast<double>(num_classes);
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    fail(ErrorKind::DimensionMismatch, "cosine: dims " + std::to_string(a.size()) + " and " +
                                           std::to_string(b.size()));
  }
  const double na = norm_of(a, "first");
  const double nb = norm_of(b, "second");
  return clamp_unit(kernels::dot(a, b) / (na * nb));
}

EmbeddingMatrix corrupt(const EmbeddingMatrix& m, const NoiseConfig& cfg) {
  if (!(cfg.sigma >= 0.0) || !std::isfinite(cfg.sigma)) {
    fail(ErrorKind::InvalidArgument, "noise sigma must be finite and >= 0");
  }
  EmbeddingMatrix out = m;
  if (cfg.sigma == 0.0) return out;
  out.set_unit_norm(false);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    std::mt19937_64 gen(splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(r))));
    std::normal_distribution<double> noise(0.0, cfg.sigma);
    for (auto& v : out.row(r)) v = static_cast<float>(static_cast<double>(v) + noise(gen));
  }
  return out;
}

TextClassification text_classification(const EmbeddingMatrix& captions, const ClassWeights& w,
                                       const NoiseConfig& cfg) {
  if (captions.empty()) fail(ErrorKind::Missing, "captions: empty caption set");
  check_dim(captions, w, "captions");
  const std::size_t num_classes = w.num_classes();
  const EmbeddingMatrix noisy = corrupt(captions, cfg);
  const auto cos = cosine_table(noisy, w);

  std::vector<std::size_t> tp(num_classes, 0), predicted(num_classes, 0), actual(num_classes, 0);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < noisy.rows(); ++r) {
    const int truth = noisy.label(r).class_index;
    if (truth < 0 || static_cast<std::size_t>(truth) >= num_classes) {
      fail(ErrorKind::OutOfRange, "captions: row " + std::to_string(r) + " class index " +
                                      std::to_string(truth) + " not covered by class weights");
    }
    std::size_t best = 0;
    double best_cos = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < num_classes; ++c) {
      const double v = cos[r * num_classes + c];
      if (v > best_cos) {
        best_cos = v;
        best = c;
      }
    }
    const auto t = static_cast<std::size_t>(truth);
    ++predicted[best];
    ++actual[t];
    if (best == t) {
      ++tp[t];
      ++correct;
    }
  }

  double f1_sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double precision = predicted[c] ? static_cast<double>(tp[c]) / predicted[c] : 0.0;
    const double recall = actual[c] ? static_cast<double>(tp[c]) / actual[c] : 0.0;
    if (precision + recall > 0.0) f1_sum += 2.0 * precision * recall / (precision + recall);
  }
  return {static_cast<double>(correct) / static_cast<double>(noisy.rows()),
          f1_sum / static_cast<double>(num_classes)};
}

double fisher_score(const ClassWeights& w) {
  const std::size_t num_classes = w.num_classes();
  if (num_classes < 2) fail(ErrorKind::InsufficientData, "fisher score needs at least 2 classes");
  const auto wn = weight_norms(w);
  std::vector<double> nearest(num_classes, -std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < num_classes; ++j) {
    for (std::size_t c = j + 1; c < num_classes; ++c) {
      const double v = clamp_unit(kernels::dot(w.row(j), w.row(c)) / (wn[j] * wn[c]));
      nearest[j] = std::max(nearest[j], v);
      nearest[c] = std::max(nearest[c], v);
    }
  }
  double total = 0.0;
  for (const double v : nearest) total += v;
  return total / static_cast<double>(num_classes);
}

double silhouette_score(const EmbeddingMatrix& captions, const ClassWeights& w) {
  check_dim(captions, w, "captions");
  const std::size_t num_classes = w.num_classes();
  if (num_classes < 2) fail(ErrorKind::InsufficientData, "silhouette score needs at least 2 classes");
  const auto groups = nonempty_groups(captions, num_classes, "captions");
  const auto cos = cosine_table(captions, w);
  double total = 0.0;
  std::vector<double> sums(num_classes);
  for (std::size_t j = 0; j < num_classes; ++j) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (const std::size_t r : groups[j]) {
      for (std::size_t c = 0; c < num_classes; ++c) sums[c] += cos[r * num_classes + c];
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < num_classes; ++c) {
      if (c != j) best = std::max(best, sums[c] / static_cast<double>(groups[j].size()));
    }
    total += best;
  }
  return total / static_cast<double>(num_classes);
}

double dispersion_score(const EmbeddingMatrix& captions, const ClassWeights& w) {
  return own_class_similarity(captions, w, "captions");
}

double synonym_score(const EmbeddingMatrix& synonyms, const ClassWeights& w) {
  return own_class_similarity(synonyms, w, "synonyms");
}

ScoreVector score_pair(const EmbeddingBundle& bundle, const NoiseConfig& cfg,
                       std::optional<double> inb) {
  const ClassWeights w = ensemble_prompts(bundle.class_prompts, bundle.task.num_classes());
  return score_pair(bundle, w, cfg, inb);
}

ScoreVector score_pair(const EmbeddingBundle& bundle, const ClassWeights& w,
                       const NoiseConfig& cfg, std::optional<double> inb) {
  if (!bundle.captions) fail(ErrorKind::Missing, "bundle has no captions tensor");
  if (!bundle.synonyms) fail(ErrorKind::Missing, "bundle has no synonyms tensor");
  if (w.num_classes() != bundle.task.num_classes()) {
    fail(ErrorKind::DimensionMismatch, "class weights cover " + std::to_string(w.num_classes()) +
                                           " classes, task has " +
                                           std::to_string(bundle.task.num_classes()));
  }
  const EmbeddingMatrix captions = l2_normalize(*bundle.captions);
  ScoreVector s;
  const auto tc = text_classification(captions, w, cfg);
  s.text_acc1 = tc.text_acc1;
  s.text_f1 = tc.text_f1;
  s.fisher = fisher_score(w);
  s.silhouette = silhouette_score(captions, w);
  s.dispersion = dispersion_score(captions, w);
  s.synonym = synonym_score(*bundle.synonyms, w);
  s.inb = inb;
  return s;
}

}  // namespace lovm
