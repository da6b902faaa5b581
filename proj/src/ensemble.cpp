#include "lovm/ensemble.hpp"

#include <cmath>
#include <string>

#include "lovm/error.hpp"
#include "lovm/kernels.hpp"

namespace lovm {

ClassWeights::ClassWeights(std::size_t dim, std::vector<float> values)
    : dim_(dim), values_(std::move(values)) {
  if (dim_ == 0 || values_.size() % dim_ != 0) {
    fail(ErrorKind::DimensionMismatch, "class weights: value count not a multiple of dim");
  }
}

ClassWeights ensemble_prompts(const EmbeddingMatrix& per_template, std::size_t num_classes) {
  const std::size_t dim = per_template.dim();
  const auto groups = per_template.rows_by_class(num_classes);
  std::vector<float> weights(num_classes * dim);
  std::vector<double> mean(dim);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (groups[c].empty()) {
      fail(ErrorKind::Missing, "class " + std::to_string(c) + " has no prompt templates");
    }
    std::fill(mean.begin(), mean.end(), 0.0);
    for (const std::size_t r : groups[c]) {
      const auto row = per_template.row(r);
      const double norm = std::sqrt(kernels::squared_norm(row));
      if (norm == 0.0) fail(ErrorKind::ZeroVector, "class_prompts: zero row " + std::to_string(r));
      for (std::size_t k = 0; k < dim; ++k) mean[k] += static_cast<double>(row[k]) / norm;
    }
    const double count = static_cast<double>(groups[c].size());
    double sq = 0.0;
    for (auto& v : mean) {
      v /= count;
      sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (norm < 1e-8) {
      fail(ErrorKind::Degenerate,
           "class " + std::to_string(c) + ": prompt templates cancel (mean norm < 1e-8)");
    }
    for (std::size_t k = 0; k < dim; ++k) weights[c * dim + k] = static_cast<float>(mean[k] / norm);
  }
  return ClassWeights(dim, std::move(weights));
}

}  // namespace lovm
