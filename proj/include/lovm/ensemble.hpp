#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lovm/datastore.hpp"

namespace lovm {

// Zero-shot classifier weights: one unit-norm row per class.
class ClassWeights {
 public:
  ClassWeights(std::size_t dim, std::vector<float> values);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_classes() const noexcept { return values_.size() / dim_; }
  std::span<const float> row(std::size_t c) const noexcept {
    return {values_.data() + c * dim_, dim_};
  }

 private:
  std::size_t dim_;
  std::vector<float> values_;
};

// Prompt ensembling: L2-normalize every template embedding, average per
// class, renormalize the mean. Rows are grouped by their label's class index.
// Throws Missing for a class with no templates, ZeroVector for a zero row and
// Degenerate when a class mean has norm below 1e-8.
ClassWeights ensemble_prompts(const EmbeddingMatrix& per_template, std::size_t num_classes);

}  // namespace lovm
