#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "lovm/ensemble.hpp"
#include "lovm/error.hpp"
#include "test_support.hpp"

namespace {

using namespace lovm;
using namespace lovm::testing;

double row_norm(std::span<const float> r) {
  double s = 0.0;
  for (float v : r) s += double(v) * v;
  return std::sqrt(s);
}

TEST(Ensemble, SingleTemplateIsNormalized) {
  const auto w = ensemble_prompts(matrix({{3, 4}, {0, 2}}, {0, 1}), 2);
  EXPECT_NEAR(w.row(0)[0], 0.6, 1e-7);
  EXPECT_NEAR(w.row(0)[1], 0.8, 1e-7);
  EXPECT_NEAR(w.row(1)[1], 1.0, 1e-7);
}

TEST(Ensemble, IdenticalTemplatesMatchOne) {
  const auto one = ensemble_prompts(matrix({{1, 2, 3}, {0, 1, 0}}, {0, 1}), 2);
  const auto two = ensemble_prompts(matrix({{1, 2, 3}, {1, 2, 3}, {0, 1, 0}}, {0, 0, 1}), 2);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(one.row(0)[k], two.row(0)[k], 1e-7);
}

TEST(Ensemble, OrthogonalTemplatesAverage) {
  const auto w = ensemble_prompts(matrix({{1, 0}, {0, 1}, {1, 0}}, {0, 0, 1}), 2);
  EXPECT_NEAR(w.row(0)[0], 1.0 / std::sqrt(2.0), 1e-7);
  EXPECT_NEAR(w.row(0)[1], 1.0 / std::sqrt(2.0), 1e-7);
}

TEST(Ensemble, UnevenTemplateNormsWeighEqually) {
  // Pre-normalization means a long template does not dominate.
  const auto w = ensemble_prompts(matrix({{100, 0}, {0, 1}, {1, 0}}, {0, 0, 1}), 2);
  EXPECT_NEAR(w.row(0)[0], w.row(0)[1], 1e-7);
}

TEST(Ensemble, Errors) {
  try {
    (void)ensemble_prompts(matrix({{1, 0}, {0, 1}}, {0, 0}), 2);
    FAIL();
  } catch (const LovmError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Missing);
  }
  try {
    (void)ensemble_prompts(matrix({{1, 0}, {0, 0}, {0, 1}}, {0, 0, 1}), 2);
    FAIL();
  } catch (const LovmError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroVector);
  }
  try {
    (void)ensemble_prompts(matrix({{1, 0}, {-1, 0}, {0, 1}}, {0, 0, 1}), 2);
    FAIL();
  } catch (const LovmError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
  }
}

TEST(Ensemble, RandomPropertiesHold) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> scale(0.01, 50.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t classes = 2 + trial % 4, dim = 4 + trial % 13, templates = 1 + trial % 5;
    std::vector<Vec> rows;
    std::vector<int> labels;
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t t = 0; t < templates; ++t) {
        rows.push_back(gaussian_vec(rng, dim));
        labels.push_back(static_cast<int>(c));
      }
    }
    const auto base = ensemble_prompts(matrix(rows, labels), classes);
    for (std::size_t c = 0; c < classes; ++c) EXPECT_NEAR(row_norm(base.row(c)), 1.0, 1e-5);

    // Reverse template order within each class.
    std::vector<Vec> permuted;
    std::vector<int> permuted_labels;
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t t = templates; t-- > 0;) {
        permuted.push_back(rows[c * templates + t]);
        permuted_labels.push_back(static_cast<int>(c));
      }
    }
    const auto p = ensemble_prompts(matrix(permuted, permuted_labels), classes);

    auto scaled = rows;
    const std::size_t victim = rng() % scaled.size();
    const double s = scale(rng);
    for (auto& v : scaled[victim]) v *= s;
    const auto sc = ensemble_prompts(matrix(scaled, labels), classes);

    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t k = 0; k < dim; ++k) {
        EXPECT_NEAR(p.row(c)[k], base.row(c)[k], 1e-7);
        EXPECT_NEAR(sc.row(c)[k], base.row(c)[k], 1e-6);
      }
    }
  }
}

}  // namespace
