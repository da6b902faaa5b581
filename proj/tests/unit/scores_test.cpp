#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "lovm/error.hpp"
#include "lovm/scores.hpp"
#include "test_support.hpp"

namespace {

using namespace lovm;
using namespace lovm::testing;

const double kR = 1.0 / std::sqrt(2.0);

TEST(Scores, CosineExamples) {
  const std::vector<float> e1{1, 0}, e2{0, 1}, d{1, 1}, v{0.3f, -2.0f};
  EXPECT_NEAR(cosine(e1, e2), 0.0, 1e-12);
  EXPECT_NEAR(cosine(v, v), 1.0, 1e-12);
  EXPECT_NEAR(cosine(d, e1), 0.70711, 1e-5);
  EXPECT_NEAR(cosine(d, e1), cosine(e1, d), 1e-15);
  const std::vector<float> zero{0, 0}, three{1, 2, 3};
  EXPECT_THROW((void)cosine(zero, e1), LovmError);
  EXPECT_THROW((void)cosine(three, e1), LovmError);
}

TEST(Scores, CorruptZeroSigmaIsIdentity) {
  std::mt19937_64 rng(1);
  const auto m = matrix({gaussian_vec(rng, 9), gaussian_vec(rng, 9)}, {0, 1});
  EXPECT_EQ(corrupt(m, {0.0, 42}), m);
}

TEST(Scores, CorruptIsDeterministic) {
  std::mt19937_64 rng(2);
  const auto m = matrix({gaussian_vec(rng, 9), gaussian_vec(rng, 9)}, {0, 1});
  EXPECT_EQ(corrupt(m, {0.3, 42}), corrupt(m, {0.3, 42}));
  EXPECT_NE(corrupt(m, {0.3, 42}), corrupt(m, {0.3, 43}));
}

TEST(Scores, CorruptNoiseEnergyMatchesChiSquare) {
  const std::size_t rows = 2000, dim = 512;
  EmbeddingMatrix m(dim, std::vector<float>(rows * dim, 0.0f), std::vector<RowLabel>(rows));
  const auto noisy = corrupt(m, {0.1, 7});
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (float v : noisy.row(r)) total += double(v) * v;
  }
  const double mean = total / rows;
  EXPECT_NEAR(mean, 5.12, 5.12 * 0.05);
}

TEST(Scores, TextClassificationTrivialCases) {
  const auto w = weights({{1, 0}, {0, 1}});
  const auto own = matrix({{1, 0}, {1, 0}, {0, 1}}, {0, 0, 1});
  const auto r = text_classification(own, w, {0.0, 0});
  EXPECT_DOUBLE_EQ(r.text_acc1, 1.0);
  EXPECT_DOUBLE_EQ(r.text_f1, 1.0);
  const auto other = matrix({{0, 1}, {1, 0}}, {0, 1});
  EXPECT_DOUBLE_EQ(text_classification(other, w, {0.0, 0}).text_acc1, 0.0);
  EXPECT_THROW((void)text_classification(EmbeddingMatrix{}, w, {0.0, 0}), LovmError);
}

TEST(Scores, TextClassificationMacroF1) {
  const auto w = weights({{1, 0}, {0, 1}});
  const auto caps = matrix({{1, 0}, {1, 0}, {0, 1}, {0, 1}, {0, 1}, {0, 1}}, {0, 0, 0, 1, 1, 1});
  const auto r = text_classification(caps, w, {0.0, 0});
  EXPECT_NEAR(r.text_acc1, 5.0 / 6.0, 1e-12);
  EXPECT_NEAR(r.text_f1, (0.8 + 6.0 / 7.0) / 2.0, 1e-12);
  EXPECT_NEAR(r.text_f1, 0.8286, 1e-4);
}

TEST(Scores, TextClassificationTiesGoToLowestIndex) {
  const auto w = weights({{1, 0}, {0, 1}});
  const auto caps = matrix({{1, 1}, {1, 1}}, {0, 1});
  EXPECT_DOUBLE_EQ(text_classification(caps, w, {0.0, 0}).text_acc1, 0.5);
}

// Brute-force nearest-class oracle with an independent confusion matrix.
TEST(Scores, TextClassificationMatchesOracle) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t C = 2 + rng() % 4, N = 1 + rng() % 20, dim = 3 + rng() % 6;
    std::vector<Vec> w_rows;
    for (std::size_t c = 0; c < C; ++c) w_rows.push_back(gaussian_vec(rng, dim));
    const auto w = weights(w_rows);
    std::vector<Vec> rows;
    std::vector<int> labels;
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t k = 0; k < N; ++k) {
        rows.push_back(gaussian_vec(rng, dim));
        labels.push_back(static_cast<int>(c));
      }
    }
    const auto caps = matrix(rows, labels);
    std::vector<std::vector<double>> confusion(C, std::vector<double>(C, 0.0));
    for (std::size_t r = 0; r < caps.rows(); ++r) {
      std::size_t best = 0;
      double best_cos = -2.0;
      for (std::size_t c = 0; c < C; ++c) {
        const double s = oracle_cosine(caps.row(r), w.row(c));
        if (s > best_cos) {
          best_cos = s;
          best = c;
        }
      }
      confusion[static_cast<std::size_t>(labels[r])][best] += 1.0;
    }
    double correct = 0.0, f1 = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      correct += confusion[c][c];
      double predicted = 0.0, actual = 0.0;
      for (std::size_t j = 0; j < C; ++j) {
        predicted += confusion[j][c];
        actual += confusion[c][j];
      }
      const double p = predicted > 0 ? confusion[c][c] / predicted : 0.0;
      const double rc = actual > 0 ? confusion[c][c] / actual : 0.0;
      f1 += (p + rc) > 0 ? 2 * p * rc / (p + rc) : 0.0;
    }
    const auto got = text_classification(caps, w, {0.0, 0});
    EXPECT_NEAR(got.text_acc1, correct / caps.rows(), 1e-12);
    EXPECT_NEAR(got.text_f1, f1 / C, 1e-12);
  }
}

TEST(Scores, FisherExamples) {
  EXPECT_NEAR(fisher_score(weights({{1, 0}, {0, 1}})), 0.0, 1e-12);
  EXPECT_NEAR(fisher_score(weights({{1, 2}, {1, 2}})), 1.0, 1e-7);
  EXPECT_NEAR(fisher_score(weights({{1, 0}, {0, 1}, {kR, kR}})), 0.70711, 1e-5);
  EXPECT_THROW((void)fisher_score(weights({{1, 0}})), LovmError);
}

TEST(Scores, SilhouetteExamples) {
  const auto w = weights({{1, 0}, {0, 1}});
  EXPECT_NEAR(silhouette_score(matrix({{0, 1}, {1, 0}}, {0, 1}), w), 1.0, 1e-7);
  const auto w3 = weights({{1, 0, 0}, {0, 1, 0}});
  EXPECT_NEAR(silhouette_score(matrix({{0, 0, 1}, {0, 0, 1}}, {0, 1}), w3), 0.0, 1e-12);
  EXPECT_NEAR(silhouette_score(matrix({{1, 0}, {kR, kR}, {0, 1}}, {0, 0, 1}), w), 0.17678, 1e-5);
  EXPECT_THROW((void)silhouette_score(matrix({{1, 0}}, {0}), w), LovmError);
}

TEST(Scores, DispersionAndSynonymExamples) {
  const auto w = weights({{1, 0}, {0, 1}});
  EXPECT_NEAR(dispersion_score(matrix({{1, 0}, {0, 1}}, {0, 1}), w), 1.0, 1e-7);
  EXPECT_NEAR(dispersion_score(matrix({{0, 1}, {1, 0}}, {0, 1}), w), 0.0, 1e-12);
  const auto mixed = matrix({{1, 0}, {0, 1}, {0, 1}}, {0, 0, 1});
  EXPECT_NEAR(dispersion_score(mixed, w), 0.75, 1e-12);
  EXPECT_NEAR(synonym_score(matrix({{1, 0}, {0, 1}}, {0, 1}), w), 1.0, 1e-7);
  EXPECT_NEAR(synonym_score(matrix({{0, 1}, {1, 0}}, {0, 1}), w), 0.0, 1e-12);
  EXPECT_NEAR(synonym_score(mixed, w), 0.75, 1e-12);
  EXPECT_THROW((void)dispersion_score(matrix({{1, 0}}, {0}), w), LovmError);
}

EmbeddingBundle orthogonal_bundle() {
  EmbeddingBundle b;
  b.task = {"toy", {"a", "b"}, "natural image", "classification"};
  b.class_prompts = matrix({{1, 0}, {0, 1}}, {0, 1});
  b.captions = matrix({{1, 0}, {2, 0}, {0, 1}}, {0, 0, 1});
  b.synonyms = matrix({{1, 0}, {0, 3}}, {0, 1});
  return b;
}

TEST(Scores, ScorePairComposition) {
  const auto s = score_pair(orthogonal_bundle(), {0.0, 0}, 0.7);
  EXPECT_NEAR(s.text_acc1, 1.0, 1e-12);
  EXPECT_NEAR(s.text_f1, 1.0, 1e-12);
  EXPECT_NEAR(s.fisher, 0.0, 1e-12);
  EXPECT_NEAR(s.silhouette, 0.0, 1e-12);
  EXPECT_NEAR(s.dispersion, 1.0, 1e-7);
  EXPECT_NEAR(s.synonym, 1.0, 1e-7);
  ASSERT_TRUE(s.inb.has_value());
  EXPECT_DOUBLE_EQ(*s.inb, 0.7);
}

TEST(Scores, ScorePairDegenerateBundle) {
  EmbeddingBundle b;
  b.task = {"toy", {"a", "b", "c"}, "", ""};
  const std::vector<Vec> w{{1, 0}, {0, 1}, {kR, kR}};
  b.class_prompts = matrix(w, {0, 1, 2});
  b.captions = b.class_prompts;
  b.synonyms = b.class_prompts;
  const auto s = score_pair(b, {0.0, 0});
  const auto weights_ = ensemble_prompts(b.class_prompts, 3);
  EXPECT_NEAR(s.text_acc1, 1.0, 1e-12);
  EXPECT_NEAR(s.text_f1, 1.0, 1e-12);
  EXPECT_NEAR(s.fisher, fisher_score(weights_), 1e-12);
  EXPECT_NEAR(s.silhouette, fisher_score(weights_), 1e-7);
  EXPECT_NEAR(s.dispersion, 1.0, 1e-7);
  EXPECT_NEAR(s.synonym, 1.0, 1e-7);
}

TEST(Scores, MissingTensorsNamed) {
  auto b = orthogonal_bundle();
  b.synonyms.reset();
  try {
    (void)score_pair(b, {0.0, 0});
    FAIL();
  } catch (const LovmError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Missing);
    EXPECT_NE(std::string(e.what()).find("synonyms"), std::string::npos);
  }
  b = orthogonal_bundle();
  b.captions.reset();
  EXPECT_THROW((void)score_pair(b, {0.0, 0}), LovmError);
}

TEST(Scores, RangesOnRandomInputs) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    SyntheticTask t;
    t.classes = 2 + trial % 5;
    t.dim = 4 + trial % 20;
    t.spread = 0.2 + 0.05 * (trial % 30);
    const auto s = score_pair(synthetic_bundle(rng, t), {0.1, static_cast<std::uint64_t>(trial)});
    for (double v : {s.fisher, s.silhouette, s.dispersion, s.synonym}) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
    for (double v : {s.text_acc1, s.text_f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Scores, FeatureNames) {
  for (Feature f : kAllFeatures) EXPECT_EQ(parse_feature(feature_name(f)), f);
  EXPECT_THROW((void)parse_feature("bogus"), LovmError);
}

}  // namespace
