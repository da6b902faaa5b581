#include <fstream>
#include <random>

#include "gtest/gtest.h"
#include "lovm/benchmark.hpp"
#include "lovm/error.hpp"
#include "test_support.hpp"

namespace {

using namespace lovm;
using namespace lovm::testing;
namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Benchmark, InbOnConstantRankingIsPerfect) {
  std::mt19937_64 rng(1);
  auto grid = linear_grid(rng, 6, 5, 0.0, 0.0, 0.0, 0.0);
  // Ground truth follows the ImageNet order on every dataset.
  for (std::size_t m = 0; m < 6; ++m) {
    for (std::size_t d = 0; d < 5; ++d) {
      const double v = 0.2 + 0.1 * double(m) + 0.01 * double(d);
      grid.gt.at(m, d) = GtEntry{v, v};
    }
  }
  const auto report = run_benchmark(grid.scores, grid.gt, {parse_baseline("INB")}, Target::Top1);
  for (const auto& d : report.results[0].per_dataset) EXPECT_DOUBLE_EQ(d.r5, 1.0);
}

TEST(Benchmark, ExactLinearTruthGivesZeroError) {
  std::mt19937_64 rng(2);
  const auto grid = linear_grid(rng, 6, 5, 0.3, 0.2, 0.1, 0.0);
  const auto report =
      run_benchmark(grid.scores, grid.gt, {parse_baseline("fisher+dispersion")}, Target::Top1);
  EXPECT_LE(report.results[0].mean_l1, 1e-6);
  EXPECT_NEAR(report.results[0].r2, 1.0, 1e-9);
}

TEST(Benchmark, BaselineParsing) {
  const auto b = parse_baselines("INB,C,G+C");
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[2].label, "G+C");
  EXPECT_EQ(b[2].features.size(), 6u);
  EXPECT_THROW((void)parse_baselines(""), LovmError);
}

TEST(Benchmark, EvalReportLayout) {
  std::mt19937_64 rng(3);
  const auto grid = linear_grid(rng, 6, 3, 0.3, 0.2, 0.1, 0.01);
  const auto report = run_benchmark(grid.scores, grid.gt, parse_baselines("INB,G"), Target::Mpcr);
  const auto dir = temp_dir("eval_report");
  write_eval_report(report, dir / "r.csv");
  const auto text = slurp(dir / "r.csv");
  EXPECT_EQ(text.rfind("baseline,target,dataset,R5,tau,L1,R2\n", 0), 0u);
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  EXPECT_EQ(lines, 1u + 2 * (3 + 1));
  EXPECT_NE(text.find("INB,mpcr,mean,"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Benchmark, ScoresCsvRoundTrip) {
  std::mt19937_64 rng(4);
  const auto grid = linear_grid(rng, 3, 2, 0.3, 0.2, 0.1, 0.01);
  const auto dir = temp_dir("scores_csv");
  write_scores_csv(grid.scores, dir / "s.csv");
  const auto back = read_scores_csv(dir / "s.csv");
  ASSERT_EQ(back.size(), grid.scores.size());
  for (const auto& [key, s] : grid.scores) {
    const auto& t = back.at(key);
    EXPECT_EQ(t.fisher, s.fisher);
    EXPECT_EQ(t.text_acc1, s.text_acc1);
    EXPECT_EQ(t.synonym, s.synonym);
  }
  std::ofstream(dir / "bad.csv") << "model_name,pretrain,dataset,text_acc1\n";
  EXPECT_THROW((void)read_scores_csv(dir / "bad.csv"), LovmError);
  fs::remove_all(dir);
}

TEST(Benchmark, ScoreBundlesDeterministicAcrossJobs) {
  const auto dir = temp_dir("score_bundles");
  const auto disk = write_disk_benchmark(dir, 5, 3, 2);
  const auto paths = find_bundles(disk.bundles);
  ASSERT_EQ(paths.size(), 6u);
  const auto a = score_bundles(paths, {0.1, 7, 1});
  const auto b = score_bundles(paths, {0.1, 7, 4});
  ASSERT_EQ(a.size(), 6u);
  for (const auto& [key, s] : a) {
    EXPECT_EQ(s.text_acc1, b.at(key).text_acc1);
    EXPECT_EQ(s.text_f1, b.at(key).text_f1);
    EXPECT_EQ(s.fisher, b.at(key).fisher);
  }
  auto dup = paths;
  dup.push_back(paths.front());
  EXPECT_THROW((void)score_bundles(dup, {0.1, 7, 1}), LovmError);
  fs::remove_all(dir);
}

TEST(Benchmark, CellSeedsDiffer) {
  EXPECT_NE(cell_seed(1, {"a", "b"}, "x"), cell_seed(1, {"a", "b"}, "y"));
  EXPECT_NE(cell_seed(1, {"a", "b"}, "x"), cell_seed(2, {"a", "b"}, "x"));
  EXPECT_EQ(cell_seed(1, {"a", "b"}, "x"), cell_seed(1, {"a", "b"}, "x"));
}

ScoreTable constant_scores(const std::vector<std::pair<ModelId, double>>& models, std::size_t datasets) {
  ScoreTable t;
  for (const auto& [m, v] : models) {
    for (std::size_t d = 0; d < datasets; ++d) {
      ScoreVector s;
      for (Feature f : kAllFeatures) {
        if (f != Feature::Inb) s.set(f, v);
      }
      t[{m, "d" + std::to_string(d)}] = s;
    }
  }
  return t;
}

TEST(Benchmark, TrendsExamples) {
  const ModelId a{"a", "x"}, b{"b", "x"}, c{"c", "y"};
  std::map<ModelId, ModelGroup> one{{a, {"ViT", "laion", "B"}}, {b, {"ViT", "laion", "L"}}};
  const auto single = score_trends(constant_scores({{a, 0.2}, {b, 0.6}}, 3), one);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_NEAR(single[0].mean.fisher, 0.4, 1e-12);
  EXPECT_EQ(single[0].cells, 6u);

  std::map<ModelId, ModelGroup> two{{a, {"ViT", "laion", "B"}}, {c, {"RN", "openai", "B"}}};
  const auto split = score_trends(constant_scores({{a, 0.2}, {c, 0.4}}, 2), two);
  ASSERT_EQ(split.size(), 2u);
  EXPECT_NEAR(split[0].mean.dispersion, 0.2, 1e-12);
  EXPECT_NEAR(split[1].mean.dispersion, 0.4, 1e-12);

  EXPECT_THROW((void)score_trends(constant_scores({{a, 0.2}, {b, 0.4}}, 2), two), LovmError);
}

TEST(Benchmark, TrendsMatchBruteForce) {
  std::mt19937_64 rng(6);
  const auto grid = linear_grid(rng, 8, 4, 0.3, 0.2, 0.1, 0.01);
  std::map<ModelId, ModelGroup> groups;
  for (std::size_t m = 0; m < 8; ++m) {
    groups[grid.gt.models()[m]] = {m % 2 ? "ViT" : "RN", m % 3 ? "laion" : "openai", "B"};
  }
  const auto rows = score_trends(grid.scores, groups);
  for (const auto& row : rows) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& [key, s] : grid.scores) {
      const auto& g = groups.at(key.first);
      if (g.family == row.family && g.pretrain_class == row.pretrain_class) {
        sum += s.silhouette;
        ++n;
      }
    }
    EXPECT_EQ(row.cells, n);
    EXPECT_NEAR(row.mean.silhouette, sum / double(n), 1e-12);
  }
}

TEST(Benchmark, SigmaSweepRuns) {
  const auto dir = temp_dir("sweep");
  const auto disk = write_disk_benchmark(dir, 8, 3, 2);
  const auto gt = load_gt_table(disk.gt);
  const auto rows = sigma_sweep(find_bundles(disk.bundles), gt, {0.0, 0.5}, 3, 2);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].cells, 6u);
  EXPECT_GE(rows[0].mean_text_acc1, rows[1].mean_text_acc1);
  EXPECT_THROW((void)sigma_sweep(find_bundles(disk.bundles), gt, {}, 3), LovmError);
  fs::remove_all(dir);
}

TEST(Benchmark, RemovingDatasetOnlyTouchesItsRows) {
  std::mt19937_64 rng(9);
  const auto grid = linear_grid(rng, 6, 4, 0.3, 0.2, 0.1, 0.01);
  const auto full = evaluate_subset(grid.scores, grid.gt, {Feature::Inb}, Target::Top1);
  GroundTruthTable smaller;
  ScoreTable fewer;
  for (std::size_t m = 0; m < 6; ++m) {
    smaller.set_imagenet_top1(grid.gt.models()[m], *grid.gt.imagenet_top1(m));
    for (std::size_t d = 0; d < 3; ++d) {
      smaller.set(grid.gt.models()[m], grid.gt.datasets()[d], grid.gt.at(m, d));
      fewer[{grid.gt.models()[m], grid.gt.datasets()[d]}] = grid.scores.at({grid.gt.models()[m], grid.gt.datasets()[d]});
    }
  }
  const auto part = evaluate_subset(fewer, smaller, {Feature::Inb}, Target::Top1);
  for (std::size_t d = 0; d < 3; ++d) {
    EXPECT_EQ(part.per_dataset[d].r5, full.per_dataset[d].r5);
    EXPECT_EQ(part.per_dataset[d].tau, full.per_dataset[d].tau);
    EXPECT_EQ(part.per_dataset[d].l1, full.per_dataset[d].l1);
  }
}

}  // namespace
