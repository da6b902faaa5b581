#pragma once
// Full benchmark runs: scoring every (model, dataset) bundle, evaluating
// baseline feature subsets under both hold-out protocols, the noise sweep
// and score-trend aggregation. All tables are CSV.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lovm/datastore.hpp"
#include "lovm/predictor.hpp"
#include "lovm/scores.hpp"

namespace lovm {

// Directories holding a manifest.json: `root` itself, or every such
// directory below it, sorted by path.
std::vector<std::filesystem::path> find_bundles(const std::filesystem::path& root);

// Noise seed for one grid cell, derived from the run seed and the cell's ids
// so that results do not depend on scheduling.
std::uint64_t cell_seed(std::uint64_t seed, const ModelId& model, const DatasetId& dataset);

struct ScoreOptions {
  double sigma = 0.1;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

// Scores each bundle; model identity comes from the bundle provenance.
ScoreTable score_bundles(const std::vector<std::filesystem::path>& bundles, const ScoreOptions& options);

void write_scores_csv(const ScoreTable& scores, const std::filesystem::path& path);
ScoreTable read_scores_csv(const std::filesystem::path& path);

struct Baseline {
  std::string label;  // as written, e.g. "INB+G"
  std::vector<Feature> features;
};

Baseline parse_baseline(const std::string& label);
// Comma-separated list, e.g. "INB,C,G,INB+C,INB+G,INB+G+C".
std::vector<Baseline> parse_baselines(const std::string& list);

struct EvalReport {
  Target target = Target::Mpcr;
  std::vector<Baseline> baselines;
  std::vector<SubsetEval> results;  // aligned with baselines
};

EvalReport run_benchmark(const ScoreTable& scores, const GroundTruthTable& gt,
                         const std::vector<Baseline>& baselines, Target target,
                         const EvalOptions& options = {});

// baseline,target,dataset,R5,tau,L1,R2 - one row per dataset, then a "mean"
// row per baseline carrying R2.
void write_eval_report(const EvalReport& report, const std::filesystem::path& path);

// subset,features,R5,tau,L1
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path);

struct ModelGroup {
  std::string family;
  std::string pretrain_class;
  std::string size_class;
};

std::map<ModelId, ModelGroup> load_grouping_csv(const std::filesystem::path& path);

struct TrendRow {
  std::string family;
  std::string pretrain_class;
  std::size_t cells = 0;
  ScoreVector mean;
};

// Mean of each score over all (model, dataset) cells in each
// (family, pretrain_class) group, groups in first-appearance order.
std::vector<TrendRow> score_trends(const ScoreTable& scores, const std::map<ModelId, ModelGroup>& grouping,
                                   const std::vector<ModelId>& model_order = {});
void write_trends_csv(const std::vector<TrendRow>& rows, const std::filesystem::path& path);

struct SigmaSweepRow {
  double sigma = 0.0;
  std::size_t cells = 0;
  double mean_text_acc1 = 0.0;
  double r2 = 0.0;       // text_acc1 as a prediction of GT top-1, no refit
  double pearson = 0.0;
};

std::vector<SigmaSweepRow> sigma_sweep(const std::vector<std::filesystem::path>& bundles,
                                       const GroundTruthTable& gt, const std::vector<double>& sigmas,
                                       std::uint64_t seed, std::size_t jobs = 1);
void write_sigma_sweep_csv(const std::vector<SigmaSweepRow>& rows, const std::filesystem::path& path);

}  // namespace lovm
