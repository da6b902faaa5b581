#include "lovm/benchmark.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>

#include "lovm/csv.hpp"
#include "lovm/error.hpp"
#include "lovm/metrics.hpp"
#include "lovm/parallel.hpp"

namespace lovm {

namespace fs = std::filesystem;

std::vector<fs::path> find_bundles(const fs::path& root) {
  if (fs::exists(root / "manifest.json")) return {root};
  if (!fs::is_directory(root)) fail(ErrorKind::Io, "not a bundle directory: " + root.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().filename() == "manifest.json") {
      out.push_back(entry.path().parent_path());
    }
  }
  if (out.empty()) fail(ErrorKind::Missing, "no bundles under " + root.string());
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t cell_seed(std::uint64_t seed, const ModelId& model, const DatasetId& dataset) {
  // FNV-1a over the ids, mixed with the run seed.
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  auto mix = [&h](std::string_view s) {
    for (const unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  mix(model.name);
  mix(model.pretrain);
  mix(dataset);
  return h;
}

ScoreTable score_bundles(const std::vector<fs::path>& bundles, const ScoreOptions& options) {
  struct Cell {
    ModelId model;
    DatasetId dataset;
    ScoreVector scores;
  };
  std::vector<Cell> cells(bundles.size());
  parallel_for(bundles.size(), options.jobs, [&](std::size_t i) {
    const EmbeddingBundle bundle = load_bundle(bundles[i]);
    const auto model = bundle.model();
    if (!model) {
      fail(ErrorKind::Missing, bundles[i].string() + ": provenance lacks model_name/pretrain");
    }
    const NoiseConfig noise{options.sigma, cell_seed(options.seed, *model, bundle.task.dataset)};
    cells[i] = {*model, bundle.task.dataset, score_pair(bundle, noise)};
  });
  ScoreTable table;
  for (auto& c : cells) {
    if (!table.emplace(std::pair{c.model, c.dataset}, c.scores).second) {
      fail(ErrorKind::Duplicate, "two bundles for (" + c.model.str() + ", " + c.dataset + ")");
    }
  }
  return table;
}

namespace {

const std::vector<std::string>& score_header() {
  static const std::vector<std::string> header{"model_name", "pretrain",  "dataset",
                                               "text_acc1",  "text_f1",   "fisher",
                                               "silhouette", "dispersion", "synonym"};
  return header;
}

constexpr Feature kCachedFeatures[] = {Feature::TextAcc1,   Feature::TextF1,     Feature::Fisher,
                                       Feature::Silhouette, Feature::Dispersion, Feature::Synonym};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

}  // namespace

void write_scores_csv(const ScoreTable& scores, const fs::path& path) {
  auto out = open_out(path);
  csv::write_row(out, score_header());
  for (const auto& [key, s] : scores) {
    csv::Row row{key.first.name, key.first.pretrain, key.second};
    for (const Feature f : kCachedFeatures) row.push_back(csv::format_double(*s.get(f)));
    csv::write_row(out, row);
  }
}

ScoreTable read_scores_csv(const fs::path& path) {
  const csv::Table t = csv::read(path);
  csv::require_header(t, score_header(), path.string());
  ScoreTable table;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = path.string() + " line " + std::to_string(t.lines[r]);
    if (row.size() != score_header().size()) fail(ErrorKind::Format, ctx + ": wrong field count");
    ScoreVector s;
    for (std::size_t i = 0; i < std::size(kCachedFeatures); ++i) {
      const double v = csv::parse_double(row[3 + i], ctx);
      if (!std::isfinite(v)) fail(ErrorKind::NonFinite, ctx + ": non-finite score");
      s.set(kCachedFeatures[i], v);
    }
    if (!table.emplace(std::pair{ModelId{row[0], row[1]}, row[2]}, s).second) {
      fail(ErrorKind::Duplicate, ctx + ": duplicate (model, dataset)");
    }
  }
  return table;
}

Baseline parse_baseline(const std::string& label) { return {label, parse_feature_set(label)}; }

std::vector<Baseline> parse_baselines(const std::string& list) {
  std::vector<Baseline> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    const std::string label = list.substr(start, comma - start);
    if (!label.empty()) out.push_back(parse_baseline(label));
    start = comma + 1;
  }
  if (out.empty()) fail(ErrorKind::InvalidArgument, "no baselines given");
  return out;
}

EvalReport run_benchmark(const ScoreTable& scores, const GroundTruthTable& gt,
                         const std::vector<Baseline>& baselines, Target target,
                         const EvalOptions& options) {
  EvalReport report;
  report.target = target;
  report.baselines = baselines;
  for (const auto& b : baselines) {
    report.results.push_back(evaluate_subset(scores, gt, b.features, target, options));
  }
  return report;
}

void write_eval_report(const EvalReport& report, const fs::path& path) {
  auto out = open_out(path);
  csv::write_row(out, {"baseline", "target", "dataset", "R5", "tau", "L1", "R2"});
  const std::string target = to_string(report.target);
  for (std::size_t i = 0; i < report.baselines.size(); ++i) {
    const auto& label = report.baselines[i].label;
    const auto& res = report.results[i];
    for (const auto& d : res.per_dataset) {
      csv::write_row(out, {label, target, d.dataset, csv::format_double(d.r5),
                           d.tau_defined ? csv::format_double(d.tau) : "0", csv::format_double(d.l1),
                           ""});
    }
    csv::write_row(out, {label, target, "mean", csv::format_double(res.mean_r5),
                         csv::format_double(res.mean_tau), csv::format_double(res.mean_l1),
                         csv::format_double(res.r2)});
  }
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const fs::path& path) {
  auto out = open_out(path);
  csv::write_row(out, {"subset", "features", "R5", "tau", "L1"});
  for (const auto& r : rows) {
    csv::write_row(out, {std::to_string(r.subset_id), feature_set_label(r.features),
                         csv::format_double(r.mean_r5), csv::format_double(r.mean_tau),
                         csv::format_double(r.mean_l1)});
  }
}

std::map<ModelId, ModelGroup> load_grouping_csv(const fs::path& path) {
  const csv::Table t = csv::read(path);
  csv::require_header(t, {"model_name", "pretrain", "family", "pretrain_class", "size_class"},
                      path.string());
  std::map<ModelId, ModelGroup> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row.size() != 5) {
      fail(ErrorKind::Format, path.string() + " line " + std::to_string(t.lines[r]) + ": wrong field count");
    }
    if (!out.emplace(ModelId{row[0], row[1]}, ModelGroup{row[2], row[3], row[4]}).second) {
      fail(ErrorKind::Duplicate, path.string() + ": duplicate model " + row[0] + ":" + row[1]);
    }
  }
  return out;
}

std::vector<TrendRow> score_trends(const ScoreTable& scores, const std::map<ModelId, ModelGroup>& grouping,
                                   const std::vector<ModelId>& model_order) {
  std::vector<ModelId> order = model_order;
  if (order.empty()) {
    for (const auto& [key, s] : scores) {
      if (order.empty() || order.back() != key.first) order.push_back(key.first);
    }
  }
  std::vector<TrendRow> rows;
  std::vector<std::array<double, 6>> sums;
  for (const auto& [key, s] : scores) {
    const auto g = grouping.find(key.first);
    if (g == grouping.end()) fail(ErrorKind::Missing, "model " + key.first.str() + " has no group");
  }
  for (const auto& model : order) {
    const auto g = grouping.find(model);
    if (g == grouping.end()) fail(ErrorKind::Missing, "model " + model.str() + " has no group");
    std::size_t idx = rows.size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].family == g->second.family && rows[i].pretrain_class == g->second.pretrain_class) {
        idx = i;
      }
    }
    if (idx == rows.size()) {
      rows.push_back({g->second.family, g->second.pretrain_class, 0, {}});
      sums.push_back({});
    }
    for (auto it = scores.lower_bound({model, DatasetId{}}); it != scores.end() && it->first.first == model;
         ++it) {
      ++rows[idx].cells;
      for (std::size_t f = 0; f < std::size(kCachedFeatures); ++f) {
        sums[idx][f] += *it->second.get(kCachedFeatures[f]);
      }
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].cells == 0) continue;
    for (std::size_t f = 0; f < std::size(kCachedFeatures); ++f) {
      rows[i].mean.set(kCachedFeatures[f], sums[i][f] / static_cast<double>(rows[i].cells));
    }
  }
  return rows;
}

void write_trends_csv(const std::vector<TrendRow>& rows, const fs::path& path) {
  auto out = open_out(path);
  csv::write_row(out, {"family", "pretrain_class", "cells", "text_acc1", "text_f1", "fisher",
                       "silhouette", "dispersion", "synonym"});
  for (const auto& r : rows) {
    csv::Row row{r.family, r.pretrain_class, std::to_string(r.cells)};
    for (const Feature f : kCachedFeatures) row.push_back(csv::format_double(*r.mean.get(f)));
    csv::write_row(out, row);
  }
}

std::vector<SigmaSweepRow> sigma_sweep(const std::vector<fs::path>& bundles, const GroundTruthTable& gt,
                                       const std::vector<double>& sigmas, std::uint64_t seed,
                                       std::size_t jobs) {
  if (sigmas.empty()) fail(ErrorKind::InvalidArgument, "sigma sweep: no sigma values");
  struct Prepared {
    ModelId model;
    DatasetId dataset;
    EmbeddingMatrix captions;
    std::optional<ClassWeights> weights;
    double truth = 0.0;
  };
  std::vector<Prepared> cells(bundles.size());
  parallel_for(bundles.size(), jobs, [&](std::size_t i) {
    const EmbeddingBundle b = load_bundle(bundles[i]);
    const auto model = b.model();
    if (!model) fail(ErrorKind::Missing, bundles[i].string() + ": provenance lacks model_name/pretrain");
    if (!b.captions) fail(ErrorKind::Missing, bundles[i].string() + ": no captions tensor");
    const auto m = gt.model_index(*model);
    const auto d = gt.dataset_index(b.task.dataset);
    cells[i] = {*model, b.task.dataset, l2_normalize(*b.captions),
                ensemble_prompts(b.class_prompts, b.task.num_classes()), gt.at(m, d).top1};
  });

  std::vector<SigmaSweepRow> rows;
  for (const double sigma : sigmas) {
    std::vector<double> acc(cells.size());
    parallel_for(cells.size(), jobs, [&](std::size_t i) {
      const auto& c = cells[i];
      const NoiseConfig noise{sigma, cell_seed(seed, c.model, c.dataset)};
      acc[i] = text_classification(c.captions, *c.weights, noise).text_acc1;
    });
    std::vector<double> truth;
    for (const auto& c : cells) truth.push_back(c.truth);
    SigmaSweepRow row;
    row.sigma = sigma;
    row.cells = cells.size();
    for (double a : acc) row.mean_text_acc1 += a;
    row.mean_text_acc1 /= static_cast<double>(cells.size());
    row.r2 = r_squared(acc, truth);
    row.pearson = pearson(acc, truth);
    rows.push_back(row);
  }
  return rows;
}

void write_sigma_sweep_csv(const std::vector<SigmaSweepRow>& rows, const fs::path& path) {
  auto out = open_out(path);
  csv::write_row(out, {"sigma", "cells", "mean_text_acc1", "r2", "pearson"});
  for (const auto& r : rows) {
    csv::write_row(out, {csv::format_double(r.sigma), std::to_string(r.cells),
                         csv::format_double(r.mean_text_acc1), csv::format_double(r.r2),
                         csv::format_double(r.pearson)});
  }
}

}  // namespace lovm
