#include "lovm/predictor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "lovm/error.hpp"
#include "lovm/metrics.hpp"
#include "lovm/parallel.hpp"

namespace lovm {

std::vector<Feature> parse_feature_set(const std::string& text) {
  std::vector<bool> on(kAllFeatures.size(), false);
  auto enable = [&](Feature f) { on[static_cast<std::size_t>(f)] = true; };
  std::size_t start = 0;
  bool any = false;
  while (start <= text.size()) {
    const std::size_t plus = std::min(text.find('+', start), text.size());
    const std::string token = text.substr(start, plus - start);
    start = plus + 1;
    if (token.empty()) fail(ErrorKind::InvalidArgument, "empty token in feature set '" + text + "'");
    any = true;
    if (token == "INB") {
      enable(Feature::Inb);
    } else if (token == "C") {
      enable(Feature::TextAcc1);
      enable(Feature::TextF1);
    } else if (token == "G") {
      enable(Feature::Fisher);
      enable(Feature::Silhouette);
      enable(Feature::Dispersion);
      enable(Feature::Synonym);
    } else if (token == "ALL") {
      for (const Feature f : kAllFeatures) enable(f);
    } else {
      enable(parse_feature(token));
    }
    if (plus == text.size()) break;
  }
  if (!any) fail(ErrorKind::InvalidArgument, "empty feature set");
  std::vector<Feature> out;
  for (const Feature f : kAllFeatures) {
    if (on[static_cast<std::size_t>(f)]) out.push_back(f);
  }
  return out;
}

std::string feature_set_label(std::span<const Feature> features) {
  std::string out;
  for (const Feature f : features) {
    if (!out.empty()) out += '+';
    out += feature_name(f);
  }
  return out;
}

FeatureTable FeatureTable::build(const ScoreTable& scores, const GroundTruthTable& gt,
                                 std::vector<Feature> features, Target target) {
  if (features.empty()) fail(ErrorKind::InvalidArgument, "feature table needs at least one feature");
  if (!gt.dense()) fail(ErrorKind::Missing, "ground-truth grid is not dense");
  FeatureTable t;
  t.features_ = std::move(features);
  t.target_ = target;
  t.models_ = gt.models();
  t.datasets_ = gt.datasets();
  const std::size_t k = t.features_.size();
  const std::size_t num_models = t.models_.size();
  const std::size_t num_datasets = t.datasets_.size();
  const bool wants_inb =
      std::find(t.features_.begin(), t.features_.end(), Feature::Inb) != t.features_.end();

  if (wants_inb) {
    t.inb_.resize(num_models);
    for (std::size_t m = 0; m < num_models; ++m) {
      const auto v = gt.imagenet_top1(m);
      if (!v) fail(ErrorKind::Missing, "no ImageNet accuracy for model " + t.models_[m].str());
      t.inb_[m] = *v;
    }
  }

  t.x_.resize(num_models * num_datasets * k);
  t.y_.resize(num_models * num_datasets);
  for (std::size_t m = 0; m < num_models; ++m) {
    for (std::size_t d = 0; d < num_datasets; ++d) {
      const std::size_t cell = m * num_datasets + d;
      t.y_[cell] = gt.at(m, d).value(target);
      const bool text_features_needed = !(k == 1 && wants_inb);
      const ScoreVector* s = nullptr;
      if (text_features_needed) {
        const auto it = scores.find({t.models_[m], t.datasets_[d]});
        if (it == scores.end()) {
          fail(ErrorKind::Missing,
               "no scores for (" + t.models_[m].str() + ", " + t.datasets_[d] + ")");
        }
        s = &it->second;
      }
      for (std::size_t i = 0; i < k; ++i) {
        const Feature f = t.features_[i];
        double v = 0.0;
        if (f == Feature::Inb) {
          v = t.inb_[m];
        } else {
          v = *s->get(f);
        }
        if (!std::isfinite(v)) {
          fail(ErrorKind::NonFinite, "non-finite " + std::string(feature_name(f)) + " for (" +
                                         t.models_[m].str() + ", " + t.datasets_[d] + ")");
        }
        t.x_[cell * k + i] = v;
      }
    }
  }
  return t;
}

std::optional<double> FeatureTable::inb(std::size_t model) const {
  if (inb_.empty()) return std::nullopt;
  return inb_[model];
}

namespace {

// In-place Cholesky factorization of a symmetric n x n matrix; false when a
// pivot falls below `tol` times the largest diagonal entry.
bool cholesky(std::vector<double>& a, std::size_t n, double tol) {
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a[i * n + i]));
  const double floor = tol * std::max(max_diag, 1e-300);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t p = 0; p < j; ++p) d -= a[j * n + p] * a[j * n + p];
    if (!(d > floor)) return false;
    const double l = std::sqrt(d);
    a[j * n + j] = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t p = 0; p < j; ++p) s -= a[i * n + p] * a[j * n + p];
      a[i * n + j] = s / l;
    }
  }
  return true;
}

std::vector<double> cholesky_solve(const std::vector<double>& l, std::size_t n,
                                   std::vector<double> b) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < i; ++p) b[i] -= l[i * n + p] * b[p];
    b[i] /= l[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t p = i + 1; p < n; ++p) b[i] -= l[p * n + i] * b[p];
    b[i] /= l[i * n + i];
  }
  return b;
}

constexpr double kRankTolerance = 1e-11;
constexpr double kRidge = 1e-8;

}  // namespace

LinearModel fit_linear(std::span<const double> x, std::size_t k, std::span<const double> y,
                       std::vector<std::string> feature_names) {
  if (k == 0) fail(ErrorKind::InvalidArgument, "fit_linear: no features");
  if (x.size() != y.size() * k) {
    fail(ErrorKind::DimensionMismatch, "fit_linear: design matrix has " + std::to_string(x.size()) +
                                           " values for " + std::to_string(y.size()) + " rows x " +
                                           std::to_string(k) + " features");
  }
  if (!feature_names.empty() && feature_names.size() != k) {
    fail(ErrorKind::DimensionMismatch, "fit_linear: feature name count differs from k");
  }
  const std::size_t rows = y.size();
  if (rows < k + 1) {
    fail(ErrorKind::InsufficientData, "fit_linear: " + std::to_string(rows) + " rows for " +
                                          std::to_string(k) + " features (need k+1)");
  }
  for (double v : x) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "fit_linear: non-finite feature value");
  }
  for (double v : y) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "fit_linear: non-finite target value");
  }

  // Normal equations over [features | 1].
  const std::size_t n = k + 1;
  std::vector<double> ata(n * n, 0.0);
  std::vector<double> aty(n, 0.0);
  std::vector<double> row(n, 1.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < k; ++i) row[i] = x[r * k + i];
    for (std::size_t i = 0; i < n; ++i) {
      aty[i] += row[i] * y[r];
      for (std::size_t j = 0; j <= i; ++j) ata[i * n + j] += row[i] * row[j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) ata[i * n + j] = ata[j * n + i];
  }

  LinearModel model;
  std::vector<double> factor = ata;
  if (!cholesky(factor, n, kRankTolerance)) {
    model.regularized = true;
    factor = ata;
    for (std::size_t i = 0; i < k; ++i) factor[i * n + i] += kRidge;
    if (!cholesky(factor, n, 0.0)) {
      fail(ErrorKind::Degenerate, "fit_linear: normal equations singular even with ridge");
    }
  }
  const auto beta = cholesky_solve(factor, n, aty);
  model.weights.assign(beta.begin(), beta.begin() + static_cast<std::ptrdiff_t>(k));
  model.bias = beta[k];
  if (feature_names.empty()) {
    for (std::size_t i = 0; i < k; ++i) feature_names.push_back("x" + std::to_string(i));
  }
  model.feature_names = std::move(feature_names);
  for (double w : model.weights) {
    if (!std::isfinite(w)) fail(ErrorKind::NonFinite, "fit_linear: non-finite solution");
  }
  if (!std::isfinite(model.bias)) fail(ErrorKind::NonFinite, "fit_linear: non-finite solution");
  return model;
}

LinearModel fit_linear(const std::vector<std::vector<double>>& x, std::span<const double> y,
                       std::vector<std::string> feature_names) {
  if (x.empty()) fail(ErrorKind::InsufficientData, "fit_linear: no rows");
  const std::size_t k = x.front().size();
  std::vector<double> flat;
  flat.reserve(x.size() * k);
  for (const auto& r : x) {
    if (r.size() != k) fail(ErrorKind::DimensionMismatch, "fit_linear: ragged design matrix");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return fit_linear(flat, k, y, std::move(feature_names));
}

double LinearModel::predict_raw(std::span<const double> features) const {
  if (features.size() != weights.size()) {
    fail(ErrorKind::DimensionMismatch, "predict: expected " + std::to_string(weights.size()) +
                                           " features, got " + std::to_string(features.size()));
  }
  double p = bias;
  for (std::size_t i = 0; i < weights.size(); ++i) p += weights[i] * features[i];
  return p;
}

double LinearModel::predict(std::span<const double> features) const {
  return std::clamp(predict_raw(features), 0.0, 1.0);
}

double LinearModel::predict(const ScoreVector& s) const {
  std::vector<double> values;
  values.reserve(feature_names.size());
  for (const auto& name : feature_names) {
    const auto v = s.get(parse_feature(name));
    if (!v) fail(ErrorKind::Missing, "predict: score vector lacks feature '" + name + "'");
    values.push_back(*v);
  }
  return predict(values);
}

namespace {

std::vector<std::string> names_of(const FeatureTable& t) {
  std::vector<std::string> names;
  for (const Feature f : t.features()) names.emplace_back(feature_name(f));
  return names;
}

template <typename Keep>
LinearModel fit_where(const FeatureTable& t, Keep keep) {
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t m = 0; m < t.num_models(); ++m) {
    for (std::size_t d = 0; d < t.num_datasets(); ++d) {
      if (!keep(m, d)) continue;
      const auto row = t.x(m, d);
      x.insert(x.end(), row.begin(), row.end());
      y.push_back(t.y(m, d));
    }
  }
  return fit_linear(x, t.num_features(), y, names_of(t));
}

void check_index(std::size_t i, std::size_t n, const char* what) {
  if (i >= n) fail(ErrorKind::Missing, std::string("unknown ") + what + " index " + std::to_string(i));
}

}  // namespace

std::vector<double> ranking_scores(const FeatureTable& table, std::size_t dataset) {
  check_index(dataset, table.num_datasets(), "dataset");
  std::vector<double> scores(table.num_models());
  if (table.inb_only()) {
    for (std::size_t m = 0; m < table.num_models(); ++m) scores[m] = *table.inb(m);
    return scores;
  }
  const LinearModel model =
      fit_where(table, [dataset](std::size_t, std::size_t d) { return d != dataset; });
  for (std::size_t m = 0; m < table.num_models(); ++m) {
    scores[m] = model.predict_raw(table.x(m, dataset));
  }
  return scores;
}

std::vector<RankedModel> rank_models(const FeatureTable& table, const DatasetId& dataset) {
  const auto it = std::find(table.datasets().begin(), table.datasets().end(), dataset);
  if (it == table.datasets().end()) fail(ErrorKind::Missing, "unknown dataset " + dataset);
  const auto scores = ranking_scores(table, static_cast<std::size_t>(it - table.datasets().begin()));
  std::vector<RankedModel> out;
  for (const std::size_t m : descending_order(scores)) out.push_back({table.models()[m], scores[m]});
  return out;
}

double predict_performance(const FeatureTable& table, std::size_t model, std::size_t dataset) {
  check_index(model, table.num_models(), "model");
  check_index(dataset, table.num_datasets(), "dataset");
  if (table.inb_only()) return std::clamp(*table.inb(model), 0.0, 1.0);
  const LinearModel fitted = fit_where(
      table, [model, dataset](std::size_t m, std::size_t d) { return m != model && d != dataset; });
  return fitted.predict(table.x(model, dataset));
}

double predict_performance(const FeatureTable& table, const ModelId& model, const DatasetId& dataset) {
  const auto mi = std::find(table.models().begin(), table.models().end(), model);
  if (mi == table.models().end()) fail(ErrorKind::Missing, "unknown model " + model.str());
  const auto di = std::find(table.datasets().begin(), table.datasets().end(), dataset);
  if (di == table.datasets().end()) fail(ErrorKind::Missing, "unknown dataset " + dataset);
  return predict_performance(table, static_cast<std::size_t>(mi - table.models().begin()),
                             static_cast<std::size_t>(di - table.datasets().begin()));
}

SubsetEval evaluate_subset(const ScoreTable& scores, const GroundTruthTable& gt,
                           std::vector<Feature> features, Target target,
                           const EvalOptions& options) {
  const FeatureTable table = FeatureTable::build(scores, gt, std::move(features), target);
  const std::size_t num_models = table.num_models();
  const std::size_t num_datasets = table.num_datasets();

  SubsetEval out;
  out.features = table.features();
  out.per_dataset.resize(num_datasets);
  out.predictions.resize(num_models * num_datasets);

  parallel_for(num_datasets, options.jobs, [&](std::size_t d) {
    const auto pred = ranking_scores(table, d);
    std::vector<double> truth(num_models);
    for (std::size_t m = 0; m < num_models; ++m) truth[m] = table.y(m, d);
    auto& row = out.per_dataset[d];
    row.dataset = table.datasets()[d];
    row.r5 = top5_recall_scores(pred, truth);
    const auto tau = top5_tau_or_skip(pred, truth);
    row.tau = tau.value_or(0.0);
    row.tau_defined = tau.has_value();
  });

  parallel_for(num_models * num_datasets, options.jobs, [&](std::size_t cell) {
    out.predictions[cell] = predict_performance(table, cell / num_datasets, cell % num_datasets);
  });

  std::vector<double> truth_all(num_models * num_datasets);
  for (std::size_t d = 0; d < num_datasets; ++d) {
    std::vector<double> pred(num_models), truth(num_models);
    for (std::size_t m = 0; m < num_models; ++m) {
      pred[m] = out.predictions[m * num_datasets + d];
      truth[m] = table.y(m, d);
      truth_all[m * num_datasets + d] = truth[m];
    }
    out.per_dataset[d].l1 = mean_abs_error(pred, truth);
  }

  double r5 = 0.0, l1 = 0.0, tau = 0.0;
  std::size_t tau_count = 0;
  for (const auto& row : out.per_dataset) {
    r5 += row.r5;
    l1 += row.l1;
    if (row.tau_defined || !options.skip_undefined_tau) {
      tau += row.tau;
      ++tau_count;
    }
  }
  const double nd = static_cast<double>(num_datasets);
  out.mean_r5 = r5 / nd;
  out.mean_l1 = l1 / nd;
  out.mean_tau = tau_count ? tau / static_cast<double>(tau_count) : 0.0;
  out.r2 = r_squared(out.predictions, truth_all);
  return out;
}

std::vector<AblationRow> ablate_subsets(const ScoreTable& scores, const GroundTruthTable& gt,
                                        const std::vector<Feature>& pool, Target target,
                                        const EvalOptions& options) {
  if (pool.empty()) fail(ErrorKind::InvalidArgument, "ablation pool is empty");
  if (pool.size() > 10) fail(ErrorKind::InvalidArgument, "ablation pool limited to 10 features");
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      if (pool[i] == pool[j]) fail(ErrorKind::Duplicate, "ablation pool repeats a feature");
    }
  }
  const std::size_t count = (std::size_t{1} << pool.size()) - 1;
  std::vector<AblationRow> rows(count);
  for (std::size_t mask = 1; mask <= count; ++mask) {
    std::vector<Feature> subset;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (mask & (std::size_t{1} << i)) subset.push_back(pool[i]);
    }
    const auto eval = evaluate_subset(scores, gt, subset, target, options);
    rows[mask - 1] = {mask, std::move(subset), eval.mean_r5, eval.mean_tau, eval.mean_l1};
  }
  return rows;
}

}  // namespace lovm
