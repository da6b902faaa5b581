// lovm: rank vision-language models and predict their zero-shot accuracy on
// a new task from text-only artifacts.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lovm/benchmark.hpp"
#include "lovm/csv.hpp"
#include "lovm/datastore.hpp"
#include "lovm/difficulty.hpp"
#include "lovm/error.hpp"
#include "lovm/predictor.hpp"
#include "lovm/textgen.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool ci_mode() {
  const char* v = std::getenv("LOVM_CI");
  return v != nullptr && std::string(v) == "1";
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::vector<double> parse_sigmas(const std::string& list) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = std::min(list.find(',', start), list.size());
    const std::string tok = list.substr(start, comma - start);
    if (!tok.empty()) out.push_back(lovm::csv::parse_double(tok, "--sigmas"));
    start = comma + 1;
  }
  return out;
}

std::vector<lovm::Feature> parse_pool(std::string list) {
  for (auto& c : list) {
    if (c == ',') c = '+';
  }
  return lovm::parse_feature_set(list);
}

std::vector<fs::path> expand_bundles(const std::vector<std::string>& roots) {
  std::vector<fs::path> out;
  for (const auto& r : roots) {
    const auto found = lovm::find_bundles(r);
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

lovm::GroundTruthTable load_gt(const std::string& path, const std::string& imagenet) {
  if (imagenet.empty()) return lovm::load_gt_table(path);
  return lovm::load_gt_table(path, fs::path(imagenet));
}

void require_seed(const CLI::Option* seed_opt, const char* command) {
  if (ci_mode() && seed_opt->count() == 0) {
    throw UsageError(std::string(command) + ": --seed is required when LOVM_CI=1");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Language-only vision-language model selection"};
  app.require_subcommand(1);

  std::size_t jobs = 0;
  auto add_jobs = [&jobs](CLI::App* cmd) {
    cmd->add_option("--jobs", jobs, "Worker threads (default: all cores)");
  };

  std::string task_spec, kind = "captions", out, endpoint, llm_model = "gpt-3.5-turbo-0301";
  std::size_t parallel = 4, attempts = 5;
  auto* gen = app.add_subcommand("gen-text", "Generate a caption or synonym dataset with an LLM");
  gen->add_option("--task-spec", task_spec, "Task specification JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--kind", kind, "captions|synonyms")->check(CLI::IsMember({"captions", "synonyms"}));
  gen->add_option("--out", out, "Output text-dataset JSON")->required();
  gen->add_option("--endpoint", endpoint,
                  "Chat-completions base URL (default: $LOVM_LLM_ENDPOINT or https://api.openai.com/v1)");
  gen->add_option("--llm-model", llm_model, "LLM model name");
  gen->add_option("--parallel", parallel, "Concurrent requests");
  gen->add_option("--max-attempts", attempts, "Attempts per request");

  std::vector<std::string> bundles;
  std::string gt_path, imagenet_path, scores_path;
  double sigma = 0.1;
  std::uint64_t seed = 0;
  auto* score = app.add_subcommand("score", "Compute text-derived scores for embedding bundles");
  score->add_option("--bundle", bundles, "Bundle directory, or a directory of bundles")->required();
  score->add_option("--gt", gt_path, "Ground-truth CSV; every scored cell must appear in it");
  score->add_option("--sigma", sigma, "Gaussian noise level for text classification")->check(CLI::NonNegativeNumber);
  auto* score_seed = score->add_option("--seed", seed, "Noise seed");
  score->add_option("--out", out, "Scores CSV")->required();
  add_jobs(score);

  std::string features = "INB+G+C", dataset, model, target = "mpcr";
  std::size_t top = 5;
  auto add_table_inputs = [&](CLI::App* cmd, bool scores_required) {
    auto* s = cmd->add_option("--scores", scores_path, "Scores CSV");
    if (scores_required) s->required();
    s->check(CLI::ExistingFile);
    cmd->add_option("--gt", gt_path, "Ground-truth CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--imagenet", imagenet_path, "ImageNet accuracy CSV")->check(CLI::ExistingFile);
    cmd->add_option("--target", target, "top1|mpcr")->check(CLI::IsMember({"top1", "mpcr"}));
  };

  auto* rank = app.add_subcommand("rank", "Rank models on a held-out dataset");
  add_table_inputs(rank, false);
  rank->add_option("--features", features, "Feature subset, e.g. INB+G");
  rank->add_option("--dataset", dataset, "Target dataset")->required();
  rank->add_option("--top", top, "Rows to print (0 = all)");

  auto* predict = app.add_subcommand("predict", "Predict one model's accuracy on a held-out dataset");
  add_table_inputs(predict, false);
  predict->add_option("--features", features, "Feature subset, e.g. INB+G");
  predict->add_option("--model", model, "Model as name:pretrain")->required();
  predict->add_option("--dataset", dataset, "Target dataset")->required();

  std::string baselines = "INB,C,G,G+C,INB+C,INB+G,INB+G+C";
  bool skip_tau = false;
  auto* eval = app.add_subcommand("eval", "Evaluate baselines under both hold-out protocols");
  add_table_inputs(eval, true);
  eval->add_option("--baselines", baselines, "Comma-separated feature subsets");
  eval->add_flag("--skip-undefined-tau", skip_tau, "Exclude datasets with <2 shared top-5 models from mean tau");
  eval->add_option("--out", out, "Report CSV")->required();
  add_jobs(eval);

  std::string pool = "inb,text_f1,text_acc1,synonym,dispersion,silhouette,fisher";
  auto* ablate = app.add_subcommand("ablate", "Evaluate every non-empty subset of a feature pool");
  add_table_inputs(ablate, true);
  ablate->add_option("--pool", pool, "Comma- or +-separated features");
  ablate->add_option("--out", out, "Ablation CSV")->required();
  add_jobs(ablate);

  std::string sigmas = "0,0.01,0.05,0.1,0.2,0.5";
  auto* sweep = app.add_subcommand("sigma-sweep", "Correlation of noisy text top-1 with GT top-1 per sigma");
  sweep->add_option("--bundle", bundles, "Bundle directory, or a directory of bundles")->required();
  sweep->add_option("--gt", gt_path, "Ground-truth CSV")->required()->check(CLI::ExistingFile);
  sweep->add_option("--sigmas", sigmas, "Comma-separated sigma values");
  auto* sweep_seed = sweep->add_option("--seed", seed, "Noise seed");
  sweep->add_option("--out", out, "Output CSV (default: stdout)");
  add_jobs(sweep);

  std::string reference;
  double logit_scale = lovm::kDefaultLogitScale;
  auto* diff = app.add_subcommand("difficulty", "Dataset-difficulty estimators and their ranking tau");
  diff->add_option("--bundle", bundles, "Dataset bundle (repeatable)")->required();
  diff->add_option("--reference", reference, "Pre-training reference bundle")->check(CLI::ExistingDirectory);
  diff->add_option("--gt", gt_path, "Ground-truth CSV")->required()->check(CLI::ExistingFile);
  diff->add_option("--model", model, "Model whose accuracies define difficulty (default: first in table)");
  diff->add_option("--target", target, "top1|mpcr")->check(CLI::IsMember({"top1", "mpcr"}));
  diff->add_option("--logit-scale", logit_scale, "Softmax temperature on cosine logits");
  diff->add_option("--out", out, "Report CSV")->required();

  std::string grouping;
  auto* trends = app.add_subcommand("trends", "Average scores per model family and pre-training data");
  trends->add_option("--scores", scores_path, "Scores CSV")->required()->check(CLI::ExistingFile);
  trends->add_option("--grouping", grouping, "Grouping CSV")->required()->check(CLI::ExistingFile);
  trends->add_option("--out", out, "Trend CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    return kExitUsage;
  }

  try {
    const lovm::EvalOptions eval_options{skip_tau, jobs};
    if (gen->parsed()) {
      if (endpoint.empty()) {
        const char* env = std::getenv("LOVM_LLM_ENDPOINT");
        endpoint = env ? env : "https://api.openai.com/v1";
      }
      auto cfg = lovm::LlmClientConfig::from_env(endpoint);
      cfg.model = llm_model;
      cfg.parallelism = parallel;
      cfg.max_attempts = attempts;
      const auto spec = lovm::load_task_spec(task_spec);
      const auto ds = lovm::generate_text_dataset(spec, lovm::parse_text_kind(kind), cfg);
      lovm::write_text_dataset(ds, out);
    } else if (score->parsed()) {
      require_seed(score_seed, "score");
      const auto paths = expand_bundles(bundles);
      const auto table = lovm::score_bundles(paths, {sigma, seed, jobs});
      if (!gt_path.empty()) {
        const auto gt = lovm::load_gt_table(gt_path);
        for (const auto& [key, s] : table) {
          (void)s;
          const auto m = gt.model_index(key.first);
          const auto d = gt.dataset_index(key.second);
          (void)gt.at(m, d);
        }
      }
      lovm::write_scores_csv(table, out);
    } else if (rank->parsed() || predict->parsed()) {
      const auto gt = load_gt(gt_path, imagenet_path);
      const auto scores = scores_path.empty() ? lovm::ScoreTable{} : lovm::read_scores_csv(scores_path);
      const auto table = lovm::FeatureTable::build(scores, gt, lovm::parse_feature_set(features),
                                                   lovm::parse_target(target));
      if (rank->parsed()) {
        const auto ranked = lovm::rank_models(table, dataset);
        const std::size_t n = top == 0 ? ranked.size() : std::min(top, ranked.size());
        lovm::csv::write_row(std::cout, {"rank", "model_name", "pretrain", "predicted"});
        for (std::size_t i = 0; i < n; ++i) {
          lovm::csv::write_row(std::cout, {std::to_string(i + 1), ranked[i].model.name,
                                           ranked[i].model.pretrain,
                                           lovm::csv::format_double(ranked[i].score)});
        }
      } else {
        std::cout << lovm::csv::format_double(
                         lovm::predict_performance(table, lovm::parse_model_id(model), dataset))
                  << '\n';
      }
    } else if (eval->parsed()) {
      const auto gt = load_gt(gt_path, imagenet_path);
      const auto scores = lovm::read_scores_csv(scores_path);
      const auto report = lovm::run_benchmark(scores, gt, lovm::parse_baselines(baselines),
                                              lovm::parse_target(target), eval_options);
      lovm::write_eval_report(report, out);
    } else if (ablate->parsed()) {
      const auto gt = load_gt(gt_path, imagenet_path);
      const auto scores = lovm::read_scores_csv(scores_path);
      const auto rows =
          lovm::ablate_subsets(scores, gt, parse_pool(pool), lovm::parse_target(target), eval_options);
      lovm::write_ablation_csv(rows, out);
    } else if (sweep->parsed()) {
      require_seed(sweep_seed, "sigma-sweep");
      const auto gt = lovm::load_gt_table(gt_path);
      const auto rows = lovm::sigma_sweep(expand_bundles(bundles), gt, parse_sigmas(sigmas), seed, jobs);
      if (out.empty()) {
        lovm::csv::write_row(std::cout, {"sigma", "cells", "mean_text_acc1", "r2", "pearson"});
        for (const auto& r : rows) {
          lovm::csv::write_row(std::cout, {lovm::csv::format_double(r.sigma), std::to_string(r.cells),
                                           lovm::csv::format_double(r.mean_text_acc1),
                                           lovm::csv::format_double(r.r2),
                                           lovm::csv::format_double(r.pearson)});
        }
      } else {
        lovm::write_sigma_sweep_csv(rows, out);
      }
    } else if (diff->parsed()) {
      const auto gt = lovm::load_gt_table(gt_path);
      const std::size_t m = model.empty() ? 0 : gt.model_index(lovm::parse_model_id(model));
      if (gt.models().empty()) throw lovm::LovmError(lovm::ErrorKind::Missing, "empty ground-truth table");
      std::optional<lovm::EmbeddingBundle> ref;
      if (!reference.empty()) ref = lovm::load_bundle(reference);
      lovm::DifficultyReport report;
      report.logit_scale = logit_scale;
      const auto tgt = lovm::parse_target(target);
      for (const auto& b : bundles) {
        const auto bundle = lovm::load_bundle(b);
        report.rows.push_back(lovm::assess_dataset(bundle, ref, logit_scale));
        report.accuracies.push_back(gt.at(m, gt.dataset_index(bundle.task.dataset)).value(tgt));
      }
      lovm::write_difficulty_report(report, out);
    } else if (trends->parsed()) {
      const auto scores = lovm::read_scores_csv(scores_path);
      lovm::write_trends_csv(lovm::score_trends(scores, lovm::load_grouping_csv(grouping)), out);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    return kExitUsage;
  } catch (const lovm::LovmError& e) {
    std::cerr << "error: " << lovm::to_string(e.kind()) << ": " << one_line(e.what()) << '\n';
    return kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << one_line(e.what()) << '\n';
    return kExitDomain;
  }
  return 0;
}
