#pragma once
// In-memory types shared by every module, plus loaders/writers for the
// on-disk formats: embedding bundles (manifest.json + raw float32 tensors),
// ground-truth CSV tables and task specifications.

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lovm {

struct ModelId {
  std::string name;
  std::string pretrain;

  auto operator<=>(const ModelId&) const = default;
  std::string str() const { return name + ":" + pretrain; }
};

// Parses "name:pretrain".
ModelId parse_model_id(const std::string& text);

using DatasetId = std::string;

struct TaskSpec {
  DatasetId dataset;
  std::vector<std::string> class_names;
  std::string domain;
  std::string task;

  std::size_t num_classes() const noexcept { return class_names.size(); }
  // Throws LovmError(Missing) for an unknown class.
  std::size_t class_index(const std::string& name) const;
};

void validate(const TaskSpec& spec);
TaskSpec load_task_spec(const std::filesystem::path& path);

struct RowLabel {
  int class_index = 0;
  std::string tag;

  bool operator==(const RowLabel&) const = default;
};

// Row-major R x dim float32 matrix with one label per row.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t dim, std::vector<float> values, std::vector<RowLabel> labels,
                  bool unit_norm = false);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t rows() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  bool unit_norm() const noexcept { return unit_norm_; }

  std::span<const float> row(std::size_t i) const noexcept {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<float> row(std::size_t i) noexcept { return {values_.data() + i * dim_, dim_}; }

  const RowLabel& label(std::size_t i) const noexcept { return labels_[i]; }
  const std::vector<RowLabel>& labels() const noexcept { return labels_; }
  const std::vector<float>& values() const noexcept { return values_; }

  void append(std::span<const float> row, RowLabel label);
  void set_unit_norm(bool flag) noexcept { unit_norm_ = flag; }

  // Row indices grouped by class index, for classes [0, num_classes).
  std::vector<std::vector<std::size_t>> rows_by_class(std::size_t num_classes) const;

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<float> values_;
  std::vector<RowLabel> labels_;
  bool unit_norm_ = false;
};

// Checks finiteness, label ranges and (if flagged) unit norms. `name` is used
// in error messages.
void validate(const EmbeddingMatrix& m, std::size_t num_classes, const std::string& name);

// Throws LovmError(ZeroVector) naming the first all-zero row.
EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m);

struct EmbeddingBundle {
  TaskSpec task;
  EmbeddingMatrix class_prompts;
  std::optional<EmbeddingMatrix> captions;
  std::optional<EmbeddingMatrix> synonyms;
  std::optional<EmbeddingMatrix> images;
  // Single-row embedding of the dataset description text.
  std::optional<EmbeddingMatrix> description;
  // Class prompts rendered with a generic (dataset-agnostic) template.
  std::optional<EmbeddingMatrix> generic_prompts;
  std::map<std::string, std::string> provenance;

  std::size_t dim() const noexcept { return class_prompts.dim(); }
  // Model identity recorded in provenance ("model_name", "pretrain").
  std::optional<ModelId> model() const;
};

void validate(const EmbeddingBundle& bundle);
EmbeddingBundle load_bundle(const std::filesystem::path& dir);
void write_bundle(const EmbeddingBundle& bundle, const std::filesystem::path& dir);

enum class Target { Top1, Mpcr };

Target parse_target(const std::string& text);
std::string to_string(Target t);

struct GtEntry {
  double top1 = 0.0;
  double mpcr = 0.0;

  double value(Target t) const noexcept { return t == Target::Top1 ? top1 : mpcr; }
};

// Dense (model x dataset) grid of measured zero-shot performance. Models and
// datasets keep first-appearance order, which is the tie-break order for
// every ranking.
class GroundTruthTable {
 public:
  std::size_t add_model(const ModelId& model);
  std::size_t add_dataset(const DatasetId& dataset);

  // No range validation here; loaders validate.
  void set(const ModelId& model, const DatasetId& dataset, GtEntry entry);
  void set_imagenet_top1(const ModelId& model, double value);

  const std::vector<ModelId>& models() const noexcept { return models_; }
  const std::vector<DatasetId>& datasets() const noexcept { return datasets_; }

  std::optional<std::size_t> find_model(const ModelId& model) const;
  std::optional<std::size_t> find_dataset(const DatasetId& dataset) const;
  std::size_t model_index(const ModelId& model) const;
  std::size_t dataset_index(const DatasetId& dataset) const;

  bool has(std::size_t model, std::size_t dataset) const;
  const GtEntry& at(std::size_t model, std::size_t dataset) const;
  GtEntry& at(std::size_t model, std::size_t dataset);
  std::optional<double> imagenet_top1(std::size_t model) const;

  bool dense() const noexcept;
  std::size_t size() const noexcept;

 private:
  void grow();

  std::vector<ModelId> models_;
  std::vector<DatasetId> datasets_;
  std::map<ModelId, std::size_t> model_index_;
  std::map<DatasetId, std::size_t> dataset_index_;
  // Row-major over (model, dataset); resized as axes grow.
  std::vector<std::optional<GtEntry>> cells_;
  std::size_t cell_cols_ = 0;
  std::vector<std::optional<double>> imagenet_;
};

// Loads the ground-truth CSV. ImageNet accuracy comes from `imagenet_csv`
// when given, otherwise from the table's own "imagenet1k"/"imagenet" rows.
GroundTruthTable load_gt_table(const std::filesystem::path& path,
                               const std::optional<std::filesystem::path>& imagenet_csv = {});
void load_imagenet_csv(GroundTruthTable& table, const std::filesystem::path& path);
void write_gt_table(const GroundTruthTable& table, const std::filesystem::path& path);

}  // namespace lovm
