#include "lovm/datastore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lovm/csv.hpp"
#include "lovm/error.hpp"
#include "lovm/kernels.hpp"

namespace lovm {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian float32; big-endian hosts need a byteswap path");

ModelId parse_model_id(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    fail(ErrorKind::InvalidArgument, "model id must be name:pretrain, got '" + text + "'");
  }
  return {text.substr(0, colon), text.substr(colon + 1)};
}

std::size_t TaskSpec::class_index(const std::string& name) const {
  const auto it = std::find(class_names.begin(), class_names.end(), name);
  if (it == class_names.end()) {
    fail(ErrorKind::Missing, "unknown class '" + name + "' in task " + dataset);
  }
  return static_cast<std::size_t>(it - class_names.begin());
}

void validate(const TaskSpec& spec) {
  if (spec.dataset.empty()) fail(ErrorKind::Format, "task spec: empty dataset id");
  if (spec.class_names.size() < 2) {
    fail(ErrorKind::Format, "task spec " + spec.dataset + ": need at least 2 classes");
  }
  std::set<std::string> seen;
  for (const auto& c : spec.class_names) {
    if (c.empty()) fail(ErrorKind::Format, "task spec " + spec.dataset + ": empty class name");
    if (!seen.insert(c).second) {
      fail(ErrorKind::Duplicate, "task spec " + spec.dataset + ": duplicate class '" + c + "'");
    }
  }
}

namespace {

TaskSpec task_from_json(const json& j) {
  TaskSpec spec;
  try {
    spec.dataset = j.at("dataset").get<std::string>();
    spec.class_names = j.at("classes").get<std::vector<std::string>>();
    spec.domain = j.value("domain", std::string{});
    spec.task = j.value("task", std::string{});
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("task spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

json task_to_json(const TaskSpec& spec) {
  return {{"dataset", spec.dataset},
          {"classes", spec.class_names},
          {"domain", spec.domain},
          {"task", spec.task}};
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

}  // namespace

TaskSpec load_task_spec(const fs::path& path) { return task_from_json(read_json(path)); }

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::vector<float> values,
                                 std::vector<RowLabel> labels, bool unit_norm)
    : dim_(dim), values_(std::move(values)), labels_(std::move(labels)), unit_norm_(unit_norm) {
  if (dim_ == 0) fail(ErrorKind::Format, "embedding dim must be positive");
  if (values_.size() != labels_.size() * dim_) {
    fail(ErrorKind::DimensionMismatch,
         "embedding matrix holds " + std::to_string(values_.size()) + " values for " +
             std::to_string(labels_.size()) + " rows of dim " + std::to_string(dim_));
  }
}

void EmbeddingMatrix::append(std::span<const float> row, RowLabel label) {
  if (dim_ == 0) dim_ = row.size();
  if (row.size() != dim_) {
    fail(ErrorKind::DimensionMismatch, "appended row has dim " + std::to_string(row.size()) +
                                           ", expected " + std::to_string(dim_));
  }
  values_.insert(values_.end(), row.begin(), row.end());
  labels_.push_back(std::move(label));
}

std::vector<std::vector<std::size_t>> EmbeddingMatrix::rows_by_class(std::size_t num_classes) const {
  std::vector<std::vector<std::size_t>> groups(num_classes);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const int c = labels_[i].class_index;
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
      fail(ErrorKind::OutOfRange, "row " + std::to_string(i) + ": class index " +
                                      std::to_string(c) + " outside [0, " +
                                      std::to_string(num_classes) + ")");
    }
    groups[static_cast<std::size_t>(c)].push_back(i);
  }
  return groups;
}

void validate(const EmbeddingMatrix& m, std::size_t num_classes, const std::string& name) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (!std::isfinite(row[k])) {
        fail(ErrorKind::NonFinite, name + ": non-finite value at row " + std::to_string(i) +
                                       ", column " + std::to_string(k));
      }
    }
    const int c = m.label(i).class_index;
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
      fail(ErrorKind::OutOfRange, name + ": row " + std::to_string(i) + " class index " +
                                      std::to_string(c) + " outside [0, " +
                                      std::to_string(num_classes) + ")");
    }
    if (m.unit_norm()) {
      const double norm = std::sqrt(kernels::squared_norm(row));
      if (std::abs(norm - 1.0) > 1e-5) {
        fail(ErrorKind::OutOfRange, name + ": row " + std::to_string(i) +
                                        " flagged unit_norm has norm " + csv::format_double(norm));
      }
    }
  }
}

EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m) {
  EmbeddingMatrix out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    const double norm = std::sqrt(kernels::squared_norm(row));
    if (norm == 0.0) fail(ErrorKind::ZeroVector, "zero row " + std::to_string(i));
    for (auto& v : row) v = static_cast<float>(static_cast<double>(v) / norm);
  }
  out.set_unit_norm(true);
  return out;
}

std::optional<ModelId> EmbeddingBundle::model() const {
  const auto n = provenance.find("model_name");
  const auto p = provenance.find("pretrain");
  if (n == provenance.end() || p == provenance.end()) return std::nullopt;
  return ModelId{n->second, p->second};
}

namespace {

void require_coverage(const EmbeddingMatrix& m, std::size_t num_classes, const std::string& name) {
  const auto groups = m.rows_by_class(num_classes);
  for (std::size_t c = 0; c < groups.size(); ++c) {
    if (groups[c].empty()) {
      fail(ErrorKind::Missing, name + ": no rows for class " + std::to_string(c));
    }
  }
}

struct NamedTensor {
  const char* name;
  const EmbeddingMatrix* matrix;
};

std::vector<NamedTensor> tensors_of(const EmbeddingBundle& b) {
  std::vector<NamedTensor> out{{"class_prompts", &b.class_prompts}};
  if (b.captions) out.push_back({"captions", &*b.captions});
  if (b.synonyms) out.push_back({"synonyms", &*b.synonyms});
  if (b.images) out.push_back({"images", &*b.images});
  if (b.description) out.push_back({"description", &*b.description});
  if (b.generic_prompts) out.push_back({"generic_prompts", &*b.generic_prompts});
  return out;
}

}  // namespace

void validate(const EmbeddingBundle& bundle) {
  validate(bundle.task);
  const std::size_t num_classes = bundle.task.num_classes();
  if (bundle.class_prompts.empty()) fail(ErrorKind::Missing, "class_prompts: tensor is empty");
  const std::size_t dim = bundle.class_prompts.dim();
  for (const auto& [name, m] : tensors_of(bundle)) {
    if (m->dim() != dim) {
      fail(ErrorKind::DimensionMismatch, std::string(name) + ": dim " +
                                             std::to_string(m->dim()) + " differs from " +
                                             std::to_string(dim));
    }
    validate(*m, num_classes, name);
  }
  require_coverage(bundle.class_prompts, num_classes, "class_prompts");
  if (bundle.captions) require_coverage(*bundle.captions, num_classes, "captions");
  if (bundle.synonyms) require_coverage(*bundle.synonyms, num_classes, "synonyms");
  if (bundle.generic_prompts) require_coverage(*bundle.generic_prompts, num_classes, "generic_prompts");
}

EmbeddingBundle load_bundle(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) fail(ErrorKind::Io, "missing file " + manifest_path.string());
  const json manifest = read_json(manifest_path);

  EmbeddingBundle bundle;
  std::size_t dim = 0;
  try {
    const auto declared = manifest.at("dim").get<long long>();
    if (declared <= 0) fail(ErrorKind::Format, manifest_path.string() + ": dim must be positive");
    dim = static_cast<std::size_t>(declared);
    bundle.task = task_from_json(manifest.at("task"));
    if (manifest.contains("provenance")) {
      for (const auto& [k, v] : manifest.at("provenance").items()) {
        bundle.provenance[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, manifest_path.string() + ": " + e.what());
  }

  std::set<std::string> seen;
  bool have_prompts = false;
  for (const auto& t : manifest.value("tensors", json::array())) {
    std::string name;
    std::size_t rows = 0;
    fs::path file;
    std::vector<RowLabel> labels;
    bool unit_norm = false;
    try {
      name = t.at("name").get<std::string>();
      rows = t.at("rows").get<std::size_t>();
      file = dir / t.at("file").get<std::string>();
      unit_norm = t.value("unit_norm", false);
      for (const auto& l : t.at("labels")) {
        labels.push_back({l.at(0).get<int>(), l.size() > 1 ? l.at(1).get<std::string>() : ""});
      }
    } catch (const json::exception& e) {
      fail(ErrorKind::Format, manifest_path.string() + ": tensor entry: " + e.what());
    }
    if (!seen.insert(name).second) fail(ErrorKind::Duplicate, "duplicate tensor '" + name + "'");
    if (labels.size() != rows) {
      fail(ErrorKind::DimensionMismatch, name + ": " + std::to_string(labels.size()) +
                                             " labels for " + std::to_string(rows) + " rows");
    }

    std::ifstream in(file, std::ios::binary | std::ios::ate);
    if (!in) fail(ErrorKind::Io, name + ": missing file " + file.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    const std::size_t expected = rows * dim * sizeof(float);
    if (bytes != expected) {
      fail(ErrorKind::DimensionMismatch,
           name + ": " + file.string() + " holds " + std::to_string(bytes) + " bytes, expected " +
               std::to_string(expected) + " (" + std::to_string(rows) + " rows x dim " +
               std::to_string(dim) + ")");
    }
    std::vector<float> values(rows * dim);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
    if (!in) fail(ErrorKind::Io, name + ": short read from " + file.string());

    EmbeddingMatrix m(dim, std::move(values), std::move(labels), unit_norm);
    validate(m, bundle.task.num_classes(), name);

    if (name == "class_prompts") {
      bundle.class_prompts = std::move(m);
      have_prompts = true;
    } else if (name == "captions") {
      bundle.captions = std::move(m);
    } else if (name == "synonyms") {
      bundle.synonyms = std::move(m);
    } else if (name == "images") {
      bundle.images = std::move(m);
    } else if (name == "description") {
      bundle.description = std::move(m);
    } else if (name == "generic_prompts") {
      bundle.generic_prompts = std::move(m);
    } else {
      fail(ErrorKind::Format, manifest_path.string() + ": unknown tensor name '" + name + "'");
    }
  }
  if (!have_prompts) fail(ErrorKind::Missing, manifest_path.string() + ": no class_prompts tensor");
  validate(bundle);
  return bundle;
}

void write_bundle(const EmbeddingBundle& bundle, const fs::path& dir) {
  validate(bundle);
  fs::create_directories(dir);
  json tensors = json::array();
  for (const auto& [name, m] : tensors_of(bundle)) {
    const std::string file = std::string(name) + ".f32";
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + (dir / file).string());
    out.write(reinterpret_cast<const char*>(m->values().data()),
              static_cast<std::streamsize>(m->values().size() * sizeof(float)));
    json labels = json::array();
    for (const auto& l : m->labels()) labels.push_back(json::array({l.class_index, l.tag}));
    tensors.push_back({{"name", name},
                       {"rows", m->rows()},
                       {"file", file},
                       {"unit_norm", m->unit_norm()},
                       {"labels", std::move(labels)}});
  }
  json manifest = {{"dim", bundle.dim()},
                   {"tensors", std::move(tensors)},
                   {"task", task_to_json(bundle.task)},
                   {"provenance", bundle.provenance}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Target parse_target(const std::string& text) {
  if (text == "top1") return Target::Top1;
  if (text == "mpcr") return Target::Mpcr;
  fail(ErrorKind::InvalidArgument, "target must be top1 or mpcr, got '" + text + "'");
}

std::string to_string(Target t) { return t == Target::Top1 ? "top1" : "mpcr"; }

std::size_t GroundTruthTable::add_model(const ModelId& model) {
  if (model.name.empty() || model.pretrain.empty()) {
    fail(ErrorKind::Format, "model id fields must be non-empty");
  }
  const auto [it, inserted] = model_index_.try_emplace(model, models_.size());
  if (inserted) {
    models_.push_back(model);
    imagenet_.emplace_back();
    grow();
  }
  return it->second;
}

std::size_t GroundTruthTable::add_dataset(const DatasetId& dataset) {
  if (dataset.empty()) fail(ErrorKind::Format, "dataset id must be non-empty");
  const auto [it, inserted] = dataset_index_.try_emplace(dataset, datasets_.size());
  if (inserted) {
    datasets_.push_back(dataset);
    grow();
  }
  return it->second;
}

void GroundTruthTable::grow() {
  if (cell_cols_ == datasets_.size() && cells_.size() == models_.size() * cell_cols_) return;
  std::vector<std::optional<GtEntry>> next(models_.size() * datasets_.size());
  for (std::size_t m = 0; m < models_.size(); ++m) {
    for (std::size_t d = 0; d < cell_cols_; ++d) {
      const std::size_t old = m * cell_cols_ + d;
      if (old < cells_.size()) next[m * datasets_.size() + d] = cells_[old];
    }
  }
  cells_ = std::move(next);
  cell_cols_ = datasets_.size();
}

void GroundTruthTable::set(const ModelId& model, const DatasetId& dataset, GtEntry entry) {
  const std::size_t m = add_model(model);
  const std::size_t d = add_dataset(dataset);
  cells_[m * cell_cols_ + d] = entry;
}

void GroundTruthTable::set_imagenet_top1(const ModelId& model, double value) {
  imagenet_[add_model(model)] = value;
}

std::optional<std::size_t> GroundTruthTable::find_model(const ModelId& model) const {
  const auto it = model_index_.find(model);
  if (it == model_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> GroundTruthTable::find_dataset(const DatasetId& dataset) const {
  const auto it = dataset_index_.find(dataset);
  if (it == dataset_index_.end()) return std::nullopt;
  return it->second;
}

std::size_t GroundTruthTable::model_index(const ModelId& model) const {
  if (auto i = find_model(model)) return *i;
  fail(ErrorKind::Missing, "unknown model " + model.str());
}

std::size_t GroundTruthTable::dataset_index(const DatasetId& dataset) const {
  if (auto i = find_dataset(dataset)) return *i;
  fail(ErrorKind::Missing, "unknown dataset " + dataset);
}

bool GroundTruthTable::has(std::size_t model, std::size_t dataset) const {
  return model < models_.size() && dataset < datasets_.size() &&
         cells_[model * cell_cols_ + dataset].has_value();
}

const GtEntry& GroundTruthTable::at(std::size_t model, std::size_t dataset) const {
  if (!has(model, dataset)) {
    fail(ErrorKind::Missing, "no ground truth for cell (" + std::to_string(model) + ", " +
                                 std::to_string(dataset) + ")");
  }
  return *cells_[model * cell_cols_ + dataset];
}

GtEntry& GroundTruthTable::at(std::size_t model, std::size_t dataset) {
  if (!has(model, dataset)) {
    fail(ErrorKind::Missing, "no ground truth for cell (" + std::to_string(model) + ", " +
                                 std::to_string(dataset) + ")");
  }
  return *cells_[model * cell_cols_ + dataset];
}

std::optional<double> GroundTruthTable::imagenet_top1(std::size_t model) const {
  return model < imagenet_.size() ? imagenet_[model] : std::nullopt;
}

bool GroundTruthTable::dense() const noexcept {
  if (models_.empty() || datasets_.empty()) return false;
  return std::all_of(cells_.begin(), cells_.end(), [](const auto& c) { return c.has_value(); });
}

std::size_t GroundTruthTable::size() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(cells_.begin(), cells_.end(), [](const auto& c) { return c.has_value(); }));
}

namespace {

double unit_value(const csv::Table& t, std::size_t row, std::size_t col, const std::string& source) {
  const std::string ctx = source + " line " + std::to_string(t.lines[row]);
  const double v = csv::parse_double(t.rows[row][col], ctx);
  if (!(v >= 0.0 && v <= 1.0)) {
    fail(ErrorKind::OutOfRange, ctx + ": " + t.header[col] + "=" + t.rows[row][col] +
                                    " outside [0,1]");
  }
  return v;
}

void check_width(const csv::Table& t, std::size_t row, const std::string& source) {
  if (t.rows[row].size() != t.header.size()) {
    fail(ErrorKind::Format, source + " line " + std::to_string(t.lines[row]) + ": expected " +
                                std::to_string(t.header.size()) + " fields, got " +
                                std::to_string(t.rows[row].size()));
  }
}

bool is_imagenet(const DatasetId& d) {
  std::string lower;
  for (char c : d) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return lower == "imagenet1k" || lower == "imagenet";
}

}  // namespace

GroundTruthTable load_gt_table(const fs::path& path, const std::optional<fs::path>& imagenet_csv) {
  const csv::Table t = csv::read(path);
  const std::string source = path.string();
  csv::require_header(
      t, {"model_name", "pretrain", "dataset", "top1_accuracy", "mean_per_class_recall"}, source);
  GroundTruthTable table;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    check_width(t, r, source);
    const auto& row = t.rows[r];
    if (row[0].empty() || row[1].empty() || row[2].empty()) {
      fail(ErrorKind::Format, source + " line " + std::to_string(t.lines[r]) + ": empty id field");
    }
    const ModelId model{row[0], row[1]};
    const DatasetId dataset = row[2];
    const GtEntry entry{unit_value(t, r, 3, source), unit_value(t, r, 4, source)};
    const auto m = table.find_model(model);
    const auto d = table.find_dataset(dataset);
    if (m && d && table.has(*m, *d)) {
      fail(ErrorKind::Duplicate, source + " line " + std::to_string(t.lines[r]) +
                                     ": duplicate entry for (" + model.str() + ", " + dataset + ")");
    }
    table.set(model, dataset, entry);
  }
  if (imagenet_csv) {
    load_imagenet_csv(table, *imagenet_csv);
  } else {
    for (std::size_t d = 0; d < table.datasets().size(); ++d) {
      if (!is_imagenet(table.datasets()[d])) continue;
      for (std::size_t m = 0; m < table.models().size(); ++m) {
        if (table.has(m, d)) table.set_imagenet_top1(table.models()[m], table.at(m, d).top1);
      }
      break;
    }
  }
  return table;
}

void load_imagenet_csv(GroundTruthTable& table, const fs::path& path) {
  const csv::Table t = csv::read(path);
  const std::string source = path.string();
  csv::require_header(t, {"model_name", "pretrain", "imagenet_top1"}, source);
  std::set<ModelId> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    check_width(t, r, source);
    const ModelId model{t.rows[r][0], t.rows[r][1]};
    if (!seen.insert(model).second) {
      fail(ErrorKind::Duplicate, source + ": duplicate model " + model.str());
    }
    table.set_imagenet_top1(model, unit_value(t, r, 2, source));
  }
}

void write_gt_table(const GroundTruthTable& table, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  csv::write_row(out, {"model_name", "pretrain", "dataset", "top1_accuracy", "mean_per_class_recall"});
  for (std::size_t m = 0; m < table.models().size(); ++m) {
    for (std::size_t d = 0; d < table.datasets().size(); ++d) {
      if (!table.has(m, d)) continue;
      const auto& e = table.at(m, d);
      csv::write_row(out, {table.models()[m].name, table.models()[m].pretrain, table.datasets()[d],
                           csv::format_double(e.top1), csv::format_double(e.mpcr)});
    }
  }
}

}  // namespace lovm
