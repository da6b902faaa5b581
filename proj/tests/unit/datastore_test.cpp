#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "gtest/gtest.h"
#include "lovm/datastore.hpp"
#include "lovm/error.hpp"
#include "test_support.hpp"

namespace {

using namespace lovm;
using namespace lovm::testing;
namespace fs = std::filesystem;

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const LovmError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected LovmError";
  return ErrorKind::Io;
}

EmbeddingBundle small_bundle() {
  std::mt19937_64 rng(3);
  SyntheticTask t;
  t.classes = 2;
  t.dim = 4;
  t.captions_per_class = 3;
  return synthetic_bundle(rng, t);
}

TEST(Datastore, LoadBundleCountsRows) {
  const auto dir = temp_dir("bundle_counts");
  write_bundle(small_bundle(), dir);
  const auto b = load_bundle(dir);
  ASSERT_TRUE(b.captions.has_value());
  EXPECT_EQ(b.captions->rows(), 6u);
  EXPECT_EQ(b.captions->dim(), 4u);
  EXPECT_EQ(b.task.num_classes(), 2u);
  ASSERT_TRUE(b.model().has_value());
  EXPECT_EQ(b.model()->name, "ViT-B-32");
  fs::remove_all(dir);
}

TEST(Datastore, RoundTripIsBitExact) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    SyntheticTask t;
    t.classes = 2 + trial % 4;
    t.dim = 3 + static_cast<std::size_t>(trial) * 7;
    const auto original = synthetic_bundle(rng, t, "ds" + std::to_string(trial));
    const auto dir = temp_dir("roundtrip");
    write_bundle(original, dir);
    const auto once = load_bundle(dir);
    const auto dir2 = temp_dir("roundtrip2");
    write_bundle(once, dir2);
    const auto twice = load_bundle(dir2);
    EXPECT_EQ(once.class_prompts, original.class_prompts);
    EXPECT_EQ(*twice.captions, *original.captions);
    EXPECT_EQ(*twice.synonyms, *original.synonyms);
    EXPECT_EQ(twice.task.class_names, original.task.class_names);
    fs::remove_all(dir);
    fs::remove_all(dir2);
  }
}

void truncate_file(const fs::path& path, std::size_t drop_bytes) {
  const auto size = fs::file_size(path);
  fs::resize_file(path, size - drop_bytes);
}

TEST(Datastore, DimensionMismatchDetected) {
  const auto dir = temp_dir("dim_mismatch");
  write_bundle(small_bundle(), dir);
  // One float short per row cannot be a valid R x dim tensor.
  truncate_file(dir / "captions.f32", 6 * sizeof(float));
  try {
    (void)load_bundle(dir);
    FAIL() << "expected dimension mismatch";
  } catch (const LovmError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    EXPECT_NE(std::string(e.what()).find("captions"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(Datastore, NonFiniteValueNamesRow) {
  auto b = small_bundle();
  b.captions->row(4)[1] = std::numeric_limits<float>::quiet_NaN();
  const auto dir = temp_dir("nonfinite");
  // write_bundle validates, so write a valid bundle and patch the tensor.
  auto valid = small_bundle();
  write_bundle(valid, dir);
  {
    std::fstream f(dir / "captions.f32", std::ios::in | std::ios::out | std::ios::binary);
    const float nan = std::numeric_limits<float>::quiet_NaN();
    f.seekp(static_cast<std::streamoff>((4 * 4 + 1) * sizeof(float)));
    f.write(reinterpret_cast<const char*>(&nan), sizeof(float));
  }
  try {
    (void)load_bundle(dir);
    FAIL() << "expected non-finite error";
  } catch (const LovmError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFinite);
    EXPECT_NE(std::string(e.what()).find("row 4"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("captions"), std::string::npos);
  }
  EXPECT_EQ(kind_of([&] { write_bundle(b, dir / "other"); }), ErrorKind::NonFinite);
  fs::remove_all(dir);
}

TEST(Datastore, MissingManifestAndTensorFile) {
  const auto dir = temp_dir("missing");
  EXPECT_EQ(kind_of([&] { (void)load_bundle(dir); }), ErrorKind::Io);
  write_bundle(small_bundle(), dir);
  fs::remove(dir / "synonyms.f32");
  EXPECT_EQ(kind_of([&] { (void)load_bundle(dir); }), ErrorKind::Io);
  fs::remove_all(dir);
}

TEST(Datastore, ClassIndexOutOfRange) {
  auto b = small_bundle();
  EmbeddingMatrix bad;
  for (std::size_t r = 0; r < b.synonyms->rows(); ++r) {
    auto label = b.synonyms->label(r);
    if (r == 2) label.class_index = 7;
    bad.append(b.synonyms->row(r), label);
  }
  b.synonyms = bad;
  EXPECT_EQ(kind_of([&] { validate(b); }), ErrorKind::OutOfRange);
}

TEST(Datastore, UncoveredClassRejected) {
  auto b = small_bundle();
  EmbeddingMatrix only_zero;
  for (std::size_t r = 0; r < b.captions->rows(); ++r) {
    if (b.captions->label(r).class_index == 0) only_zero.append(b.captions->row(r), b.captions->label(r));
  }
  b.captions = only_zero;
  EXPECT_EQ(kind_of([&] { validate(b); }), ErrorKind::Missing);
}

// Random valid bundles always load; single invariant violations always fail.
TEST(Datastore, FuzzAcceptsValidRejectsInvalid) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    SyntheticTask t;
    t.classes = 2 + rng() % 5;
    t.dim = 1 + rng() % 40;
    t.templates = 1 + rng() % 3;
    t.captions_per_class = 1 + rng() % 5;
    t.synonyms_per_class = 1 + rng() % 5;
    const auto b = synthetic_bundle(rng, t);
    const auto dir = temp_dir("fuzz");
    ASSERT_NO_THROW(write_bundle(b, dir));
    ASSERT_NO_THROW((void)load_bundle(dir));

    switch (trial % 3) {
      case 0:
        truncate_file(dir / "class_prompts.f32", sizeof(float));
        break;
      case 1: {
        std::fstream f(dir / "captions.f32", std::ios::in | std::ios::out | std::ios::binary);
        const float inf = std::numeric_limits<float>::infinity();
        f.write(reinterpret_cast<const char*>(&inf), sizeof(float));
        break;
      }
      case 2: {
        std::ifstream in(dir / "manifest.json");
        std::string text((std::istreambuf_iterator<char>(in)), {});
        in.close();
        const auto pos = text.find("\"dim\": ");
        text.replace(pos, 7, "\"dim\": 1000");
        std::ofstream(dir / "manifest.json", std::ios::trunc) << text;
        break;
      }
    }
    EXPECT_THROW((void)load_bundle(dir), LovmError) << "trial " << trial;
    fs::remove_all(dir);
  }
}

TEST(Datastore, L2NormalizeExamples) {
  const auto m = l2_normalize(matrix({{3, 4}}, {0}));
  EXPECT_NEAR(m.row(0)[0], 0.6, 1e-7);
  EXPECT_NEAR(m.row(0)[1], 0.8, 1e-7);
  EXPECT_TRUE(m.unit_norm());

  const auto u = matrix({{0.6, 0.8}}, {0});
  const auto n = l2_normalize(u);
  EXPECT_NEAR(n.row(0)[0], u.row(0)[0], 1e-7);
  EXPECT_NEAR(n.row(0)[1], u.row(0)[1], 1e-7);

  try {
    (void)l2_normalize(matrix({{1, 0}, {0, 0}}, {0, 0}));
    FAIL();
  } catch (const LovmError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroVector);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
}

TEST(Datastore, L2NormalizeIdempotent) {
  std::mt19937_64 rng(17);
  std::vector<Vec> rows;
  std::vector<int> classes;
  for (int i = 0; i < 50; ++i) {
    rows.push_back(gaussian_vec(rng, 33, 3.0));
    classes.push_back(0);
  }
  const auto once = l2_normalize(matrix(rows, classes));
  const auto twice = l2_normalize(once);
  for (std::size_t r = 0; r < once.rows(); ++r) {
    for (std::size_t k = 0; k < once.dim(); ++k) EXPECT_NEAR(once.row(r)[k], twice.row(r)[k], 1e-7);
  }
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kHeader = "model_name,pretrain,dataset,top1_accuracy,mean_per_class_recall\n";

TEST(Datastore, GroundTruthDenseAndSparse) {
  const auto dir = temp_dir("gt");
  write_text(dir / "dense.csv", std::string(kHeader) +
                                    "RN50,openai,cifar10,0.7,0.69\nRN50,openai,imagenet1k,0.6,0.6\n"
                                    "ViT-B-32,openai,cifar10,0.9,0.88\nViT-B-32,openai,imagenet1k,0.63,0.63\n");
  const auto dense = load_gt_table(dir / "dense.csv");
  EXPECT_TRUE(dense.dense());
  EXPECT_EQ(dense.size(), 4u);
  EXPECT_DOUBLE_EQ(*dense.imagenet_top1(1), 0.63);

  write_text(dir / "sparse.csv", std::string(kHeader) +
                                     "RN50,openai,cifar10,0.7,0.69\nRN50,openai,stl10,0.6,0.6\n"
                                     "ViT-B-32,openai,cifar10,0.9,0.88\n");
  const auto sparse = load_gt_table(dir / "sparse.csv");
  EXPECT_FALSE(sparse.dense());
  EXPECT_EQ(sparse.size(), 3u);

  write_text(dir / "range.csv", std::string(kHeader) + "RN50,openai,cifar10,1.2,0.69\n");
  EXPECT_EQ(kind_of([&] { (void)load_gt_table(dir / "range.csv"); }), ErrorKind::OutOfRange);

  write_text(dir / "dup.csv", std::string(kHeader) + "RN50,openai,cifar10,0.2,0.3\nRN50,openai,cifar10,0.2,0.3\n");
  EXPECT_EQ(kind_of([&] { (void)load_gt_table(dir / "dup.csv"); }), ErrorKind::Duplicate);

  write_text(dir / "malformed.csv", std::string(kHeader) + "RN50,openai,cifar10,0.2\n");
  EXPECT_EQ(kind_of([&] { (void)load_gt_table(dir / "malformed.csv"); }), ErrorKind::Format);

  write_text(dir / "header.csv", "model,pretrain,dataset,top1,mpcr\n");
  EXPECT_EQ(kind_of([&] { (void)load_gt_table(dir / "header.csv"); }), ErrorKind::Format);

  write_text(dir / "in.csv", "model_name,pretrain,imagenet_top1\nRN50,openai,0.55\nViT-B-32,openai,0.61\n");
  const auto with_in = load_gt_table(dir / "dense.csv", dir / "in.csv");
  EXPECT_DOUBLE_EQ(*with_in.imagenet_top1(0), 0.55);
  fs::remove_all(dir);
}

TEST(Datastore, TaskSpecValidation) {
  TaskSpec t{"ds", {"cat"}, "", ""};
  EXPECT_THROW(validate(t), LovmError);
  t.class_names = {"cat", "cat"};
  EXPECT_EQ(kind_of([&] { validate(t); }), ErrorKind::Duplicate);
  t.class_names = {"cat", ""};
  EXPECT_THROW(validate(t), LovmError);
  t.class_names = {"cat", "dog"};
  EXPECT_NO_THROW(validate(t));
}

TEST(Datastore, ModelIdParsing) {
  const auto id = parse_model_id("ViT-B-32:laion400m_e32");
  EXPECT_EQ(id.name, "ViT-B-32");
  EXPECT_EQ(id.pretrain, "laion400m_e32");
  EXPECT_THROW((void)parse_model_id("ViT-B-32"), LovmError);
}

}  // namespace
