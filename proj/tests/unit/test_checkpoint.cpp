#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

#include "mesh/checkpoint.hpp"
#include "mesh/evaluation.hpp"
#include "support/fixtures.hpp"
#include "support/model_fixture.hpp"

namespace mesh {
namespace {

using testing::ModelFixture;
using testing::TempDir;

std::vector<Tensor> test_scores(MeshModel& model, const QueryContext& context) {
  EvaluationOptions opts;
  opts.keep_logits = true;
  return evaluate(model, context, Split::test, opts).logits;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    model = fx.model();
    train(*model, *fx.context, ModelFixture::quick_train(2, 2));
    file = dir / "model.ckpt";
    save_checkpoint(*model, "dim = 8\n", 9, file);
  }
  ModelFixture fx;
  std::unique_ptr<MeshModel> model;
  TempDir dir{"ckpt"};
  std::filesystem::path file;
};

TEST_F(CheckpointTest, RoundTripReproducesScoresBitExactly) {
  const auto before = test_scores(*model, *fx.context);
  ASSERT_FALSE(before.empty());
  auto restored = fx.model();
  const Checkpoint c = read_checkpoint(file);
  restore_parameters(*restored, c);
  EXPECT_EQ(test_scores(*restored, *fx.context), before);
  EXPECT_EQ(c.config_echo, "dim = 8\n");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.num_entities, fx.config.num_entities);
  EXPECT_EQ(c.num_relations, fx.config.num_relations);
}

TEST_F(CheckpointTest, FrozenRegistryMatchesStructuralEncoder) {
  const Checkpoint c = read_checkpoint(file);
  std::vector<std::string> expected;
  for (const Parameter* p : model->parameters())
    if (p->frozen) expected.push_back(p->name);
  EXPECT_EQ(c.frozen_names(), expected);
  ASSERT_FALSE(expected.empty());
  for (const std::string& n : expected) EXPECT_EQ(n.rfind("structural.", 0), 0u) << n;
  auto restored = fx.model();
  restore_parameters(*restored, c);
  const auto original = model->parameters();
  const auto loaded = restored->parameters();
  for (std::size_t i = 0; i < loaded.size(); ++i) EXPECT_EQ(loaded[i]->frozen, original[i]->frozen) << loaded[i]->name;
}

TEST_F(CheckpointTest, WriteReadWriteIsByteStable) {
  const auto again = dir / "again.ckpt";
  write_checkpoint(read_checkpoint(file), again);
  EXPECT_EQ(read_bytes(file), read_bytes(again));
}

TEST_F(CheckpointTest, BadMagicIsDataError) {
  std::string bytes = read_bytes(file);
  bytes[0] = 'X';
  write_bytes(file, bytes);
  EXPECT_THROW(read_checkpoint(file), DataError);
}

TEST_F(CheckpointTest, TruncationIsDataError) {
  const std::string bytes = read_bytes(file);
  for (std::size_t keep : {std::size_t{4}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    write_bytes(file, bytes.substr(0, keep));
    EXPECT_THROW(read_checkpoint(file), DataError) << keep;
  }
}

TEST_F(CheckpointTest, UnsupportedVersionIsDataError) {
  std::string bytes = read_bytes(file);
  bytes[8] = 7;
  write_bytes(file, bytes);
  EXPECT_THROW(read_checkpoint(file), DataError);
}

TEST_F(CheckpointTest, MissingFileIsDataError) {
  EXPECT_THROW(read_checkpoint(dir / "absent.ckpt"), DataError);
}

TEST_F(CheckpointTest, ShapeMismatchOnRestoreIsDataError) {
  Checkpoint c = read_checkpoint(file);
  c.tensors[0].value = Tensor({1, 1});
  auto restored = fx.model();
  EXPECT_THROW(restore_parameters(*restored, c), DataError);
}

TEST_F(CheckpointTest, NameMismatchOnRestoreIsDataError) {
  Checkpoint c = read_checkpoint(file);
  c.tensors[0].name = "not.a.parameter";
  auto restored = fx.model();
  EXPECT_THROW(restore_parameters(*restored, c), DataError);
  c = read_checkpoint(file);
  c.tensors.pop_back();
  EXPECT_THROW(restore_parameters(*restored, c), DataError);
}

TEST_F(CheckpointTest, VocabularyMismatchIsDataError) {
  Checkpoint c = read_checkpoint(file);
  c.num_entities += 1;
  auto restored = fx.model();
  EXPECT_THROW(restore_parameters(*restored, c), DataError);
}

}  // namespace
}  // namespace mesh
