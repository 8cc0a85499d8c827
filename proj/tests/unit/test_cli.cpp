#include <gtest/gtest.h>

#include <algorithm>
#include <initializer_list>
#include <sstream>

#include "mesh/tkg.hpp"
#include "mesh_cli/cli.hpp"
#include "support/fixtures.hpp"

namespace mesh {
namespace {

using testing::read_text;
using testing::TempDir;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::initializer_list<std::string> args) {
  std::vector<std::string> storage = {"mesh"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& s : storage) argv.push_back(s.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    data = (dir / "graph").string();
    const Outcome o = run_cli({"prepare", data, "--synthetic", "--entities", "12", "--relations", "3", "--timestamps",
                               "16", "--facts-per-timestamp", "8", "--seed", "5"});
    ASSERT_EQ(o.code, 0) << o.err;
  }

  // A tiny desk run into `out`.
  Outcome train_into(const std::string& out, std::initializer_list<std::string> extra = {}) {
    std::vector<std::string> args = {"train",          data,  "--profile",       "desk", "--dim", "8",
                                     "--llm-dim",      "12",  "--channels",      "3",    "--adapter-hidden", "6",
                                     "--stage0-epochs", "2",  "--stage1-epochs", "2",    "--out", out};
    args.insert(args.end(), extra.begin(), extra.end());
    std::vector<const char*> argv = {"mesh"};
    for (const std::string& s : args) argv.push_back(s.c_str());
    std::ostringstream o, e;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
    return {code, o.str(), e.str()};
  }

  TempDir dir{"cli"};
  std::string data;
};

TEST(Cli, UnknownSubcommandIsConfigError) {
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({}).code, cli::kConfigError);
}

TEST(Cli, MissingDatasetIsDataError) {
  TempDir dir("cli_missing");
  const Outcome o = run_cli({"stats", (dir / "nothing").string()});
  EXPECT_EQ(o.code, cli::kDataError);
  EXPECT_NE(o.err.find("data error"), std::string::npos);
}

TEST(Cli, HelpSucceeds) { EXPECT_EQ(run_cli({"--help"}).code, 0); }

TEST_F(CliTest, PrepareValidatesAndNormalizes) {
  const std::string norm = (dir / "normalized").string();
  const Outcome o = run_cli({"prepare", data, "--out", norm});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(o.out.rfind("ok\t12 entities\t3 relations\t16 timestamps", 0), 0u) << o.out;
  const Dataset a = load_dataset(data), b = load_dataset(norm);
  EXPECT_EQ(a.train.fact_count(), b.train.fact_count());
  EXPECT_EQ(a.test.fact_count(), b.test.fact_count());
}

TEST_F(CliTest, StatsAndNaivePrintReports) {
  const Outcome kv = run_cli({"stats", data, "--format", "kv"});
  ASSERT_EQ(kv.code, 0) << kv.err;
  EXPECT_NE(kv.out.find("entities"), std::string::npos) << kv.out;
  const Outcome naive = run_cli({"naive", data});
  ASSERT_EQ(naive.code, 0) << naive.err;
  EXPECT_EQ(naive.out.rfind("queries\tMRR\tH@1\tH@3\tH@10\n", 0), 0u);
}

TEST_F(CliTest, EmitPromptsWritesOneLinePerSymbol) {
  const auto file = dir / "prompts.tsv";
  const Outcome o = run_cli({"emit-prompts", data, "--output", file.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const std::string text = read_text(file);
  // 12 entities and 3 relations with their inverses.
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 12 + 6);
}

TEST_F(CliTest, TrainWritesArtifactsDeterministically) {
  const std::string a = (dir / "run_a").string(), b = (dir / "run_b").string();
  const Outcome first = train_into(a);
  ASSERT_EQ(first.code, 0) << first.err;
  ASSERT_EQ(train_into(b).code, 0);
  for (const char* f : {"config.echo", "stage0.log", "train.log", "model.ckpt", "metrics.txt", "metrics.tsv"})
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(a) / f)) << f;
  EXPECT_EQ(read_text(std::filesystem::path(a) / "train.log"), read_text(std::filesystem::path(b) / "train.log"));
  EXPECT_EQ(read_text(std::filesystem::path(a) / "stage0.log"), read_text(std::filesystem::path(b) / "stage0.log"));
  EXPECT_EQ(read_text(std::filesystem::path(a) / "metrics.tsv"), read_text(std::filesystem::path(b) / "metrics.tsv"));
  const std::string log = read_text(std::filesystem::path(a) / "train.log");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 2);
  EXPECT_NE(read_text(std::filesystem::path(a) / "config.echo").find("dim = 8\n"), std::string::npos);
}

TEST_F(CliTest, EvalAndAnalyzeReuseCheckpoint) {
  const std::string run = (dir / "run").string();
  ASSERT_EQ(train_into(run).code, 0);
  const std::string ckpt = (std::filesystem::path(run) / "model.ckpt").string();
  const std::string eval_dir = (dir / "eval").string();
  const Outcome e = run_cli({"eval", "--checkpoint", ckpt, "--out", eval_dir});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_EQ(read_text(std::filesystem::path(eval_dir) / "metrics.tsv"),
            read_text(std::filesystem::path(run) / "metrics.tsv"));
  const Outcome g = run_cli({"analyze", "--checkpoint", ckpt, "--out", (dir / "gates").string()});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "gates" / "gates.txt"));
  EXPECT_EQ(run_cli({"eval", "--checkpoint", (dir / "absent.ckpt").string()}).code, cli::kDataError);
}

TEST_F(CliTest, EventAwareFlagDoesNotChangeEvaluation) {
  const std::string run = (dir / "run").string();
  ASSERT_EQ(train_into(run).code, 0);
  const std::string ckpt = (std::filesystem::path(run) / "model.ckpt").string();
  ASSERT_EQ(run_cli({"eval", "--checkpoint", ckpt, "--out", (dir / "plain").string()}).code, 0);
  ASSERT_EQ(run_cli({"eval", "--checkpoint", ckpt, "--disable-event-aware", "--out", (dir / "flag").string()}).code,
            0);
  EXPECT_EQ(read_text(dir / "plain" / "metrics.tsv"), read_text(dir / "flag" / "metrics.tsv"));
}

TEST_F(CliTest, SweepWritesOneRunPerSetting) {
  const std::string root = (dir / "sweep").string();
  std::vector<std::string> args = {"sweep", data, "--profile", "desk", "--dim", "8", "--llm-dim", "12",
                                   "--channels", "3", "--stage0-epochs", "1", "--stage1-epochs", "1",
                                   "--omega-values", "0,0.5", "--out", root};
  std::vector<const char*> argv = {"mesh"};
  for (const std::string& s : args) argv.push_back(s.c_str());
  std::ostringstream o, e;
  ASSERT_EQ(cli::run(static_cast<int>(argv.size()), argv.data(), o, e), 0) << e.str();
  const std::string table = read_text(std::filesystem::path(root) / "sweep.tsv");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(root) / "omega_0" / "model.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(root) / "omega_0.5" / "train.log"));
  EXPECT_NE(read_text(std::filesystem::path(root) / "omega_0.5" / "config.echo").find("omega = 0.5\n"),
            std::string::npos);
}

TEST_F(CliTest, BadConfigValuesExitWithConfigError) {
  EXPECT_EQ(train_into((dir / "x").string(), {"--dim", "zero"}).code, cli::kConfigError);
  EXPECT_EQ(train_into((dir / "x").string(), {"--set", "bogus=1"}).code, cli::kConfigError);
  EXPECT_EQ(train_into((dir / "x").string(), {"--kernel-width", "2"}).code, cli::kConfigError);
  EXPECT_EQ(run_cli({"sweep", data, "--profile", "desk"}).code, cli::kConfigError);
}

TEST_F(CliTest, NonFiniteTrainingExitsWithNumericError) {
  EXPECT_EQ(train_into((dir / "nan").string(), {"--learning-rate", "1e300"}).code, cli::kNumericError);
}

}  // namespace
}  // namespace mesh
