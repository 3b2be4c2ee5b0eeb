#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rlcc_lab/cli.hpp"

using namespace rlcc;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "rlcc_lab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("rlcc_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& body) const {
    std::ofstream(path(name)) << body;
    return path(name);
  }

  std::string write_policy() const {
    PolicyCheckpoint c;
    c.policy = MlpPolicy(10, 1);
    c.policy.w1(0, 8) = 0.5;
    c.policy.w1(0, 9) = -0.3;
    c.policy.w2(0) = 1.0;
    std::ofstream os(path("pol.ckpt"));
    save_checkpoint(os, c);
    return path("pol.ckpt");
  }

  std::string write_stump() const {
    TreeEnsemble e;
    e.n_features = 10;
    e.max_depth = 1;
    e.eta = 1.0;
    RegressionTree t;
    t.nodes = {TreeNode{false, 8, 0.01, 1, 2, 0.0}, TreeNode{true, -1, 0.0, -1, -1, -0.1},
               TreeNode{true, -1, 0.0, -1, -1, 0.05}};
    e.trees.push_back(t);
    std::ofstream os(path("ens.txt"));
    save_ensemble(os, e);
    return path("ens.txt");
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("simulate"), std::string::npos);
}

TEST_F(Cli, UnknownSubcommandOrFlagExitsOne) {
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"simulate", "--no-such-flag"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
}

TEST_F(Cli, ConfigErrorsExitOne) {
  const auto bad = write("bad.ini", "[sim]\nwarp_factor = 9\n");
  const auto r = run({"simulate", "--config", bad, "--out-dir", path("o")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("warp_factor"), std::string::npos);
  const auto bad_value = write("bv.ini", "[sim]\nbase_rtt_us = fast\n");
  EXPECT_EQ(run({"simulate", "--config", bad_value}).code, 1);
  EXPECT_EQ(run({"simulate", "--controller", "rlcc-mlp", "--out-dir", path("o")}).code, 1);
  EXPECT_EQ(run({"simulate", "--controller", "tcp"}).code, 1);
  EXPECT_EQ(run({"simulate", "--config", path("missing.ini")}).code, 1);
}

TEST_F(Cli, RuntimeFailureExitsTwo) {
  const auto ens = write_stump();
  const auto r = run({"export", "--ensemble", ens, "--out", path("no/such/dir/x.txt")});
  EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, SimulateWritesTraceAndMetrics) {
  const auto cfg = write("s.ini",
                         "[sim]\nsample_interval_us = 50\n[scenario]\nkind = many_to_one\nflows = 8\n"
                         "duration_us = 3000\nwarmup_us = 1000\n[controller]\nkind = swift\n");
  const auto r = run({"simulate", "--config", cfg, "--out-dir", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("o/trace.csv")));
  std::ifstream ms(path("o/metrics.csv"));
  std::string header, row;
  std::getline(ms, header);
  std::getline(ms, row);
  EXPECT_EQ(header.rfind("scenario,controller,flows", 0), 0u);
  EXPECT_EQ(row.rfind("many_to_one_4x2,swift,8,", 0), 0u);
}

TEST_F(Cli, BenchRunsControllerList) {
  const auto cfg = write("b.ini", "[scenario]\nduration_us = 2000\nwarmup_us = 500\n");
  const auto r = run({"bench", "--config", cfg, "--flows", "4", "--controllers", "dcqcn,swift", "--out-dir", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("dcqcn on"), std::string::npos);
  EXPECT_NE(r.out.find("swift on"), std::string::npos);
}

TEST_F(Cli, BenchLatencyAblation) {
  const auto cfg = write("b.ini", "[scenario]\nduration_us = 2000\nwarmup_us = 500\n");
  const auto r = run({"bench", "--config", cfg, "--flows", "4", "--model", write_stump(), "--latencies", "1,100",
                      "--out-dir", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream is(path("o/ablation.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) ++lines;
  EXPECT_EQ(lines, 3);
}

TEST_F(Cli, ProbeReportsSignPattern) {
  const auto r = run({"probe", "--policy", write_policy(), "--out-dir", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("PASS sign pattern"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("o/probe.csv")));
  EXPECT_EQ(run({"probe"}).code, 1);
}

TEST_F(Cli, ExportToStdout) {
  const auto r = run({"export", "--ensemble", write_stump()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("if x[8] <= 0.01 {"), std::string::npos);
  EXPECT_NE(r.out.find("return 0 + 1 * acc"), std::string::npos);
}

TEST_F(Cli, TheoryWritesTable) {
  const auto cfg = write("t.ini", "[sim]\nduration_us = 3000\n");
  const auto r = run({"theory", "--config", cfg, "--policy", write_policy(), "--n", "2,8", "--out-dir", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("max relative error"), std::string::npos);
  std::ifstream is(path("o/theory.csv"));
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "n,measured_inflation,predicted_inflation,rel_error,swift_inflation,swift_fit");
}

TEST_F(Cli, TrainAndDistillProduceLoadableFiles) {
  const auto cfg = write("td.ini",
                         "[train]\nepochs = 1\nbuffer_size = 128\nepisode_us = 2000\n"
                         "[distill]\nn_samples = 2000\nepisode_us = 2000\nmin_leaf = 5\n[sim]\nduration_us = 2000\n");
  auto r = run({"train", "--config", cfg, "--out", path("p.ckpt"), "--out-dir", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("o/train_log.csv")));
  EXPECT_NO_THROW(load_policy_file(path("p.ckpt")));
  r = run({"distill", "--config", cfg, "--teacher", write_policy(), "--out", path("e.txt"), "--out-dir", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NO_THROW(load_ensemble_file(path("e.txt")));
  EXPECT_TRUE(fs::exists(path("o/fidelity.csv")));
}

TEST_F(Cli, InstalledBinaryRuns) {
  const char* tool = std::getenv("RLCC_LAB_TOOL");
  if (!tool) GTEST_SKIP() << "RLCC_LAB_TOOL not set";
  const std::string quiet = " > " + path("log.txt") + " 2>&1";
  EXPECT_EQ(std::system((std::string(tool) + " --help" + quiet).c_str()), 0);
  const int rc = std::system((std::string(tool) + " frobnicate" + quiet).c_str());
  ASSERT_TRUE(WIFEXITED(rc));
  EXPECT_EQ(WEXITSTATUS(rc), 1);
}
