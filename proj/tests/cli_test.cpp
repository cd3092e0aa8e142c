// Copyright 2026 The flatdst Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flatdst/cli.hpp"
#include "test_util.hpp"

namespace flatdst {
namespace {

namespace fs = std::filesystem;
using testing::temp_dir;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args, const std::string& input = "") {
  args.insert(args.begin(), "flatdst");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  std::istringstream in(input);
  CliResult r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err, in);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

const char* kTinyConfig =
    "num_layers = 1\nnum_heads = 2\nhidden_dim = 16\nffn_dim = 32\nmax_positions = 128\n"
    "learning_rate = 0.003\nwarmup_proportion = 0.1\nbatch_size = 8\nepochs = 2\nseed = 1\n"
    "reuse_spec = curr+slot\nclip_norm = 1.0\nmax_value_len = 4\neval_mode = predicted\n";

// Generated corpus plus tiny config shared by the command tests.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(temp_dir("cli"));
    const auto r = run_cli({"gen", "--n", "10", "--max-turns", "3", "--seed", "5", "--out",
                            (*root_ / "data").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    write_file(*root_ / "tiny.cfg", kTinyConfig);
    const auto t = run_cli({"train", "--config", (*root_ / "tiny.cfg").string(), "--data",
                            (*root_ / "data").string(), "--out", (*root_ / "run").string()});
    ASSERT_EQ(t.code, 0) << t.err;
  }
  static void TearDownTestSuite() {
    delete root_;
    root_ = nullptr;
  }
  static fs::path root() { return *root_; }
  static fs::path data() { return *root_ / "data"; }
  static fs::path cfg() { return *root_ / "tiny.cfg"; }
  static fs::path ckpt() { return *root_ / "run" / "model.ckpt"; }

 private:
  static fs::path* root_;
};

fs::path* CliTest::root_ = nullptr;

TEST_F(CliTest, GenSplitsEightOneOne) {
  EXPECT_EQ(line_count(data() / "train.jsonl"), 8u);
  EXPECT_EQ(line_count(data() / "dev.jsonl"), 1u);
  EXPECT_EQ(line_count(data() / "test.jsonl"), 1u);
  for (const char* f : {"schema.json", "vocab.txt", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(data() / f)) << f;
  }
}

TEST_F(CliTest, GenIsByteIdenticalForSameSeed) {
  const auto other = root() / "data2";
  ASSERT_EQ(run_cli({"gen", "--n", "10", "--max-turns", "3", "--seed", "5", "--out", other.string()}).code, 0);
  for (const char* f : {"train.jsonl", "dev.jsonl", "test.jsonl", "schema.json", "vocab.txt"}) {
    EXPECT_EQ(slurp(data() / f), slurp(other / f)) << f;
  }
}

TEST(Cli, GenRejectsEmptyCorpus) {
  const auto r = run_cli({"gen", "--n", "0", "--out", temp_dir("cli_empty").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("empty corpus"), std::string::npos) << r.err;
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
  EXPECT_EQ(run_cli({"train", "--config"}).code, 1);
}

TEST_F(CliTest, TrainWritesArtifacts) {
  for (const char* f : {"model.ckpt", "metrics.jsonl", "timings.jsonl", "vocab.txt", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(root() / "run" / f)) << f;
  }
  EXPECT_EQ(line_count(root() / "run" / "metrics.jsonl"), 2u);
  const auto first = nlohmann::json::parse(slurp(root() / "run" / "metrics.jsonl").substr(
      0, slurp(root() / "run" / "metrics.jsonl").find('\n')));
  for (const char* k : {"epoch", "train_loss", "train_jga", "dev_jga"}) {
    EXPECT_TRUE(first.contains(k)) << k;
  }
  const auto manifest = nlohmann::json::parse(slurp(root() / "run" / "manifest.json"));
  EXPECT_EQ(manifest.at("seed").get<int>(), 1);
  EXPECT_TRUE(manifest.at("input_checksums").contains("train.jsonl"));
}

TEST_F(CliTest, TrainIsDeterministic) {
  const auto again = root() / "run_again";
  const auto r = run_cli({"train", "--config", cfg().string(), "--data", data().string(), "--out",
                          again.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(again / "metrics.jsonl"), slurp(root() / "run" / "metrics.jsonl"));
  EXPECT_EQ(slurp(again / "model.ckpt"), slurp(ckpt()));
}

TEST_F(CliTest, TrainRefusesNonEmptyOutWithoutForce) {
  const auto out = root() / "busy";
  fs::create_directories(out);
  write_file(out / "keep.txt", "x");
  const auto r = run_cli({"train", "--config", cfg().string(), "--data", data().string(), "--out", out.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--force"), std::string::npos) << r.err;
  const auto forced = run_cli({"train", "--config", cfg().string(), "--data", data().string(),
                               "--out", out.string(), "--force"});
  EXPECT_EQ(forced.code, 0) << forced.err;
}

TEST_F(CliTest, MissingConfigKeyIsNamed) {
  std::string text = kTinyConfig;
  text.erase(text.find("learning_rate"), text.find('\n', text.find("learning_rate")) -
                                             text.find("learning_rate") + 1);
  write_file(root() / "nolr.cfg", text);
  const auto r = run_cli({"train", "--config", (root() / "nolr.cfg").string(), "--data",
                          data().string(), "--out", (root() / "nolr").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("learning_rate"), std::string::npos) << r.err;
}

TEST_F(CliTest, NonFiniteLossExitsNumeric) {
  std::string text = kTinyConfig;
  text.replace(text.find("learning_rate = 0.003"), 21, "learning_rate = 1e30");
  text.replace(text.find("clip_norm = 1.0"), 15, "clip_norm = none");
  text.replace(text.find("warmup_proportion = 0.1"), 23, "warmup_proportion = 0");
  write_file(root() / "blowup.cfg", text);
  const auto r = run_cli({"train", "--config", (root() / "blowup.cfg").string(), "--data",
                          data().string(), "--out", (root() / "blowup").string()});
  EXPECT_EQ(r.code, 3) << r.out << r.err;
  EXPECT_NE(r.err.find("step"), std::string::npos) << r.err;
}

TEST_F(CliTest, EvalReportsFieldsAndHonoursMode) {
  for (const char* mode : {"gold", "predicted"}) {
    const auto report = root() / (std::string("eval_") + mode + "_test.json");
    const auto r = run_cli({"eval", "--ckpt", ckpt().string(), "--data", data().string(), "--mode",
                            mode, "--out", report.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("joint goal accuracy"), std::string::npos) << r.out;
    const auto j = nlohmann::json::parse(slurp(report));
    EXPECT_EQ(j.at("mode").get<std::string>(), mode);
    for (const char* k : {"joint_goal_accuracy", "per_domain_joint_accuracy", "slot_accuracy",
                          "op_accuracy", "mean_latency_per_turn_ms",
                          "decoder_invocations_histogram", "manifest"}) {
      EXPECT_TRUE(j.contains(k)) << k;
    }
    const double jga = j.at("joint_goal_accuracy").get<double>();
    EXPECT_GE(jga, 0.0);
    EXPECT_LE(jga, 1.0);
  }
}

TEST_F(CliTest, EvalRejectsBadModeAndMissingFiles) {
  EXPECT_EQ(run_cli({"eval", "--ckpt", ckpt().string(), "--data", data().string(), "--mode", "oracle"}).code, 1);
  EXPECT_EQ(run_cli({"eval", "--ckpt", (root() / "none.ckpt").string(), "--data", data().string()}).code, 2);
}

TEST_F(CliTest, InferEmptyInputPrintsNothing) {
  const auto r = run_cli({"infer", "--ckpt", ckpt().string()}, "");
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty()) << r.out;
}

TEST_F(CliTest, InferKeepsStateAndResets) {
  const auto r = run_cli({"infer", "--ckpt", ckpt().string()},
                         "\xE2\x9F\x82 i want a cheap hotel\n"
                         "what area ? \xE2\x9F\x82 north please\n"
                         "\n"
                         "reset\n"
                         "\xE2\x9F\x82 i want a cheap hotel\n");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("turn 1\n"), std::string::npos);
  EXPECT_NE(r.out.find("turn 2\n"), std::string::npos);
  EXPECT_EQ(r.out.find("turn 3\n"), std::string::npos);
  const auto reset = r.out.find("state reset\n");
  ASSERT_NE(reset, std::string::npos);
  const std::string first = r.out.substr(0, r.out.find("turn 2\n"));
  const std::string after = r.out.substr(reset + 12);
  EXPECT_EQ(after, first);
}

TEST(Cli, GradcheckDefaultsAndPasses) {
  const auto dir = temp_dir("cli_gc");
  write_file(dir / "gc.cfg",
             "num_layers = 1\nnum_heads = 2\nhidden_dim = 8\nffn_dim = 16\nmax_positions = 128\n"
             "init_std = 0.2\nnum_slots = 2\nseed = 3\ngradcheck_coords = 4\n");
  const auto r = run_cli({"gradcheck", "--config", (dir / "gc.cfg").string()});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("eps=1e-05"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("PASS"), std::string::npos) << r.out;
  const auto bad = run_cli({"gradcheck", "--config", (dir / "gc.cfg").string(), "--eps", "0.5"});
  EXPECT_NE(bad.code, 0);
}

TEST_F(CliTest, AblateRowsAndSpecValidation) {
  const auto out = root() / "ablate";
  const auto r = run_cli({"ablate", "--config", cfg().string(), "--data", data().string(), "--specs",
                          "full,curr+slot", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("expected trend"), std::string::npos) << r.out;
  const auto j = nlohmann::json::parse(slurp(out / "ablation.json"));
  EXPECT_EQ(j.at("rows").size(), 2u);
  EXPECT_EQ(line_count(out / "ablation.tsv"), 3u);
  const auto again = root() / "ablate2";
  ASSERT_EQ(run_cli({"ablate", "--config", cfg().string(), "--data", data().string(), "--specs",
                     "full,curr+slot", "--out", again.string()}).code, 0);
  EXPECT_EQ(slurp(out / "ablation.tsv"), slurp(again / "ablation.tsv"));
  const auto bad = run_cli({"ablate", "--config", cfg().string(), "--data", data().string(), "--specs",
                            "curr+bogus"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("bogus"), std::string::npos) << bad.err;
}

}  // namespace
}  // namespace flatdst
