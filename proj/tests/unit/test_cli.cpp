// Copyright 2026 The Translit Authors. All Rights Reserved.
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
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "translit/cli.hpp"
#include "translit/common.hpp"
#include "translit/llm_client.hpp"
#include "translit/metrics.hpp"

namespace translit {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

const fs::path kFixtures = TRANSLIT_FIXTURES_DIR;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("translit_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }

  void make_split(const std::string& name = "split") {
    ASSERT_EQ(run({"synth", "--groups", "600", "--seed", "3", "--output-dir", path("synth")}).code, 0);
    const auto r = run({"split", "--input", path("synth/pairs.jsonl"), "--output-dir", path(name),
                        "--seed", "1", "--unique-val", "20", "--unique-test", "20", "--multi-val",
                        "10", "--multi-test", "10"});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  void write_toy_config() {
    std::ofstream cfg(path("toy.cfg"));
    cfg << "# toy model\n"
           "d-model=32\nheads=2\nenc-layers=2\ndec-layers=2\nffn-dim=64\n"
           "batch-size=16\ngrad-accum-steps=1\nlearning-rate=1e-3\n";
  }

  fs::path dir_;
};

const std::vector<std::string> kSubcommands = {"ingest",   "synth",    "split",    "verify",
                                               "build-vocab", "pretrain", "finetune", "evaluate",
                                               "llm-eval", "report"};

TEST_F(CliTest, HelpExitsZeroForEverySubcommand) {
  const auto top = run({"--help"});
  EXPECT_EQ(top.code, 0);
  for (const auto& cmd : kSubcommands) {
    EXPECT_NE(top.out.find(cmd), std::string::npos) << cmd;
    const auto r = run({cmd, "--help"});
    EXPECT_EQ(r.code, 0) << cmd;
    EXPECT_NE(r.out.find("--config"), std::string::npos) << cmd;
  }
  EXPECT_NE(run({"split", "--help"}).out.find("--seed"), std::string::npos);
  EXPECT_NE(run({"llm-eval", "--help"}).out.find("--transport"), std::string::npos);
  EXPECT_NE(run({"finetune", "--help"}).out.find("--direction"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExitNonZero) {
  EXPECT_NE(run({"bogus"}).code, 0);
  EXPECT_NE(run({"split", "--nope"}).code, 0);
  std::ofstream(path("x.jsonl")) << "";
  const auto no_seed = run({"split", "--input", path("x.jsonl"), "--output-dir", path("out")});
  EXPECT_EQ(no_seed.code, 106);
  EXPECT_NE(no_seed.err.find("--seed"), std::string::npos);
  EXPECT_NE(run({"pretrain", "--input", path("x"), "--vocab", path("v"), "--output-dir", path("o")}).code, 0);
  EXPECT_NE(run({"finetune", "--input", path("x"), "--vocab", path("v"), "--output-dir", path("o")}).code, 0);
  const auto missing = run({"verify", "--input", path("absent")});
  EXPECT_NE(missing.code, 0);
  EXPECT_NE(missing.err.find("absent"), std::string::npos);
}

TEST_F(CliTest, IngestSeparatesRejects) {
  {
    std::ofstream tsv(path("raw.tsv"));
    tsv << "کیا\tkya\n"
           "ہے\thai\n"
           "broken line without tab\n"
           "\t\n";
  }
  const auto r = run({"ingest", "--input", path("raw.tsv"), "--output-dir", path("ing")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream pairs(slurp(path("ing/pairs.jsonl")));
  std::istringstream rejects(slurp(path("ing/rejects.jsonl")));
  std::string line;
  int n_pairs = 0, n_rejects = 0;
  while (std::getline(pairs, line)) ++n_pairs;
  while (std::getline(rejects, line)) ++n_rejects;
  EXPECT_EQ(n_pairs, 2);
  EXPECT_EQ(n_rejects, 2);
  EXPECT_TRUE(fs::exists(path("ing/ingest.manifest.json")));
}

TEST_F(CliTest, VerifyPassesCleanSplitAndNamesPlantedSentence) {
  make_split();
  const auto clean = run({"verify", "--input", path("split")});
  EXPECT_EQ(clean.code, 0) << clean.out << clean.err;

  fs::copy(path("split"), path("leak"), fs::copy_options::recursive);
  std::string planted;
  {
    std::istringstream test(slurp(path("leak/test_small.jsonl")));
    std::getline(test, planted);
  }
  {
    std::ofstream train(path("leak/train.jsonl"), std::ios::app);
    train << planted << '\n';
  }
  const auto leak = run({"verify", "--input", path("leak")});
  EXPECT_EQ(leak.code, 1);
  const auto source = nlohmann::json::parse(planted).at("source").get<std::string>();
  EXPECT_NE(leak.out.find(source), std::string::npos) << leak.out;
  EXPECT_NE(leak.out.find("train.jsonl"), std::string::npos);
}

TEST_F(CliTest, ConfigFilePrecedenceAndManifestEcho) {
  make_split();
  write_toy_config();
  ASSERT_EQ(run({"build-vocab", "--input", path("split"), "--output-dir", path("vocab")}).code, 0);
  const auto r = run({"pretrain", "--config", path("toy.cfg"), "--input", path("split"), "--vocab",
                      path("vocab/vocab.txt"), "--output-dir", path("mlm"), "--seed", "1",
                      "--epochs", "1", "--learning-rate", "2e-3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = read_json(path("mlm/pretrain.manifest.json"));
  const auto& cfg = m.at("config");
  EXPECT_EQ(cfg.at("learning-rate"), "2e-3");  // command line beats the file
  EXPECT_EQ(cfg.at("d-model"), "32");          // file beats the default
  EXPECT_EQ(cfg.at("mask-rate"), "0.15");      // default echoed
  EXPECT_EQ(m.at("command"), "pretrain");
  EXPECT_FALSE(m.at("inputs").empty());
  for (const auto& o : m.at("outputs")) {
    EXPECT_EQ(o.at("sha256").get<std::string>().size(), 64u);
    EXPECT_TRUE(fs::exists(o.at("path").get<std::string>()));
  }
  const auto ckpt = load_checkpoint(path("mlm/mlm_epoch1.ckpt"));
  EXPECT_EQ(ckpt.config.d_model, 32);
  EXPECT_EQ(ckpt.config.n_heads, 2);

  {
    std::ofstream bad(path("bad.cfg"));
    bad << "d-model 32\n";
  }
  EXPECT_NE(run({"pretrain", "--config", path("bad.cfg"), "--input", path("split"), "--vocab",
                 path("vocab/vocab.txt"), "--output-dir", path("mlm2"), "--seed", "1"})
                .code,
            0);
}

// synth -> split -> build-vocab -> pretrain -> finetune -> evaluate.
std::vector<std::vector<std::string>> pipeline(
    const std::function<std::string(const std::string&)>& p) {
  return {
      {"synth", "--groups", "600", "--seed", "3", "--output-dir", p("synth")},
      {"split", "--input", p("synth/pairs.jsonl"), "--output-dir", p("split"), "--seed", "1",
       "--unique-val", "20", "--unique-test", "20", "--multi-val", "10", "--multi-test", "10"},
      {"build-vocab", "--input", p("split"), "--output-dir", p("vocab")},
      {"pretrain", "--config", p("toy.cfg"), "--input", p("split"), "--vocab", p("vocab/vocab.txt"),
       "--output-dir", p("mlm"), "--seed", "1", "--epochs", "1"},
      {"finetune", "--config", p("toy.cfg"), "--input", p("split"), "--phase2-input", p("split"),
       "--vocab", p("vocab/vocab.txt"), "--output-dir", p("ft"), "--seed", "1", "--init",
       p("mlm/mlm_epoch1.ckpt"), "--phase1-epochs", "2", "--phase1-checkpoint-epoch", "2",
       "--phase2-epochs", "1", "--phase2-eval-epochs", "1"},
      {"evaluate", "--checkpoint", p("ft/phase2/epoch1.ckpt"), "--vocab", p("vocab/vocab.txt"),
       "--input", p("split"), "--output-dir", p("eval")},
  };
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name.ends_with(".manifest.json")) continue;
    files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

TEST_F(CliTest, ToyPipelineEmitsManifestsAndIsIdempotent) {
  write_toy_config();
  const auto p = [this](const std::string& rel) { return path(rel); };
  const auto steps = pipeline(p);
  for (const auto& args : steps) {
    const auto r = run(args);
    ASSERT_EQ(r.code, 0) << args[0] << ": " << r.err;
  }
  for (const auto& [dir, cmd] : std::vector<std::pair<std::string, std::string>>{
           {"synth", "synth"}, {"split", "split"}, {"vocab", "build-vocab"}, {"mlm", "pretrain"},
           {"ft", "finetune"}, {"eval", "evaluate"}}) {
    const auto manifest = fs::path(path(dir)) / (cmd + ".manifest.json");
    ASSERT_TRUE(fs::exists(manifest)) << manifest;
    const auto m = read_json(manifest);
    EXPECT_EQ(m.at("command"), cmd);
    EXPECT_FALSE(m.at("outputs").empty()) << cmd;
    EXPECT_TRUE(m.at("timings").contains("wall_seconds"));
    EXPECT_FALSE(m.at("toolkit_version").get<std::string>().empty());
  }
  EXPECT_TRUE(fs::exists(path("ft/phase1/record.json")));
  EXPECT_TRUE(fs::exists(path("ft/phase2/record.json")));
  const auto metrics = read_json(path("eval/metrics.json"));
  EXPECT_TRUE(metrics.contains("char_bleu"));
  EXPECT_NE(slurp(path("eval/metrics.md")).find("| Label | BLEU | Char-BLEU | CHRF |"), std::string::npos);

  const auto first = snapshot(dir_);
  for (const auto& args : steps) ASSERT_EQ(run(args).code, 0) << args[0];
  const auto second = snapshot(dir_);
  ASSERT_EQ(first.size(), second.size());
  for (const auto& [name, bytes] : first) {
    ASSERT_TRUE(second.contains(name)) << name;
    EXPECT_TRUE(second.at(name) == bytes) << name << " changed on rerun";
  }
}

TEST_F(CliTest, EvaluateScoresHypothesisFiles) {
  {
    std::ofstream h(path("hyps.txt"));
    h << "kya haal hai\nmain theek\n";
    std::ofstream r(path("refs.txt"));
    r << "kya haal hai\nmain theek hoon\n";
  }
  const auto res = run({"evaluate", "--hyps", path("hyps.txt"), "--refs", path("refs.txt"),
                        "--label", "toy", "--output-dir", path("ev")});
  ASSERT_EQ(res.code, 0) << res.err;
  const std::vector<std::string> hyps = {"kya haal hai", "main theek"};
  const std::vector<std::string> refs = {"kya haal hai", "main theek hoon"};
  const auto want = evaluate_metrics(hyps, refs, "toy");
  const auto got = metric_report_from_json(read_json(path("ev/metrics.json")));
  EXPECT_EQ(got.bleu.score, want.bleu.score);
  EXPECT_EQ(got.char_bleu.score, want.char_bleu.score);
  EXPECT_EQ(got.chrf.score, want.chrf.score);
  EXPECT_NE(slurp(path("ev/metrics.md")).find(want.markdown_row()), std::string::npos);
}

TEST_F(CliTest, LlmEvalMockMatchesMetricsModule) {
  const auto r = run({"llm-eval", "--transport", "mock", "--fixture", (kFixtures / "llm_mock.jsonl").string(),
                      "--input", (kFixtures / "llm_pairs.jsonl").string(), "--direction", "roman2ur",
                      "--output-dir", path("llm")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("llm/transcript.jsonl"));
  const auto transcript = read_transcript(in);
  ASSERT_EQ(transcript.entries.size(), 10u);
  std::vector<std::string> hyps, refs;
  std::istringstream pairs(slurp(kFixtures / "llm_pairs.jsonl"));
  for (std::string line; std::getline(pairs, line);) {
    refs.push_back(nlohmann::json::parse(line).at("source").get<std::string>());
  }
  for (const auto& e : transcript.entries) hyps.push_back(e.failed ? "" : e.extracted);
  EXPECT_TRUE(transcript.entries[3].failed);
  EXPECT_EQ(transcript.entries[4].retries, 1);
  const auto want = evaluate_metrics(hyps, refs);
  const auto got = metric_report_from_json(read_json(path("llm/metrics.json")));
  EXPECT_EQ(got.bleu.score, want.bleu.score);
  EXPECT_EQ(got.char_bleu.score, want.char_bleu.score);
  EXPECT_EQ(got.chrf.score, want.chrf.score);
}

TEST_F(CliTest, ReportRendersMarkdownAndCsv) {
  const auto r = run({"report", "--input", (kFixtures / "comparison_bleu.json").string(),
                      "--output-dir", path("rep")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* v : {"84.67", "80.966", "94.586"}) {
    EXPECT_NE(r.out.find(v), std::string::npos) << v;
    EXPECT_NE(slurp(path("rep/table.csv")).find(v), std::string::npos) << v;
  }
  EXPECT_EQ(slurp(path("rep/table.md")), r.out);
  EXPECT_TRUE(fs::exists(path("rep/report.manifest.json")));
}

}  // namespace
}  // namespace translit
