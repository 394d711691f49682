// Copyright 2026 The hipama Authors.
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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <regex>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "hipama/checkpoint.hpp"
#include "hipama/cli.hpp"
#include "hipama/inspect.hpp"
#include "hipama/train.hpp"

namespace hipama {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hipama_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "hipama");
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Small synthetic train/test files plus a 2-epoch model trained on them.
  void train_small(const std::string& out, std::vector<std::string> extra = {}) {
    ASSERT_EQ(run({"gen-synthetic", "-n", "30", "--seed", "1", "--out", path("train.txt")}), 0);
    ASSERT_EQ(run({"gen-synthetic", "-n", "12", "--seed", "2", "--out", path("test.txt")}), 0);
    std::vector<std::string> args{"train", "--train", path("train.txt"), "--test",
                                  path("test.txt"), "--epochs", "2", "--seed", "0",
                                  "--batch-size", "10", "--out", path(out)};
    args.insert(args.end(), extra.begin(), extra.end());
    ASSERT_EQ(run(args), 0) << err_.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, GenSyntheticWritesOneLinePerUtterance) {
  ASSERT_EQ(run({"gen-synthetic", "-n", "2500", "--seed", "0", "--out", path("d.txt")}), 0);
  const std::string text = slurp(path("d.txt"));
  EXPECT_EQ(count_lines(text), 2500u);
  const auto sidecar = nlohmann::json::parse(slurp(path("d.txt.coefficients.json")));
  EXPECT_EQ(sidecar.at("seed"), 0);
  EXPECT_TRUE(sidecar.at("coefficients").contains("stress_scale"));
  EXPECT_EQ(sidecar.at("options").at("onset_phones"), 14);
  ASSERT_EQ(run({"gen-synthetic", "-n", "2500", "--seed", "0", "--out", path("e.txt")}), 0);
  EXPECT_EQ(slurp(path("e.txt")), text);
}

TEST_F(CliTest, GenSyntheticRejectsBadArguments) {
  EXPECT_EQ(run({"gen-synthetic", "-n", "0", "--out", path("d.txt")}), 2);
  EXPECT_NE(err_.str().find("-n"), std::string::npos) << err_.str();
  EXPECT_EQ(run({"gen-synthetic", "-n", "5"}), 2);
  EXPECT_EQ(run({"gen-synthetic", "-n", "5", "--noise", "-1", "--out", path("d.txt")}), 2);
  EXPECT_EQ(run({"gen-synthetic", "-n", "5", "--n-phones", "1", "--out", path("d.txt")}), 2);
  EXPECT_EQ(run({"bogus"}), 2);
  EXPECT_EQ(run({}), 2);
  EXPECT_EQ(run({"--help"}), 0);
}

TEST_F(CliTest, TrainWritesArtifactsAndLogs) {
  train_small("run");
  for (const char* f : {"run/config.json", "run/summary.txt", "run/seed-0/train.log",
                        "run/seed-0/final.ckpt", "run/seed-0/best.ckpt", "run/seed-0/eval.txt"}) {
    EXPECT_TRUE(fs::exists(path(f))) << f;
  }
  const std::string log = slurp(path("run/seed-0/train.log"));
  EXPECT_NE(log.find("parameters 24321\n"), std::string::npos);
  EXPECT_NE(log.find("\nepoch 0 L_total="), std::string::npos) << log;
  EXPECT_TRUE(std::regex_search(log, std::regex(
      "epoch 2 L_total=\\S+ L_phoneme.accuracy=\\S+ L_word.accuracy=\\S+ L_word.stress=\\S+ "
      "L_word.total=\\S+ L_utt.accuracy=\\S+ L_utt.completeness=\\S+ L_utt.fluency=\\S+ "
      "L_utt.prosody=\\S+ L_utt.total=\\S+")))
      << log;
  EXPECT_NE(slurp(path("run/summary.txt")).find("# summary over 1 runs"), std::string::npos);
  EXPECT_NE(slurp(path("run/seed-0/eval.txt")).find("# config "), std::string::npos);
}

TEST_F(CliTest, TrainingIsReproducible) {
  const std::vector<std::string> files{"seed-0/final.ckpt", "seed-0/best.ckpt", "seed-0/eval.txt",
                                       "seed-0/train.log", "summary.txt"};
  train_small("run");
  std::vector<std::string> first;
  for (const auto& f : files) first.push_back(slurp(path("run/" + f)));
  fs::remove_all(path("run"));
  train_small("run");
  for (std::size_t i = 0; i < files.size(); ++i) {
    EXPECT_TRUE(slurp(path("run/" + files[i])) == first[i]) << files[i];
  }
}

TEST_F(CliTest, MultipleSeedsReportMeanAndStd) {
  train_small("run", {});
  ASSERT_EQ(run({"train", "--train", path("train.txt"), "--test", path("test.txt"), "--epochs",
                 "1", "--seeds", "3,4", "--out", path("multi")}),
            0)
      << err_.str();
  EXPECT_TRUE(fs::exists(path("multi/seed-3/final.ckpt")));
  EXPECT_TRUE(fs::exists(path("multi/seed-4/final.ckpt")));
  const std::string summary = slurp(path("multi/summary.txt"));
  EXPECT_NE(summary.find("# summary over 2 runs (mean ± std)"), std::string::npos) << summary;
  EXPECT_NE(slurp(path("multi/seed-3/final.ckpt")), slurp(path("multi/seed-4/final.ckpt")));
  EXPECT_EQ(run({"train", "--train", path("train.txt"), "--seed", "1", "--seeds", "1,2", "--out",
                 path("bad")}),
            2);
}

TEST_F(CliTest, AblationFlagsChangeLoggedParameterCounts) {
  ASSERT_EQ(run({"gen-synthetic", "-n", "10", "--out", path("train.txt")}), 0);
  std::set<std::string> counts;
  const std::vector<std::vector<std::string>> variants{
      {}, {"--no-hierarchy"}, {"--no-multi-aspect"}, {"--no-hierarchy", "--no-multi-aspect"}};
  for (std::size_t i = 0; i < variants.size(); ++i) {
    std::vector<std::string> args{"train", "--train", path("train.txt"), "--epochs", "1",
                                  "--seed", "0", "--out", path("v" + std::to_string(i))};
    args.insert(args.end(), variants[i].begin(), variants[i].end());
    ASSERT_EQ(run(args), 0) << err_.str();
    std::smatch m;
    const std::string log = slurp(path("v" + std::to_string(i) + "/seed-0/train.log"));
    ASSERT_TRUE(std::regex_search(log, m, std::regex("parameters (\\d+)")));
    counts.insert(m[1]);
  }
  EXPECT_EQ(counts.size(), 4u);
}

TEST_F(CliTest, ConfigFileIsOverriddenByFlags) {
  ASSERT_EQ(run({"gen-synthetic", "-n", "10", "--out", path("train.txt")}), 0);
  {
    std::ofstream cfg(path("cfg.json"));
    cfg << R"({"epochs": 5, "learning_rate": 0.002, "batch_size": 4,
               "model": {"hierarchical": false}})";
  }
  ASSERT_EQ(run({"train", "--config", path("cfg.json"), "--train", path("train.txt"), "--epochs",
                 "1", "--seed", "0", "--out", path("run")}),
            0)
      << err_.str();
  const RunConfig resolved = nlohmann::json::parse(slurp(path("run/config.json"))).get<RunConfig>();
  EXPECT_EQ(resolved.epochs, 1u);
  EXPECT_EQ(resolved.learning_rate, 0.002);
  EXPECT_EQ(resolved.batch_size, 4u);
  EXPECT_FALSE(resolved.model.hierarchical);
  EXPECT_EQ(resolved.seeds, (std::vector<std::uint64_t>{0}));
  {
    std::ofstream cfg(path("broken.json"));
    cfg << "{not json";
  }
  EXPECT_EQ(run({"train", "--config", path("broken.json"), "--train", path("train.txt"), "--out",
                 path("x")}),
            2);
  EXPECT_EQ(run({"train", "--train", path("missing.txt"), "--out", path("x")}), 2);
  EXPECT_EQ(run({"train", "--train", path("train.txt"), "--epochs", "0", "--out", path("x")}), 2);
}

TEST_F(CliTest, EvalIsRepeatableAndChecksPhoneInventory) {
  train_small("run");
  const std::string ckpt = path("run/seed-0/final.ckpt");
  ASSERT_EQ(run({"eval", "--checkpoint", ckpt, "--data", path("test.txt")}), 0) << err_.str();
  const std::string first = out_.str();
  ASSERT_EQ(run({"eval", "--checkpoint", ckpt, "--data", path("test.txt"), "--out",
                 path("report.txt")}),
            0);
  EXPECT_EQ(slurp(path("report.txt")), first);
  EXPECT_NE(first.find("units phonemes="), std::string::npos);

  ASSERT_EQ(run({"gen-synthetic", "-n", "5", "--n-phones", "20", "--out", path("small.txt")}), 0);
  EXPECT_EQ(run({"eval", "--checkpoint", ckpt, "--data", path("small.txt")}), 2);
  EXPECT_NE(err_.str().find("model expects 42"), std::string::npos) << err_.str();

  {
    std::ofstream bad(path("bad.ckpt"), std::ios::binary);
    bad << "not a checkpoint";
  }
  EXPECT_EQ(run({"eval", "--checkpoint", path("bad.ckpt"), "--data", path("test.txt")}), 2);
  EXPECT_NE(err_.str().find("magic"), std::string::npos) << err_.str();
}

TEST_F(CliTest, InspectAttentionTables) {
  train_small("run");
  ASSERT_EQ(run({"inspect-attention", "--checkpoint", path("run/seed-0/final.ckpt"), "--data",
                 path("test.txt")}),
            0)
      << err_.str();
  std::istringstream lines(out_.str());
  std::string line, level;
  std::map<std::string, std::vector<std::vector<double>>> matrices;
  while (std::getline(lines, line)) {
    if (line.rfind("# level ", 0) == 0) level = line.substr(8, line.find(' ', 8) - 8);
    if (line.rfind("matrix,", 0) != 0) continue;
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    std::getline(cells, cell, ',');
    std::getline(cells, cell, ',');
    while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
    matrices[level].push_back(row);
  }
  ASSERT_EQ(matrices["word"].size(), 3u);
  ASSERT_EQ(matrices["utterance"].size(), 5u);
  for (const auto& [name, m] : matrices) {
    for (const auto& row : m) {
      EXPECT_EQ(row.size(), m.size() - 1) << name;
      double s = 0;
      for (double v : row) s += v;
      EXPECT_NEAR(s, 1.0, 1e-9) << name;
    }
  }
}

TEST_F(CliTest, InspectAttentionRejectsAblatedCheckpoint) {
  train_small("run", {"--no-multi-aspect"});
  EXPECT_EQ(run({"inspect-attention", "--checkpoint", path("run/seed-0/final.ckpt"), "--data",
                 path("test.txt")}),
            2);
  EXPECT_NE(err_.str().find("multi-aspect"), std::string::npos) << err_.str();
}

TEST(InspectTest, SingleUtteranceMatchesDirectAverage) {
  HipamaModel model(ModelConfig{});
  const UtteranceSample s = testing::make_sample("u", {0, 1, 1, 2, 3}, 42, 3);
  const AttentionTables tables = inspect_attention(model, {s});
  const PredictionSet p = model.forward(testing::batch_of({s}));
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t i = 0; i < 2; ++i) {
      double mean = 0;
      for (std::size_t t = 0; t < 5; ++t) mean += p.ma_weights_word.at({0, t, n, i}) / 5;
      EXPECT_NEAR(tables.word.weights[n][i], mean, 1e-15);
    }
  }
  for (std::size_t n = 0; n < 5; ++n) {
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(tables.utterance.weights[n][i], p.ma_weights_utt.at({0, n, i}));
    }
  }
  EXPECT_EQ(tables.word.units, 5u);
  EXPECT_EQ(tables.utterance.units, 1u);
}

TEST(RunConfigTest, DefaultsMatchTrainingRegime) {
  const RunConfig run;
  EXPECT_EQ(run.epochs, 100u);
  EXPECT_EQ(run.learning_rate, 1e-3);
  EXPECT_EQ(run.batch_size, 25u);
  EXPECT_EQ(run.seeds, (std::vector<std::uint64_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(run.model.width, 24u);
  EXPECT_EQ(run.model.heads, 4u);
  EXPECT_EQ(run.model.dropout_utt, 0.2);
  EXPECT_EQ(run.model.gop_dim, 84u);
  EXPECT_TRUE(run.model.hierarchical);
  EXPECT_TRUE(run.model.multi_aspect_attention);
  EXPECT_FALSE(run.model.positional_encoding);
  EXPECT_EQ(nlohmann::json(run).get<RunConfig>(), run);
  EXPECT_EQ(nlohmann::json::object().get<RunConfig>(), run);
}

TEST(ConfigTest, ValidationAndPartialJson) {
  ModelConfig c;
  c.heads = 5;
  EXPECT_THROW(c.validate(), ValidationError);
  c = ModelConfig{};
  c.aspects_word = {"accuracy", "accuracy"};
  EXPECT_THROW(c.validate(), ValidationError);
  c.aspects_word = {"fluency"};
  EXPECT_THROW(c.validate(), ValidationError);
  c.aspects_word = {};
  EXPECT_THROW(c.validate(), ValidationError);
  const auto small = nlohmann::json{{"n_phones", 10}}.get<ModelConfig>();
  EXPECT_EQ(small.gop_dim, 20u);
  EXPECT_NO_THROW(small.validate());
}

TEST(CheckpointTest, RoundTripPreservesModelAndPredictions) {
  ModelConfig cfg = testing::tiny_config();
  cfg.seed = 11;
  cfg.hierarchical = false;
  HipamaModel model(cfg);
  const nlohmann::json run = {{"note", "x"}};
  const std::string bytes = serialize_checkpoint(model, run);
  EXPECT_EQ(bytes.rfind("HIPAMA-CKPT-1\n", 0), 0u);
  LoadedCheckpoint back = deserialize_checkpoint(bytes);
  EXPECT_EQ(back.model.config(), cfg);
  EXPECT_EQ(back.run, run);
  const auto samples = std::vector<UtteranceSample>{testing::make_sample("a", {0, 1, 1}, 3, 4)};
  const Batch batch = testing::batch_of(samples);
  EXPECT_EQ(back.model.forward(batch).utt_scores[1].values(),
            model.forward(batch).utt_scores[1].values());
  EXPECT_EQ(serialize_checkpoint(back.model, run), bytes);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), ValidationError);
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), ValidationError);
  EXPECT_THROW(deserialize_checkpoint("HIPAMA-CKPT-2\n" + bytes.substr(14)), ValidationError);
}

TEST(TrainTest, NonFiniteLossNamesTheBatch) {
  std::vector<UtteranceSample> samples;
  for (int i = 0; i < 4; ++i) samples.push_back(testing::make_sample("u" + std::to_string(i), {0, 1}, 3, i));
  samples[0].gop[0][0] = std::numeric_limits<double>::quiet_NaN();
  ModelConfig cfg = testing::tiny_config();
  HipamaModel model(cfg);
  RunConfig run;
  run.model = cfg;
  run.epochs = 1;
  run.batch_size = 2;
  try {
    train_model(model, samples, {}, run);
    FAIL() << "expected NonFiniteLoss";
  } catch (const NonFiniteLoss& e) {
    EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos) << e.what();
  }
}

TEST(TrainTest, BestCheckpointFollowsValidationLoss) {
  std::vector<UtteranceSample> train, valid;
  for (int i = 0; i < 6; ++i) train.push_back(testing::make_sample("t" + std::to_string(i), {0, 1, 1}, 3, i));
  for (int i = 0; i < 3; ++i) valid.push_back(testing::make_sample("v" + std::to_string(i), {0, 0, 1}, 3, 50 + i));
  ModelConfig cfg = testing::tiny_config();
  HipamaModel model(cfg);
  RunConfig run;
  run.model = cfg;
  run.epochs = 6;
  run.batch_size = 3;
  const TrainResult r = train_model(model, train, valid, run);
  ASSERT_EQ(r.epochs.size(), 6u);
  std::size_t best = 1;
  for (const auto& e : r.epochs) {
    ASSERT_TRUE(e.valid_total.has_value());
    if (*e.valid_total < *r.epochs[best - 1].valid_total) best = e.epoch;
  }
  EXPECT_EQ(r.best_epoch, best);
  LoadedCheckpoint ckpt = deserialize_checkpoint(r.best_checkpoint);
  EXPECT_NEAR(mean_loss(ckpt.model, valid, 3).total, *r.epochs[best - 1].valid_total, 1e-12);
}

}  // namespace
}  // namespace hipama
