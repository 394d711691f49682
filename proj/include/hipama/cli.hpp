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

/**
 * @file cli.hpp
 * @brief The `hipama` command line: gen-synthetic, train, eval,
 * inspect-attention.
 *
 * Exit codes: 0 success, 2 usage or validation error, 1 runtime failure.
 */

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hipama/checkpoint.hpp"
#include "hipama/config.hpp"
#include "hipama/data.hpp"
#include "hipama/inspect.hpp"
#include "hipama/metrics.hpp"
#include "hipama/synthetic.hpp"
#include "hipama/train.hpp"

namespace hipama::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitValidation = 2;

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

inline void check_gop_width(const std::vector<UtteranceSample>& data, const ModelConfig& cfg,
                            const std::string& what) {
  if (!data.empty() && data.front().gop_dim() != cfg.gop_dim) {
    throw ValidationError(what + " has " + std::to_string(data.front().gop_dim() / 2) +
                          " phones (GOP width " + std::to_string(data.front().gop_dim()) +
                          "), model expects " + std::to_string(cfg.n_phones));
  }
}

}  // namespace detail

struct GenOptions {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double noise = 0.1;
  std::size_t n_phones = 42;
  std::string out;
};

inline int cmd_gen_synthetic(const GenOptions& opt, std::ostream& log) {
  if (opt.n == 0) throw ValidationError("gen-synthetic: -n must be at least 1");
  if (opt.noise < 0.0) throw ValidationError("gen-synthetic: --noise must be >= 0");
  if (opt.out.empty()) throw ValidationError("gen-synthetic: --out is required");
  if (opt.n_phones < 2) throw ValidationError("gen-synthetic: --n-phones must be at least 2");
  SyntheticOptions so;
  so.n_phones = opt.n_phones;
  so.onset_phones = std::max<std::size_t>(1, opt.n_phones / 3);
  const SyntheticDataset data = generate_synthetic(opt.n, opt.seed, opt.noise, so);
  write_dataset(opt.out, data.samples);
  const nlohmann::json coefficients = {{"n", opt.n},
                                       {"seed", opt.seed},
                                       {"noise", opt.noise},
                                       {"options", so},
                                       {"coefficients", data.coefficients}};
  detail::write_text(opt.out + ".coefficients.json", coefficients.dump(1) + "\n");
  log << "wrote " << data.samples.size() << " utterances to " << opt.out << "\n"
      << "generator coefficients: " << opt.out << ".coefficients.json (stress_scale="
      << data.coefficients.stress_scale << ")\n";
  return kExitOk;
}

inline int cmd_train(const RunConfig& run, std::ostream& log) {
  run.validate();
  if (run.train_path.empty()) throw ValidationError("train: --train is required");
  if (run.out_dir.empty()) throw ValidationError("train: --out is required");
  const auto train = load_dataset(run.train_path);
  if (train.empty()) throw ValidationError("train: training set is empty");
  detail::check_gop_width(train, run.model, "training set");
  std::vector<UtteranceSample> valid, test;
  if (!run.valid_path.empty()) {
    valid = load_dataset(run.valid_path);
    detail::check_gop_width(valid, run.model, "validation set");
  }
  if (!run.test_path.empty()) {
    test = load_dataset(run.test_path);
    detail::check_gop_width(test, run.model, "test set");
  }
  namespace fs = std::filesystem;
  fs::create_directories(run.out_dir);
  const nlohmann::json resolved = run;
  detail::write_text((fs::path(run.out_dir) / "config.json").string(), resolved.dump(1) + "\n");

  std::vector<EvalReport> reports;
  for (std::uint64_t seed : run.seeds) {
    ModelConfig cfg = run.model;
    cfg.seed = seed;
    HipamaModel model(cfg);
    const fs::path dir = fs::path(run.out_dir) / ("seed-" + std::to_string(seed));
    fs::create_directories(dir);
    std::ofstream train_log(dir / "train.log", std::ios::binary | std::ios::trunc);
    auto emit = [&](const std::string& line) {
      train_log << line << "\n";
      log << "[seed " << seed << "] " << line << "\n";
    };
    emit("config " + resolved.dump());
    emit("parameters " + std::to_string(model.parameter_count()));
    RunConfig seeded = run;
    seeded.model = cfg;
    EpochLog untrained = mean_loss(model, train, run.batch_size);
    if (!valid.empty()) untrained.valid_total = mean_loss(model, valid, run.batch_size).total;
    emit(format_epoch_log(untrained, cfg));
    const TrainResult result = train_model(model, train, valid, seeded, [&](const EpochLog& e) {
      emit(format_epoch_log(e, cfg));
    });
    emit("best_epoch " + std::to_string(result.best_epoch));
    detail::write_text((dir / "final.ckpt").string(),
                       serialize_checkpoint(model, nlohmann::json(seeded)));
    detail::write_text((dir / "best.ckpt").string(), result.best_checkpoint);
    if (!test.empty()) {
      reports.push_back(evaluate(model, test, run.batch_size));
      detail::write_text((dir / "eval.txt").string(),
                         format_report(reports.back(), nlohmann::json(seeded).dump()));
    }
  }
  if (!reports.empty()) {
    const std::string summary = "# config " + resolved.dump() + "\n" + format_summary(reports);
    detail::write_text((fs::path(run.out_dir) / "summary.txt").string(), summary);
    log << summary;
  }
  return kExitOk;
}

struct EvalOptions {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::size_t batch_size = 25;
};

inline std::string eval_report_text(const EvalOptions& opt) {
  LoadedCheckpoint ckpt = load_checkpoint(opt.checkpoint);
  const auto data = load_dataset(opt.data);
  if (data.empty()) throw ValidationError("eval: dataset is empty");
  detail::check_gop_width(data, ckpt.model.config(), "dataset");
  const EvalReport report = evaluate(ckpt.model, data, opt.batch_size);
  return format_report(report, nlohmann::json(ckpt.model.config()).dump());
}

inline int cmd_eval(const EvalOptions& opt, std::ostream& out) {
  const std::string text = eval_report_text(opt);
  if (opt.out.empty()) {
    out << text;
  } else {
    detail::write_text(opt.out, text);
  }
  return kExitOk;
}

inline int cmd_inspect_attention(const EvalOptions& opt, std::ostream& out) {
  LoadedCheckpoint ckpt = load_checkpoint(opt.checkpoint);
  const auto data = load_dataset(opt.data);
  detail::check_gop_width(data, ckpt.model.config(), "dataset");
  const std::string text =
      "# config " + nlohmann::json(ckpt.model.config()).dump() + "\n" +
      format_attention_tables(inspect_attention(ckpt.model, data, opt.batch_size));
  if (opt.out.empty()) {
    out << text;
  } else {
    detail::write_text(opt.out, text);
  }
  return kExitOk;
}

/// Parses `args` (argv[0] first) and runs the selected command.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Hierarchical multi-aspect pronunciation scoring"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write a synthetic dataset");
  gen_cmd->add_option("-n,--n", gen.n, "Number of utterances")->required();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--noise", gen.noise, "Gaussian noise scale on GOP rows");
  gen_cmd->add_option("--n-phones", gen.n_phones, "Phone inventory size");
  gen_cmd->add_option("--out", gen.out, "Output dataset path")->required();

  std::string config_path;
  RunConfig flags;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  bool no_hierarchy = false;
  bool no_multi_aspect = false;
  auto* train_cmd = app.add_subcommand("train", "Train one model per seed");
  train_cmd->add_option("--config", config_path, "JSON run config (flags take precedence)");
  train_cmd->add_option("--train", flags.train_path, "Training dataset");
  train_cmd->add_option("--valid", flags.valid_path, "Validation dataset for best checkpoint");
  train_cmd->add_option("--test", flags.test_path, "Test dataset evaluated after training");
  auto* seed_opt = train_cmd->add_option("--seed", seed, "Single seed");
  auto* seeds_opt = train_cmd->add_option("--seeds", seeds, "Comma-separated seeds")
                        ->delimiter(',');
  seed_opt->excludes(seeds_opt);
  auto* epochs_opt = train_cmd->add_option("--epochs", flags.epochs, "Training epochs");
  auto* lr_opt = train_cmd->add_option("--lr", flags.learning_rate, "Adam learning rate");
  auto* bs_opt = train_cmd->add_option("--batch-size", flags.batch_size, "Batch size");
  auto* len_opt = train_cmd->add_option("--max-len", flags.model.max_len, "Maximum phonemes");
  train_cmd->add_flag("--no-hierarchy", no_hierarchy, "Utterance modules read phoneme states");
  train_cmd->add_flag("--no-multi-aspect", no_multi_aspect, "Disable cross-aspect attention");
  train_cmd->add_option("--out", flags.out_dir, "Output directory");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval.checkpoint)->required();
  eval_cmd->add_option("--data", eval.data)->required();
  eval_cmd->add_option("--out", eval.out, "Report path (stdout when omitted)");
  eval_cmd->add_option("--batch-size", eval.batch_size);

  EvalOptions inspect;
  auto* inspect_cmd =
      app.add_subcommand("inspect-attention", "Mean cross-aspect attention weights");
  inspect_cmd->add_option("--checkpoint", inspect.checkpoint)->required();
  inspect_cmd->add_option("--data", inspect.data)->required();
  inspect_cmd->add_option("--out", inspect.out, "Table path (stdout when omitted)");
  inspect_cmd->add_option("--batch-size", inspect.batch_size);

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*gen_cmd) return cmd_gen_synthetic(gen, out);
    if (*train_cmd) {
      RunConfig run;
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ValidationError("cannot open config " + config_path);
        try {
          run = nlohmann::json::parse(in).get<RunConfig>();
        } catch (const nlohmann::json::exception& e) {
          throw ValidationError("config " + config_path + ": " + e.what());
        }
      }
      if (!flags.train_path.empty()) run.train_path = flags.train_path;
      if (!flags.valid_path.empty()) run.valid_path = flags.valid_path;
      if (!flags.test_path.empty()) run.test_path = flags.test_path;
      if (!flags.out_dir.empty()) run.out_dir = flags.out_dir;
      if (seed_opt->count()) run.seeds = {seed};
      if (seeds_opt->count()) run.seeds = seeds;
      if (epochs_opt->count()) run.epochs = flags.epochs;
      if (lr_opt->count()) run.learning_rate = flags.learning_rate;
      if (bs_opt->count()) run.batch_size = flags.batch_size;
      if (len_opt->count()) run.model.max_len = flags.model.max_len;
      if (no_hierarchy) run.model.hierarchical = false;
      if (no_multi_aspect) run.model.multi_aspect_attention = false;
      return cmd_train(run, out);
    }
    if (*eval_cmd) return cmd_eval(eval, out);
    if (*inspect_cmd) return cmd_inspect_attention(inspect, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace hipama::cli
