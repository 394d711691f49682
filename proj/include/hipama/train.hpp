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

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hipama/checkpoint.hpp"
#include "hipama/config.hpp"
#include "hipama/data.hpp"
#include "hipama/metrics.hpp"
#include "hipama/model.hpp"
#include "hipama/optim.hpp"

namespace hipama {

struct RunConfig {
  ModelConfig model;
  std::size_t epochs = 100;
  std::size_t batch_size = 25;
  double learning_rate = 1e-3;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string train_path;
  std::string valid_path;
  std::string test_path;
  std::string out_dir;

  void validate() const {
    model.validate();
    if (epochs == 0) throw ValidationError("config: epochs must be >= 1");
    if (batch_size == 0) throw ValidationError("config: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ValidationError("config: learning rate must be positive");
    if (seeds.empty()) throw ValidationError("config: at least one seed is required");
  }

  bool operator==(const RunConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"model", c.model},          {"epochs", c.epochs},
                     {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
                     {"seeds", c.seeds},           {"train_path", c.train_path},
                     {"valid_path", c.valid_path}, {"test_path", c.test_path},
                     {"out_dir", c.out_dir}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  read("model", c.model);
  read("epochs", c.epochs);
  read("batch_size", c.batch_size);
  read("learning_rate", c.learning_rate);
  read("seeds", c.seeds);
  read("train_path", c.train_path);
  read("valid_path", c.valid_path);
  read("test_path", c.test_path);
  read("out_dir", c.out_dir);
}

/// Raised when a batch produces a NaN or infinite loss.
class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochLog {
  std::size_t epoch = 0;
  double total = 0.0;
  double phoneme = 0.0;
  std::vector<double> word;
  std::vector<double> utt;
  std::optional<double> valid_total;
};

inline std::string format_epoch_log(const EpochLog& e, const ModelConfig& cfg) {
  std::string out = "epoch " + std::to_string(e.epoch) + " L_total=" + detail::exact(e.total) +
                    " L_phoneme.accuracy=" + detail::exact(e.phoneme);
  for (std::size_t i = 0; i < e.word.size(); ++i) {
    out += " L_word." + cfg.aspects_word[i] + "=" + detail::exact(e.word[i]);
  }
  for (std::size_t i = 0; i < e.utt.size(); ++i) {
    out += " L_utt." + cfg.aspects_utt[i] + "=" + detail::exact(e.utt[i]);
  }
  if (e.valid_total) out += " valid_L_total=" + detail::exact(*e.valid_total);
  return out;
}

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  std::string best_checkpoint;  // serialized bytes
};

/// Mean batch loss terms over `samples` in inference mode.
inline EpochLog mean_loss(HipamaModel& model, const std::vector<UtteranceSample>& samples,
                          std::size_t batch_size) {
  const bool was_training = model.training();
  model.set_training(false);
  NoGradGuard no_grad;
  EpochLog log;
  const auto& cfg = model.config();
  log.word.assign(cfg.aspects_word.size(), 0.0);
  log.utt.assign(cfg.aspects_utt.size(), 0.0);
  const auto batches = make_batches(samples, batch_size, std::nullopt, cfg.max_len);
  for (const Batch& b : batches) {
    const LossTerms t = hierarchical_loss(model.forward(b), b, cfg);
    log.total += t.total.item();
    log.phoneme += t.phoneme;
    for (std::size_t i = 0; i < t.word.size(); ++i) log.word[i] += t.word[i];
    for (std::size_t i = 0; i < t.utt.size(); ++i) log.utt[i] += t.utt[i];
  }
  const double n = static_cast<double>(batches.size());
  log.total /= n;
  log.phoneme /= n;
  for (double& v : log.word) v /= n;
  for (double& v : log.utt) v /= n;
  model.set_training(was_training);
  return log;
}

/**
 * Trains `model` with Adam on the summed hierarchical loss. Batches are
 * reshuffled every epoch from a seed derived from the model seed. The best
 * checkpoint minimizes validation loss when `valid` is non-empty and the
 * epoch-mean training loss otherwise.
 */
inline TrainResult train_model(HipamaModel& model, const std::vector<UtteranceSample>& train,
                               const std::vector<UtteranceSample>& valid,
                               const RunConfig& run,
                               const std::function<void(const EpochLog&)>& on_epoch = {}) {
  if (train.empty()) throw ValidationError("train: training set is empty");
  const ModelConfig& cfg = model.config();
  AdamState adam(model.parameters(), {run.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                                      cfg.adam_epsilon});
  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  const nlohmann::json provenance = run;
  for (std::size_t epoch = 1; epoch <= run.epochs; ++epoch) {
    model.set_training(true);
    const auto batches =
        make_batches(train, run.batch_size, derive_seed(cfg.seed, 1000 + epoch), cfg.max_len);
    EpochLog log;
    log.epoch = epoch;
    log.word.assign(cfg.aspects_word.size(), 0.0);
    log.utt.assign(cfg.aspects_utt.size(), 0.0);
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& batch = batches[bi];
      const LossTerms terms = hierarchical_loss(model.forward(batch), batch, cfg);
      const double value = terms.total.item();
      if (!std::isfinite(value)) {
        throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(bi) + " (first utterance " + batch.utt_ids.front() +
                            ")");
      }
      model.parameters().zero_grad();
      terms.total.backward();
      adam.step(model.parameters());
      log.total += value;
      log.phoneme += terms.phoneme;
      for (std::size_t i = 0; i < terms.word.size(); ++i) log.word[i] += terms.word[i];
      for (std::size_t i = 0; i < terms.utt.size(); ++i) log.utt[i] += terms.utt[i];
    }
    const double n = static_cast<double>(batches.size());
    log.total /= n;
    log.phoneme /= n;
    for (double& v : log.word) v /= n;
    for (double& v : log.utt) v /= n;
    if (!valid.empty()) log.valid_total = mean_loss(model, valid, run.batch_size).total;
    const double criterion = log.valid_total.value_or(log.total);
    if (criterion < best) {
      best = criterion;
      result.best_epoch = epoch;
      result.best_checkpoint = serialize_checkpoint(model, provenance);
    }
    if (on_epoch) on_epoch(log);
    result.epochs.push_back(std::move(log));
  }
  model.set_training(false);
  return result;
}

}  // namespace hipama
