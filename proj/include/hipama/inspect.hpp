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

#include <string>
#include <vector>

#include "hipama/data.hpp"
#include "hipama/metrics.hpp"
#include "hipama/model.hpp"

namespace hipama {

/// Mean cross-aspect weights; row n lists the weights target n gives to the
/// other aspects, in aspect order with n skipped.
struct AttentionTable {
  std::string level;
  std::vector<std::string> aspects;
  std::vector<std::vector<double>> weights;  // N x (N-1)
  std::size_t units = 0;
};

struct AttentionTables {
  AttentionTable word;
  AttentionTable utterance;
};

inline AttentionTables inspect_attention(HipamaModel& model,
                                         const std::vector<UtteranceSample>& samples,
                                         std::size_t batch_size = 25) {
  const auto& cfg = model.config();
  if (!cfg.multi_aspect_attention) {
    throw ValidationError("inspect-attention: checkpoint was trained without multi-aspect attention");
  }
  if (cfg.aspects_word.size() < 2 || cfg.aspects_utt.size() < 2) {
    throw ValidationError("inspect-attention: need at least two aspects per level");
  }
  if (samples.empty()) throw ValidationError("inspect-attention: empty dataset");
  const bool was_training = model.training();
  model.set_training(false);
  NoGradGuard no_grad;
  AttentionTables out;
  out.word.level = "word";
  out.word.aspects = cfg.aspects_word;
  out.utterance.level = "utterance";
  out.utterance.aspects = cfg.aspects_utt;
  const std::size_t nw = cfg.aspects_word.size();
  const std::size_t nu = cfg.aspects_utt.size();
  out.word.weights.assign(nw, std::vector<double>(nw - 1, 0.0));
  out.utterance.weights.assign(nu, std::vector<double>(nu - 1, 0.0));
  for (const Batch& batch : make_batches(samples, batch_size, std::nullopt, cfg.max_len)) {
    const PredictionSet pred = model.forward(batch);
    const auto ww = pred.ma_weights_word.data();  // [B,T,Nw,Nw-1]
    const auto uw = pred.ma_weights_utt.data();   // [B,Nu,Nu-1]
    const std::size_t T = batch.max_len;
    for (std::size_t b = 0; b < batch.size; ++b) {
      for (std::size_t t = 0; t < batch.lengths[b]; ++t) {
        const std::size_t base = (b * T + t) * nw * (nw - 1);
        for (std::size_t n = 0; n < nw; ++n) {
          for (std::size_t i = 0; i + 1 < nw; ++i) {
            out.word.weights[n][i] += ww[base + n * (nw - 1) + i];
          }
        }
        ++out.word.units;
      }
      const std::size_t base = b * nu * (nu - 1);
      for (std::size_t n = 0; n < nu; ++n) {
        for (std::size_t i = 0; i + 1 < nu; ++i) {
          out.utterance.weights[n][i] += uw[base + n * (nu - 1) + i];
        }
      }
      ++out.utterance.units;
    }
  }
  for (auto* table : {&out.word, &out.utterance}) {
    for (auto& row : table->weights) {
      for (double& v : row) v /= static_cast<double>(table->units);
    }
  }
  model.set_training(was_training);
  return out;
}

/**
 * Comma-separated blocks, one per level:
 *
 *   # level word units=<count>
 *   target,source,weight
 *   accuracy,stress,0.61
 *   ...
 *
 * followed by the same data as an N x (N-1) matrix (`matrix,<target>,w...`).
 */
inline std::string format_attention_tables(const AttentionTables& tables) {
  std::string out;
  for (const AttentionTable* t : {&tables.word, &tables.utterance}) {
    out += "# level " + t->level + " units=" + std::to_string(t->units) + "\n";
    out += "target,source,weight\n";
    for (std::size_t n = 0; n < t->aspects.size(); ++n) {
      std::size_t slot = 0;
      for (std::size_t j = 0; j < t->aspects.size(); ++j) {
        if (j == n) continue;
        out += t->aspects[n] + "," + t->aspects[j] + "," + detail::exact(t->weights[n][slot++]) +
               "\n";
      }
    }
    for (std::size_t n = 0; n < t->aspects.size(); ++n) {
      out += "matrix," + t->aspects[n];
      for (double v : t->weights[n]) out += "," + detail::exact(v);
      out += "\n";
    }
  }
  return out;
}

}  // namespace hipama
