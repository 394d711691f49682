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

// Small hand-built utterances for unit tests.

#pragma once

#include <string>
#include <vector>

#include "hipama/data.hpp"
#include "hipama/random.hpp"

namespace hipama::testing {

/// Utterance with one phoneme per `word_index` entry and random GOP rows,
/// phone ids and labels drawn from `seed`.
inline UtteranceSample make_sample(const std::string& id, const std::vector<int>& word_index,
                                   std::size_t n_phones, std::uint64_t seed) {
  Rng rng(seed);
  UtteranceSample s;
  s.utt_id = id;
  s.word_index = word_index;
  for (std::size_t t = 0; t < word_index.size(); ++t) {
    s.phone_ids.push_back(static_cast<int>(rng.index(n_phones)));
    std::vector<double> row(2 * n_phones);
    for (double& v : row) v = rng.uniform(-1.0, 1.0);
    s.gop.push_back(std::move(row));
    s.phoneme_accuracy.push_back(rng.uniform(0.0, 2.0));
  }
  const auto n_words = static_cast<std::size_t>(word_index.back()) + 1;
  for (std::size_t w = 0; w < n_words; ++w) {
    s.words.push_back({rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)});
  }
  s.utterance = {rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0),
                 rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)};
  return s;
}

inline ModelConfig tiny_config(std::size_t n_phones = 3, std::size_t width = 4,
                               std::size_t heads = 2) {
  ModelConfig c;
  c.n_phones = n_phones;
  c.gop_dim = 2 * n_phones;
  c.width = width;
  c.heads = heads;
  return c;
}

inline Batch batch_of(const std::vector<UtteranceSample>& samples, std::size_t pad_to = 0) {
  std::vector<const UtteranceSample*> members;
  for (const auto& s : samples) members.push_back(&s);
  return build_batch(members, pad_to);
}

}  // namespace hipama::testing
