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
 * @file synthetic.hpp
 * @brief Synthetic utterances with known ground truth.
 *
 * Every phoneme carries a latent quality q in [0,2]. Its GOP row is a fixed
 * linear encoding of q and the phone identity plus isotropic gaussian noise,
 * and every label is a fixed function of the q values:
 *
 *   phoneme accuracy   = q
 *   word accuracy      = 5 * mean(q over the word)
 *   word stress        = 10 * exp(-var(q over the word) / stress_scale)
 *   word total         = 0.7 * accuracy + 0.3 * stress
 *   utt accuracy, fluency, prosody = fixed convex mixtures of the mean word
 *                        accuracy, stress and total
 *   utt completeness   = 10 * fraction of words with accuracy >= 5
 *   utt total          = mean of the four utterance aspects above
 *
 * Each utterance draws a speaker level and a within-word spread; word means
 * scatter around the speaker level and phonemes around their word mean.
 * Word-initial phonemes come from a reserved subset of phone ids.
 *
 * All coefficients are drawn from the seed and reported alongside the data.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hipama/data.hpp"
#include "hipama/random.hpp"

namespace hipama {

struct SyntheticOptions {
  std::size_t n_phones = 42;
  std::size_t min_words = 3;
  std::size_t max_words = 8;
  std::size_t min_word_len = 1;
  std::size_t max_word_len = 6;
  // Word-initial phones are drawn from ids [0, onset_phones) and the rest
  // from [onset_phones, n_phones), so word boundaries are visible in the
  // phone sequence.
  std::size_t onset_phones = 14;
  // Speaker quality ~ U(speaker_low, speaker_high); word means scatter
  // around it with sd word_jitter; phonemes scatter around the word mean with
  // an utterance-level sd drawn from U(0, max_spread).
  double speaker_low = 0.7;
  double speaker_high = 1.3;
  double word_jitter = 0.6;
  double max_spread = 0.5;
};

inline void to_json(nlohmann::json& j, const SyntheticOptions& o) {
  j = nlohmann::json{{"n_phones", o.n_phones},       {"min_words", o.min_words},
                     {"max_words", o.max_words},     {"min_word_len", o.min_word_len},
                     {"max_word_len", o.max_word_len}, {"onset_phones", o.onset_phones},
                     {"speaker_low", o.speaker_low}, {"speaker_high", o.speaker_high},
                     {"word_jitter", o.word_jitter}, {"max_spread", o.max_spread}};
}

struct SyntheticCoefficients {
  std::vector<double> quality_direction;         // [gop_dim]
  std::vector<std::vector<double>> phone_offset;  // [n_phones][gop_dim]
  double stress_scale = 0.0;
  // Rows: utterance accuracy, fluency, prosody. Columns: mean word
  // accuracy, stress, total. Each row sums to 1.
  std::array<std::array<double, 3>, 3> utterance_mix{};
};

inline void to_json(nlohmann::json& j, const SyntheticCoefficients& c) {
  j = nlohmann::json{{"quality_direction", c.quality_direction},
                     {"phone_offset", c.phone_offset},
                     {"stress_scale", c.stress_scale},
                     {"utterance_mix", c.utterance_mix}};
}

struct SyntheticDataset {
  std::vector<UtteranceSample> samples;
  SyntheticCoefficients coefficients;
};

namespace detail {

inline SyntheticCoefficients draw_coefficients(std::uint64_t seed, std::size_t n_phones) {
  Rng rng(derive_seed(seed, 10));
  const std::size_t gop_dim = 2 * n_phones;
  SyntheticCoefficients c;
  const double dir_scale = 3.0 / std::sqrt(static_cast<double>(gop_dim));
  c.quality_direction.resize(gop_dim);
  for (double& v : c.quality_direction) v = dir_scale * rng.normal();
  c.phone_offset.assign(n_phones, std::vector<double>(gop_dim));
  for (auto& row : c.phone_offset) {
    for (double& v : row) v = 0.5 * rng.normal();
  }
  c.stress_scale = rng.uniform(0.08, 0.12);
  for (auto& row : c.utterance_mix) {
    double total = 0.0;
    for (double& w : row) {
      w = rng.uniform(0.1, 1.0);
      total += w;
    }
    for (double& w : row) w /= total;
  }
  return c;
}

inline double clamp_unit2(double q) { return std::clamp(q, 0.0, 2.0); }

}  // namespace detail

/// Recomputes word and utterance labels from per-phoneme qualities.
inline void apply_synthetic_labels(UtteranceSample& s, const SyntheticCoefficients& c) {
  const std::size_t n_words = static_cast<std::size_t>(s.word_index.back()) + 1;
  std::vector<double> sum(n_words, 0.0), count(n_words, 0.0);
  for (std::size_t t = 0; t < s.length(); ++t) {
    const auto w = static_cast<std::size_t>(s.word_index[t]);
    sum[w] += s.phoneme_accuracy[t];
    count[w] += 1.0;
  }
  std::vector<double> var(n_words, 0.0);
  for (std::size_t t = 0; t < s.length(); ++t) {
    const auto w = static_cast<std::size_t>(s.word_index[t]);
    const double d = s.phoneme_accuracy[t] - sum[w] / count[w];
    var[w] += d * d / count[w];
  }
  s.words.assign(n_words, {});
  double mean_acc = 0.0, mean_stress = 0.0, mean_total = 0.0, complete = 0.0;
  for (std::size_t w = 0; w < n_words; ++w) {
    WordLabels& l = s.words[w];
    l.accuracy = std::clamp(5.0 * (sum[w] / count[w]), 0.0, 10.0);
    l.stress = 10.0 * std::exp(-var[w] / c.stress_scale);
    l.total = 0.7 * l.accuracy + 0.3 * l.stress;
    mean_acc += l.accuracy;
    mean_stress += l.stress;
    mean_total += l.total;
    if (l.accuracy >= 5.0) complete += 1.0;
  }
  const double nw = static_cast<double>(n_words);
  const std::array<double, 3> word_means{mean_acc / nw, mean_stress / nw, mean_total / nw};
  auto mix = [&](std::size_t row) {
    double v = 0.0;
    for (std::size_t k = 0; k < 3; ++k) v += c.utterance_mix[row][k] * word_means[k];
    return std::clamp(v, 0.0, 10.0);
  };
  UtteranceLabels& u = s.utterance;
  u.accuracy = mix(0);
  u.fluency = mix(1);
  u.prosody = mix(2);
  u.completeness = 10.0 * complete / nw;
  u.total = (u.accuracy + u.completeness + u.fluency + u.prosody) / 4.0;
}

inline SyntheticDataset generate_synthetic(std::size_t n_utts, std::uint64_t seed,
                                           double noise, const SyntheticOptions& options = {}) {
  if (n_utts == 0) throw std::invalid_argument("generate_synthetic: n_utts must be >= 1");
  if (!(noise >= 0.0)) throw std::invalid_argument("generate_synthetic: noise must be >= 0");
  if (options.onset_phones == 0 || options.onset_phones >= options.n_phones) {
    throw std::invalid_argument("generate_synthetic: onset_phones must be in [1, n_phones)");
  }
  SyntheticDataset out;
  out.coefficients = detail::draw_coefficients(seed, options.n_phones);
  const auto& c = out.coefficients;
  const std::size_t gop_dim = 2 * options.n_phones;
  const std::size_t onset = options.onset_phones;
  Rng rng(derive_seed(seed, 11));
  auto draw_count = [&](std::size_t lo, std::size_t hi) { return lo + rng.index(hi - lo + 1); };

  for (std::size_t u = 0; u < n_utts; ++u) {
    UtteranceSample s;
    s.utt_id = "syn" + std::to_string(seed) + "_" + std::to_string(u);
    const double speaker = rng.uniform(options.speaker_low, options.speaker_high);
    const double spread = rng.uniform(0.0, options.max_spread);
    const std::size_t n_words = draw_count(options.min_words, options.max_words);
    for (std::size_t w = 0; w < n_words; ++w) {
      const double word_mean = detail::clamp_unit2(speaker + options.word_jitter * rng.normal());
      const std::size_t len = draw_count(options.min_word_len, options.max_word_len);
      for (std::size_t k = 0; k < len; ++k) {
        const double q = detail::clamp_unit2(word_mean + spread * rng.normal());
        const int phone = static_cast<int>(
            k == 0 ? rng.index(onset)
                   : onset + rng.index(options.n_phones - onset));
        std::vector<double> row(gop_dim);
        for (std::size_t j = 0; j < gop_dim; ++j) {
          row[j] = q * c.quality_direction[j] + c.phone_offset[phone][j] +
                   noise * rng.normal();
        }
        s.phone_ids.push_back(phone);
        s.gop.push_back(std::move(row));
        s.word_index.push_back(static_cast<int>(w));
        s.phoneme_accuracy.push_back(q);
      }
    }
    apply_synthetic_labels(s, c);
    out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace hipama
