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
 * @file model.hpp
 * @brief Hierarchical multi-aspect pronunciation scorer.
 *
 * Phoneme level: GOP projection + phone embedding -> LSTM -> self-attention
 * -> convolution -> per-position accuracy head.
 *
 * Word level: one dense+relu module per aspect over every phoneme position,
 * coupled by multi-aspect attention; per-position scores are averaged over
 * the positions aligned to each word.
 *
 * Utterance level: word aspect representations are averaged across aspects,
 * passed through self-attention and mean-pooled over time, then fed to one
 * module per utterance aspect, again coupled by multi-aspect attention.
 *
 * With `hierarchical = false` the utterance modules read the time-mean of
 * the phoneme representation directly.
 */

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hipama/config.hpp"
#include "hipama/data.hpp"
#include "hipama/layers.hpp"
#include "hipama/optim.hpp"
#include "hipama/random.hpp"
#include "hipama/tensor.hpp"

namespace hipama {

struct MultiAspectResult {
  std::vector<Tensor> r;       // a^n + m^n, [..., d]
  std::vector<Tensor> m;       // attention vectors, [..., d]
  std::vector<Tensor> stacks;  // non-target stacks S^n, [..., N-1, d]
  std::vector<Tensor> pooled;  // A' for each target, [..., N-1, d]
  Tensor weights;              // [..., N, N-1]
};

/**
 * Cross-aspect attention at one granularity. For target n, the other
 * aspects' vectors are stacked in aspect order, rescaled by that target's
 * attention pooling into A', and the target attends over the rows of A' with
 * scaled dot-product scores. The attended vector is added residually.
 */
class MultiAspectAttention {
 public:
  MultiAspectAttention() = default;
  MultiAspectAttention(ParameterStore& store, const std::string& prefix,
                       const std::vector<std::string>& aspects, std::size_t dim, Rng& rng)
      : dim_(dim) {
    if (aspects.size() < 2) return;
    for (const auto& name : aspects) {
      pools_.emplace_back(store, prefix + "." + name + ".pool", dim, rng);
    }
  }

  std::size_t aspects() const { return pools_.size(); }

  MultiAspectResult operator()(const std::vector<Tensor>& a) const {
    if (a.empty()) throw std::invalid_argument("multi_aspect_attention: no aspects");
    MultiAspectResult out;
    const std::size_t n_aspects = a.size();
    if (n_aspects == 1) {
      out.r = a;
      return out;
    }
    if (n_aspects != pools_.size()) {
      throw std::invalid_argument("multi_aspect_attention: expected " +
                                  std::to_string(pools_.size()) + " aspects, got " +
                                  std::to_string(n_aspects));
    }
    const Shape lead(a[0].shape().begin(), a[0].shape().end() - 1);
    auto with_tail = [&](std::initializer_list<std::size_t> tail) {
      Shape s = lead;
      s.insert(s.end(), tail);
      return s;
    };
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim_));
    std::vector<Tensor> weight_rows;
    for (std::size_t n = 0; n < n_aspects; ++n) {
      if (a[n].shape() != a[0].shape()) throw_shape("multi_aspect_attention", a[0].shape(), a[n].shape());
      std::vector<Tensor> others;
      for (std::size_t j = 0; j < n_aspects; ++j) {
        if (j != n) others.push_back(reshape(a[j], with_tail({1, dim_})));
      }
      const Tensor stack = concat(others, -2);
      const PooledRows pooled = pools_[n](stack);
      const Tensor target = reshape(a[n], with_tail({1, dim_}));
      const Tensor scores = scale(sum(mul(pooled.rows, target), -1), inv_sqrt_d);
      const Tensor v = softmax(scores, -1);
      const Tensor m = sum(mul(pooled.rows, reshape(v, with_tail({n_aspects - 1, 1}))), -2);
      out.r.push_back(add(a[n], m));
      out.m.push_back(m);
      out.stacks.push_back(stack);
      out.pooled.push_back(pooled.rows);
      weight_rows.push_back(reshape(v, with_tail({1, n_aspects - 1})));
    }
    out.weights = concat(weight_rows, -2);
    return out;
  }

  const AttentionPooling& pool(std::size_t n) const { return pools_.at(n); }

 private:
  std::size_t dim_ = 0;
  std::vector<AttentionPooling> pools_;
};

/// Aspect vectors of one level, before (a) and after (r) cross-aspect attention.
struct AspectLevel {
  std::vector<Tensor> a;
  std::vector<Tensor> m;  // empty when multi-aspect attention is off
  std::vector<Tensor> r;
  Tensor weights;         // undefined when multi-aspect attention is off
};

struct PredictionSet {
  Tensor phoneme_scores;            // [B,T], 0 at padding
  std::vector<Tensor> word_scores;  // per config word aspect, [B,W], 0 at padding
  std::vector<Tensor> word_position_scores;  // per config word aspect, [B,T,1]
  std::vector<Tensor> utt_scores;   // per config utterance aspect, [B]
  Tensor ma_weights_word;           // [B,T,Nw,Nw-1]
  Tensor ma_weights_utt;            // [B,Nu,Nu-1]
  Tensor phone_repr;                // h, [B,T,d]
  Tensor utt_repr;                  // pooled utterance vector z, [B,d]
  AspectLevel word;
  AspectLevel utt;
};

struct PhonemeOutput {
  Tensor h;       // [B,T,d]
  Tensor scores;  // [B,T]
};

class HipamaModel {
 public:
  explicit HipamaModel(ModelConfig config)
      : config_(std::move(config)),
        dropout_rng_(derive_seed(config_.seed, 1)) {
    config_.validate();
    Rng rng(derive_seed(config_.seed, 0));
    const std::size_t d = config_.width;
    gop_proj_ = Dense(params_, "input.gop_proj", config_.gop_dim, d, rng);
    phone_embed_ = Embedding(params_, "input.phone_embed", config_.n_phones, d, rng);
    lstm_ = Lstm(params_, "phone.lstm", d, d, rng);
    phone_attn_ = MultiHeadSelfAttention(params_, "phone.mhsa", d, config_.heads, rng);
    conv_ = Conv1dSame(params_, "phone.conv", d, d, config_.kernel_size, rng);
    phone_head_ = Dense(params_, "phone.head", d, 1, rng);
    for (const auto& name : config_.aspects_word) {
      word_dense_.emplace_back(params_, "word." + name + ".dense", d, d, rng, Activation::kRelu);
      word_head_.emplace_back(params_, "word." + name + ".head", d, 1, rng);
    }
    if (config_.multi_aspect_attention) {
      word_ma_ = MultiAspectAttention(params_, "word", config_.aspects_word, d, rng);
    }
    if (config_.hierarchical) {
      utt_attn_ = MultiHeadSelfAttention(params_, "utt.mhsa", d, config_.heads, rng);
    }
    for (const auto& name : config_.aspects_utt) {
      utt_dense_.emplace_back(params_, "utt." + name + ".dense", d, d, rng, Activation::kRelu);
      utt_head_.emplace_back(params_, "utt." + name + ".head", d, 1, rng);
    }
    if (config_.multi_aspect_attention) {
      utt_ma_ = MultiAspectAttention(params_, "utt", config_.aspects_utt, d, rng);
    }
  }

  HipamaModel(const HipamaModel&) = delete;
  HipamaModel& operator=(const HipamaModel&) = delete;
  HipamaModel(HipamaModel&&) = default;
  HipamaModel& operator=(HipamaModel&&) = default;

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.count(); }

  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }

  /// dense(gop) + embedding(phone id); the padding id embeds to zero.
  Tensor embed_inputs(const Tensor& gop, std::span<const int> phone_ids,
                      const Tensor& mask) const {
    if (gop.dim() != 3 || gop.shape()[2] != config_.gop_dim) {
      throw_shape("embed_inputs", gop.shape(), Shape{config_.gop_dim});
    }
    const Shape ids_shape{gop.shape()[0], gop.shape()[1]};
    if (mask.shape() != ids_shape) throw_shape("embed_inputs", gop.shape(), mask.shape());
    Tensor x = add(gop_proj_(gop), phone_embed_(phone_ids, ids_shape));
    if (config_.positional_encoding) {
      x = add(x, sinusoidal_positions(ids_shape[1], config_.width));
    }
    // The projection bias would otherwise leak into padded rows.
    return mul(x, feature_mask(mask));
  }

  PhonemeOutput phoneme_encoder(const Tensor& x, const Tensor& mask) const {
    const Tensor seq = lstm_(x, mask);
    const Tensor attended = phone_attn_(seq, mask);
    const Tensor h = conv_(attended, mask);
    const Shape bt{x.shape()[0], x.shape()[1]};
    return {h, mul(reshape(phone_head_(h), bt), mask)};
  }

  /// Cross-aspect attention applied position-wise over `a` ([..., d] each).
  MultiAspectResult multi_aspect_attention(const std::vector<Tensor>& a,
                                           bool word_level) const {
    const MultiAspectAttention& ma = word_level ? word_ma_ : utt_ma_;
    if (!config_.multi_aspect_attention || a.size() < 2) {
      MultiAspectResult passthrough;
      passthrough.r = a;
      return passthrough;
    }
    return ma(a);
  }

  /// Returns per-aspect word representations and fills word scores.
  AspectLevel word_level(const Tensor& h, const Tensor& alignment,
                         std::vector<Tensor>& word_scores,
                         std::vector<Tensor>* position_scores = nullptr) const {
    const std::size_t b = h.shape()[0];
    const std::size_t t = h.shape()[1];
    AspectLevel level;
    for (const auto& dense : word_dense_) level.a.push_back(dense(h));
    apply_multi_aspect(level, /*word_level=*/true);
    if (alignment.dim() != 3 || alignment.shape()[0] != b || alignment.shape()[2] != t) {
      throw_shape("word_level", alignment.shape(), h.shape());
    }
    const std::size_t w = alignment.shape()[1];
    word_scores.clear();
    if (position_scores != nullptr) position_scores->clear();
    for (std::size_t n = 0; n < level.r.size(); ++n) {
      const Tensor per_position = word_head_[n](level.r[n]);  // [B,T,1]
      if (position_scores != nullptr) position_scores->push_back(per_position);
      word_scores.push_back(reshape(matmul(alignment, per_position), {b, w}));
    }
    return level;
  }

  /// Pools a sequence [B,T,d] to [B,d] by its masked time-mean.
  static Tensor masked_time_mean(const Tensor& x, const Tensor& mask) {
    const std::size_t b = x.shape()[0];
    const std::size_t t = x.shape()[1];
    std::vector<double> inv(b, 0.0);
    const auto m = mask.data();
    for (std::size_t i = 0; i < b; ++i) {
      double len = 0.0;
      for (std::size_t j = 0; j < t; ++j) len += m[i * t + j];
      if (len == 0.0) throw std::invalid_argument("masked_time_mean: empty sequence");
      inv[i] = 1.0 / len;
    }
    return mul(sum(mul(x, feature_mask(mask)), 1), Tensor(Shape{b, 1}, std::move(inv)));
  }

  /// Utterance-level aspects from the pooled vector z [B,d].
  AspectLevel utterance_aspects(const Tensor& z, std::vector<Tensor>& utt_scores) const {
    AspectLevel level;
    for (const auto& dense : utt_dense_) level.a.push_back(dense(z));
    apply_multi_aspect(level, /*word_level=*/false);
    utt_scores.clear();
    for (std::size_t n = 0; n < level.r.size(); ++n) {
      utt_scores.push_back(reshape(utt_head_[n](level.r[n]), {z.shape()[0]}));
    }
    return level;
  }

  /// Hierarchical pooling: aspect mean -> self-attention -> dropout -> time mean.
  Tensor pool_word_representations(const std::vector<Tensor>& word_r, const Tensor& mask) {
    Tensor u = word_r[0];
    for (std::size_t n = 1; n < word_r.size(); ++n) u = add(u, word_r[n]);
    u = scale(u, 1.0 / static_cast<double>(word_r.size()));
    Tensor g = utt_attn_(u, mask);
    g = dropout(g, config_.dropout_utt, training_, dropout_rng_);
    return masked_time_mean(g, mask);
  }

  PredictionSet forward(const Batch& batch) {
    if (batch.n_phones != config_.n_phones) {
      throw ValidationError("batch has " + std::to_string(batch.n_phones) +
                            " phones, model expects " + std::to_string(config_.n_phones));
    }
    PredictionSet out;
    const Tensor x = embed_inputs(batch.gop, batch.phone_ids, batch.mask);
    PhonemeOutput phone = phoneme_encoder(x, batch.mask);
    out.phone_repr = phone.h;
    out.phoneme_scores = phone.scores;
    out.word = word_level(phone.h, batch.alignment, out.word_scores, &out.word_position_scores);
    out.ma_weights_word = out.word.weights;
    out.utt_repr = config_.hierarchical ? pool_word_representations(out.word.r, batch.mask)
                                        : masked_time_mean(phone.h, batch.mask);
    out.utt = utterance_aspects(out.utt_repr, out.utt_scores);
    out.ma_weights_utt = out.utt.weights;
    return out;
  }

 private:
  void apply_multi_aspect(AspectLevel& level, bool word_level) const {
    MultiAspectResult ma = multi_aspect_attention(level.a, word_level);
    level.r = std::move(ma.r);
    level.m = std::move(ma.m);
    level.weights = ma.weights;
  }

  ModelConfig config_;
  ParameterStore params_;
  Rng dropout_rng_;
  bool training_ = false;

  Dense gop_proj_;
  Embedding phone_embed_;
  Lstm lstm_;
  MultiHeadSelfAttention phone_attn_;
  Conv1dSame conv_;
  Dense phone_head_;
  std::vector<Dense> word_dense_;
  std::vector<Dense> word_head_;
  MultiAspectAttention word_ma_;
  MultiHeadSelfAttention utt_attn_;
  std::vector<Dense> utt_dense_;
  std::vector<Dense> utt_head_;
  MultiAspectAttention utt_ma_;
};

// ---------------------------------------------------------------------------
// Loss

/// Mean of squared errors over positions where `mask` is 1.
inline Tensor masked_mse(const Tensor& pred, const Tensor& gold, const Tensor& mask) {
  if (pred.shape() != gold.shape()) throw_shape("masked_mse", pred.shape(), gold.shape());
  if (pred.shape() != mask.shape()) throw_shape("masked_mse", pred.shape(), mask.shape());
  double count = 0.0;
  for (double v : mask.data()) count += v;
  if (count == 0.0) throw std::invalid_argument("masked_mse: nothing to score");
  return scale(sum_all(mul(square(sub(pred, gold)), mask)), 1.0 / count);
}

/// Sum over granularity levels of the mean aspect loss at that level.
inline double sum_of_level_means(const std::vector<std::vector<double>>& levels) {
  double total = 0.0;
  for (const auto& level : levels) {
    if (level.empty()) throw std::invalid_argument("sum_of_level_means: empty level");
    double s = 0.0;
    for (double v : level) s += v;
    total += s / static_cast<double>(level.size());
  }
  return total;
}

struct LossTerms {
  Tensor total;
  double phoneme = 0.0;
  std::vector<double> word;  // per config word aspect
  std::vector<double> utt;   // per config utterance aspect
};

/// Phoneme MSE + mean word-aspect MSE + mean utterance-aspect MSE.
inline LossTerms hierarchical_loss(const PredictionSet& pred, const Batch& batch,
                                   const ModelConfig& config) {
  if (pred.word_scores.size() != config.aspects_word.size() ||
      pred.utt_scores.size() != config.aspects_utt.size()) {
    throw std::invalid_argument("hierarchical_loss: prediction aspects do not match config");
  }
  LossTerms terms;
  const Tensor phone = masked_mse(pred.phoneme_scores, batch.phone_labels, batch.mask);
  terms.phoneme = phone.item();

  std::vector<Tensor> word_terms;
  for (std::size_t n = 0; n < config.aspects_word.size(); ++n) {
    word_terms.push_back(masked_mse(pred.word_scores[n],
                                    batch.word_target(config.aspects_word[n]),
                                    batch.word_mask));
    terms.word.push_back(word_terms.back().item());
  }
  std::vector<Tensor> utt_terms;
  for (std::size_t n = 0; n < config.aspects_utt.size(); ++n) {
    utt_terms.push_back(masked_mse(pred.utt_scores[n],
                                   batch.utt_target(config.aspects_utt[n]),
                                   batch.utt_mask));
    terms.utt.push_back(utt_terms.back().item());
  }
  auto level_mean = [](const std::vector<Tensor>& parts) {
    Tensor s = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) s = add(s, parts[i]);
    return scale(s, 1.0 / static_cast<double>(parts.size()));
  };
  terms.total = add(add(phone, level_mean(word_terms)), level_mean(utt_terms));
  return terms;
}

}  // namespace hipama
