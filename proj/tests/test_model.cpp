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

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "hipama/model.hpp"

namespace hipama {
namespace {

using testing::batch_of;
using testing::grad_check;
using testing::kGradTolerance;
using testing::make_sample;
using testing::tiny_config;

Tensor vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor(Shape{n}, std::move(v));
}

std::vector<UtteranceSample> tiny_samples() {
  return {make_sample("a", {0, 1, 1}, 3, 1), make_sample("b", {0, 0}, 3, 2)};
}

// Straight-line evaluation of the cross-aspect attention for one target.
std::vector<double> reference_r(const ParameterStore& store, const std::string& pool,
                                const std::vector<std::vector<double>>& a, std::size_t n) {
  const std::size_t d = a[0].size();
  const auto& w = store.get(pool + ".proj.weight").values();  // [d,d], row-vector input
  const auto& b = store.get(pool + ".proj.bias").values();
  const auto& q = store.get(pool + ".query").values();
  std::vector<std::vector<double>> rows;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (j != n) rows.push_back(a[j]);
  }
  std::vector<double> energy;
  for (const auto& s : rows) {
    double e = 0.0;
    for (std::size_t o = 0; o < d; ++o) {
      double pre = b[o];
      for (std::size_t i = 0; i < d; ++i) pre += s[i] * w[i * d + o];
      e += q[o] * std::tanh(pre);
    }
    energy.push_back(e);
  }
  auto softmax = [](std::vector<double> x) {
    double mx = x[0];
    for (double v : x) mx = std::max(mx, v);
    double z = 0.0;
    for (double& v : x) z += (v = std::exp(v - mx));
    for (double& v : x) v /= z;
    return x;
  };
  const auto u = softmax(energy);
  std::vector<std::vector<double>> pooled = rows;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (double& v : pooled[i]) v *= u[i];
  }
  std::vector<double> score;
  for (const auto& p : pooled) {
    double dot = 0.0;
    for (std::size_t k = 0; k < d; ++k) dot += a[n][k] * p[k];
    score.push_back(dot / std::sqrt(static_cast<double>(d)));
  }
  const auto v = softmax(score);
  std::vector<double> r = a[n];
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k) r[k] += v[i] * pooled[i][k];
  }
  return r;
}

TEST(MultiAspectTest, TwoAspectsAddTheOtherVector) {
  ParameterStore store;
  Rng rng(0);
  MultiAspectAttention ma(store, "m", {"accuracy", "stress"}, 2, rng);
  const MultiAspectResult out = ma({vec({1, 0}), vec({0, 1})});
  EXPECT_EQ(out.weights.values(), (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(out.r[0].values(), (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(out.r[1].values(), (std::vector<double>{1.0, 1.0}));
}

TEST(MultiAspectTest, ThreeAspectsMatchReferenceEvaluation) {
  ParameterStore store;
  Rng rng(5);
  const std::vector<std::string> names{"accuracy", "stress", "total"};
  MultiAspectAttention ma(store, "m", names, 2, rng);
  const std::vector<std::vector<double>> a{{1, 0}, {0, 1}, {1, 1}};
  const MultiAspectResult out = ma({vec(a[0]), vec(a[1]), vec(a[2])});
  for (std::size_t n = 0; n < 3; ++n) {
    const auto expect = reference_r(store, "m." + names[n] + ".pool", a, n);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(out.r[n].values()[k], expect[k], 1e-12);
    double row = 0.0;
    for (std::size_t i = 0; i < 2; ++i) row += out.weights.at({n, i});
    EXPECT_NEAR(row, 1.0, 1e-12);
  }
}

TEST(MultiAspectTest, SingleAspectPassesThroughAndEmptyIsRejected) {
  ParameterStore store;
  Rng rng(0);
  MultiAspectAttention ma(store, "m", {"accuracy"}, 2, rng);
  EXPECT_EQ(store.count(), 0u);
  const MultiAspectResult out = ma({vec({0.3, 0.4})});
  EXPECT_EQ(out.r[0].values(), (std::vector<double>{0.3, 0.4}));
  EXPECT_THROW(ma({}), std::invalid_argument);
}

TEST(MultiAspectTest, BatchedInputMatchesPerVectorEvaluation) {
  ParameterStore store;
  Rng rng(9);
  const std::vector<std::string> names{"accuracy", "completeness", "fluency", "prosody"};
  MultiAspectAttention ma(store, "m", names, 3, rng);
  std::vector<Tensor> batched;
  for (std::size_t n = 0; n < 4; ++n) batched.push_back(testing::random_tensor({2, 5, 3}, n, -1, 1, false));
  const MultiAspectResult out = ma(batched);
  ASSERT_EQ(out.weights.shape(), (Shape{2, 5, 4, 3}));
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t t = 0; t < 5; ++t) {
      std::vector<std::vector<double>> a(4, std::vector<double>(3));
      for (std::size_t n = 0; n < 4; ++n) {
        for (std::size_t k = 0; k < 3; ++k) a[n][k] = batched[n].at({b, t, k});
      }
      for (std::size_t n = 0; n < 4; ++n) {
        const auto expect = reference_r(store, "m." + names[n] + ".pool", a, n);
        for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(out.r[n].at({b, t, k}), expect[k], 1e-12);
      }
    }
  }
}

TEST(ModelTest, EmbedZeroInputsWithPaddingIdsIsZero) {
  HipamaModel model(ModelConfig{});
  const std::vector<int> ids(2 * 5, 42);
  const Tensor x = model.embed_inputs(Tensor(Shape{2, 5, 84}), ids, Tensor(Shape{2, 5}, 1.0));
  EXPECT_EQ(x.shape(), (Shape{2, 5, 24}));
  for (double v : x.values()) EXPECT_EQ(v, 0.0);
  const std::vector<int> bad(10, 43);
  EXPECT_THROW(model.embed_inputs(Tensor(Shape{2, 5, 84}), bad, Tensor(Shape{2, 5}, 1.0)),
               std::out_of_range);
}

TEST(ModelTest, PhonemeEncoderShapesAndPadding) {
  HipamaModel model(ModelConfig{});
  std::vector<double> m(2 * 50, 1.0);
  for (std::size_t t = 30; t < 50; ++t) m[50 + t] = 0.0;
  const Tensor mask(Shape{2, 50}, m);
  const PhonemeOutput out =
      model.phoneme_encoder(testing::random_tensor({2, 50, 24}, 3, -1, 1, false), mask);
  EXPECT_EQ(out.h.shape(), (Shape{2, 50, 24}));
  EXPECT_EQ(out.scores.shape(), (Shape{2, 50}));
  for (std::size_t t = 30; t < 50; ++t) EXPECT_EQ(out.scores.at({1, t}), 0.0);
}

TEST(ModelTest, PredictionShapesAndWeightRows) {
  HipamaModel model(ModelConfig{});
  const auto samples = std::vector<UtteranceSample>{make_sample("a", {0, 0, 1, 2, 2}, 42, 1),
                                                    make_sample("b", {0, 1}, 42, 2)};
  const Batch batch = batch_of(samples);
  const PredictionSet p = model.forward(batch);
  EXPECT_EQ(p.phoneme_scores.shape(), (Shape{2, 5}));
  ASSERT_EQ(p.word_scores.size(), 3u);
  EXPECT_EQ(p.word_scores[0].shape(), (Shape{2, 3}));
  ASSERT_EQ(p.utt_scores.size(), 5u);
  EXPECT_EQ(p.utt_scores[4].shape(), (Shape{2}));
  ASSERT_EQ(p.ma_weights_word.shape(), (Shape{2, 5, 3, 2}));
  ASSERT_EQ(p.ma_weights_utt.shape(), (Shape{2, 5, 4}));
  const auto ww = p.ma_weights_word.values();
  for (std::size_t row = 0; row < ww.size() / 2; ++row) {
    EXPECT_NEAR(ww[2 * row] + ww[2 * row + 1], 1.0, 1e-9);
  }
  const auto uw = p.ma_weights_utt.values();
  for (std::size_t row = 0; row < uw.size() / 4; ++row) {
    EXPECT_NEAR(uw[4 * row] + uw[4 * row + 1] + uw[4 * row + 2] + uw[4 * row + 3], 1.0, 1e-9);
  }
  for (std::size_t n = 0; n < 3; ++n) EXPECT_EQ(p.word_scores[n].at({1, 2}), 0.0);
}

TEST(ModelTest, WordScoreIsMeanOfAlignedPositions) {
  HipamaModel model(ModelConfig{});
  const auto samples = std::vector<UtteranceSample>{make_sample("a", {0, 1, 1, 2, 2, 2}, 42, 4)};
  const PredictionSet p = model.forward(batch_of(samples));
  for (std::size_t n = 0; n < 3; ++n) {
    const Tensor& pos = p.word_position_scores[n];
    EXPECT_EQ(p.word_scores[n].at({0, 0}), pos.at({0, 0, 0}));
    EXPECT_NEAR(p.word_scores[n].at({0, 1}), (pos.at({0, 1, 0}) + pos.at({0, 2, 0})) / 2, 1e-15);
    EXPECT_NEAR(p.word_scores[n].at({0, 2}),
                (pos.at({0, 3, 0}) + pos.at({0, 4, 0}) + pos.at({0, 5, 0})) / 3, 1e-15);
  }
}

TEST(ModelTest, ResidualIdentityAtBothLevels) {
  HipamaModel model(ModelConfig{});
  const auto samples = std::vector<UtteranceSample>{make_sample("a", {0, 1, 1, 2}, 42, 5),
                                                    make_sample("b", {0, 0, 1}, 42, 6)};
  const PredictionSet p = model.forward(batch_of(samples));
  for (const AspectLevel* level : {&p.word, &p.utt}) {
    ASSERT_EQ(level->m.size(), level->a.size());
    for (std::size_t n = 0; n < level->a.size(); ++n) {
      const auto r = level->r[n].values(), a = level->a[n].values(), m = level->m[n].values();
      for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(r[i] - a[i], m[i], 1e-12);
    }
  }
}

TEST(ModelTest, CapturedWeightsMatchRecomputedScores) {
  HipamaModel model(ModelConfig{});
  const auto samples = std::vector<UtteranceSample>{make_sample("a", {0, 1, 1, 2}, 42, 7)};
  const PredictionSet p = model.forward(batch_of(samples));
  const MultiAspectResult again = model.multi_aspect_attention(p.utt.a, false);
  const std::size_t nu = 5, d = 24;
  for (std::size_t n = 0; n < nu; ++n) {
    std::vector<double> score(nu - 1);
    for (std::size_t i = 0; i < nu - 1; ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += p.utt.a[n].at({0, k}) * again.pooled[n].at({0, i, k});
      score[i] = dot / std::sqrt(24.0);
    }
    double mx = *std::max_element(score.begin(), score.end()), z = 0.0;
    for (double& s : score) z += (s = std::exp(s - mx));
    for (std::size_t i = 0; i < nu - 1; ++i) {
      EXPECT_NEAR(p.ma_weights_utt.at({0, n, i}), score[i] / z, 1e-12);
    }
  }
}

TEST(ModelTest, DisabledAttentionMeansIdentityAndIsolation) {
  for (bool hierarchical : {true, false}) {
    ModelConfig cfg;
    cfg.multi_aspect_attention = false;
    cfg.hierarchical = hierarchical;
    HipamaModel model(cfg);
    const auto samples = std::vector<UtteranceSample>{make_sample("a", {0, 1, 1, 2}, 42, 8)};
    const Batch batch = batch_of(samples);
    const PredictionSet before = model.forward(batch);
    for (std::size_t n = 0; n < 3; ++n) EXPECT_EQ(before.word.r[n].values(), before.word.a[n].values());
    EXPECT_FALSE(before.ma_weights_word.defined());
    for (double& v : model.parameters().get("word.stress.dense.weight").data()) v += 0.05;
    for (double& v : model.parameters().get("word.stress.head.weight").data()) v += 0.05;
    for (double& v : model.parameters().get("utt.fluency.dense.weight").data()) v += 0.05;
    const PredictionSet after = model.forward(batch);
    EXPECT_EQ(after.word_scores[0].values(), before.word_scores[0].values());
    EXPECT_EQ(after.word_scores[2].values(), before.word_scores[2].values());
    EXPECT_NE(after.word_scores[1].values(), before.word_scores[1].values());
    EXPECT_NE(after.utt_scores[2].values(), before.utt_scores[2].values());
    if (!hierarchical) {
      for (std::size_t n : {0, 1, 3, 4}) {
        EXPECT_EQ(after.utt_scores[n].values(), before.utt_scores[n].values());
      }
    }
  }
}

TEST(ModelTest, UtteranceScoresDependOnWordModulesOnlyWhenHierarchical) {
  for (bool hierarchical : {true, false}) {
    ModelConfig cfg;
    cfg.hierarchical = hierarchical;
    HipamaModel model(cfg);
    const auto samples = std::vector<UtteranceSample>{make_sample("a", {0, 1, 1, 2}, 42, 9)};
    const Batch batch = batch_of(samples);
    const PredictionSet before = model.forward(batch);
    for (double& v : model.parameters().get("word.accuracy.dense.weight").data()) v += 0.05;
    const PredictionSet after = model.forward(batch);
    for (std::size_t n = 0; n < 5; ++n) {
      if (hierarchical) {
        EXPECT_NE(after.utt_scores[n].values(), before.utt_scores[n].values()) << n;
      } else {
        EXPECT_EQ(after.utt_scores[n].values(), before.utt_scores[n].values()) << n;
      }
    }
  }
}

TEST(ModelTest, ParameterCountBandAndAblations) {
  const std::size_t full = HipamaModel(ModelConfig{}).parameter_count();
  EXPECT_EQ(full, HipamaModel(ModelConfig{}).parameter_count());
  EXPECT_GE(full, 22148u);
  EXPECT_LE(full, 41132u);
  ModelConfig flat;
  flat.hierarchical = false;
  const std::size_t no_hi = HipamaModel(flat).parameter_count();
  EXPECT_NE(no_hi, full);
  ModelConfig no_ma;
  no_ma.multi_aspect_attention = false;
  EXPECT_LT(HipamaModel(no_ma).parameter_count(), full);
}

TEST(ModelTest, EvalForwardIsBitwiseRepeatable) {
  HipamaModel model(ModelConfig{});
  const auto samples = std::vector<UtteranceSample>{make_sample("a", {0, 1, 1, 2}, 42, 10),
                                                    make_sample("b", {0}, 42, 11)};
  const Batch batch = batch_of(samples);
  const PredictionSet a = model.forward(batch);
  const PredictionSet b = model.forward(batch);
  EXPECT_EQ(a.phoneme_scores.values(), b.phoneme_scores.values());
  for (std::size_t n = 0; n < 5; ++n) EXPECT_EQ(a.utt_scores[n].values(), b.utt_scores[n].values());
  EXPECT_EQ(a.ma_weights_word.values(), b.ma_weights_word.values());
}

TEST(ModelTest, TrailingPaddingDoesNotChangeScores) {
  HipamaModel model(ModelConfig{});
  const UtteranceSample a = make_sample("a", {0, 1, 1}, 42, 12);
  const PredictionSet alone = model.forward(batch_of({a}));
  const PredictionSet padded = model.forward(batch_of({a}, 9));
  for (std::size_t n = 0; n < 5; ++n) {
    EXPECT_NEAR(alone.utt_scores[n].at({0}), padded.utt_scores[n].at({0}), 1e-9);
  }
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t w = 0; w < 2; ++w) {
      EXPECT_NEAR(alone.word_scores[n].at({0, w}), padded.word_scores[n].at({0, w}), 1e-9);
    }
  }
}

TEST(ModelTest, RejectsBatchWithOtherPhoneInventory) {
  HipamaModel model(ModelConfig{});
  const auto samples = std::vector<UtteranceSample>{make_sample("a", {0, 1}, 3, 1)};
  EXPECT_THROW(model.forward(batch_of(samples)), ValidationError);
}

TEST(LossTest, HandEvaluatedExample) {
  EXPECT_NEAR(sum_of_level_means({{0.01}, {0.03, 0.06, 0.09}, {0.05, 0.05, 0.05, 0.05, 0.05}}),
              0.12, 1e-15);
  // The same value through the tensor loss on one utterance of one word.
  UtteranceSample s = make_sample("u", {0}, 3, 1);
  s.phoneme_accuracy = {1.0};
  s.words = {{5.0, 5.0, 5.0}};
  s.utterance = {5.0, 5.0, 5.0, 5.0, 5.0};
  const Batch batch = batch_of({s});
  const ModelConfig cfg = tiny_config();
  PredictionSet p;
  p.phoneme_scores = Tensor(Shape{1, 1}, {1.1});
  for (double l : {0.03, 0.06, 0.09}) p.word_scores.push_back(Tensor(Shape{1, 1}, {1.0 + std::sqrt(l)}));
  for (int i = 0; i < 5; ++i) p.utt_scores.push_back(Tensor(Shape{1}, {1.0 - std::sqrt(0.05)}));
  const LossTerms t = hierarchical_loss(p, batch, cfg);
  EXPECT_NEAR(t.total.item(), 0.12, 1e-12);
  EXPECT_NEAR(t.word[2], 0.09, 1e-12);
}

TEST(LossTest, PerfectAndConstantPredictions) {
  const UtteranceSample s = make_sample("u", {0, 1, 1}, 3, 2);
  const Batch batch = batch_of({s});
  PredictionSet p;
  p.phoneme_scores = batch.phone_labels;
  for (const auto& a : known_word_aspects()) p.word_scores.push_back(batch.word_target(a));
  for (const auto& a : known_utterance_aspects()) p.utt_scores.push_back(batch.utt_target(a));
  EXPECT_EQ(hierarchical_loss(p, batch, tiny_config()).total.item(), 0.0);
  const double c = 0.25;  // offset 0.5 everywhere gives every L_mn = c
  p.phoneme_scores = add_scalar(batch.phone_labels, 0.5);
  for (auto& w : p.word_scores) w = add_scalar(w, 0.5);
  for (auto& u : p.utt_scores) u = add_scalar(u, 0.5);
  EXPECT_NEAR(hierarchical_loss(p, batch, tiny_config()).total.item(), 3 * c, 1e-15);
}

TEST(LossTest, TotalEqualsSumOfLevelAverages) {
  HipamaModel model(ModelConfig{});
  const auto samples = std::vector<UtteranceSample>{make_sample("a", {0, 1, 1, 2}, 42, 13),
                                                    make_sample("b", {0, 0, 1}, 42, 14)};
  const Batch batch = batch_of(samples);
  const PredictionSet p = model.forward(batch);
  const LossTerms t = hierarchical_loss(p, batch, model.config());
  // Independent recomputation from raw values.
  auto mse = [](const Tensor& pred, const Tensor& gold, const Tensor& mask) {
    double s = 0.0, n = 0.0;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
      const double e = pred.values()[i] - gold.values()[i];
      s += mask.values()[i] * e * e;
      n += mask.values()[i];
    }
    return s / n;
  };
  double word = 0.0, utt = 0.0;
  for (std::size_t n = 0; n < 3; ++n) {
    word += mse(p.word_scores[n], batch.word_labels[n], batch.word_mask) / 3;
  }
  for (std::size_t n = 0; n < 5; ++n) {
    utt += mse(p.utt_scores[n], batch.utt_labels[n], batch.utt_mask) / 5;
  }
  const double phone = mse(p.phoneme_scores, batch.phone_labels, batch.mask);
  EXPECT_NEAR(t.total.item(), phone + word + utt, 1e-12);
}

TEST(ModelGradient, PhonemeLossWithRespectToEncoderInput) {
  HipamaModel model(tiny_config());
  Tensor x = testing::random_tensor({2, 3, 4}, 15);
  const Tensor mask(Shape{2, 3}, {1, 1, 1, 1, 1, 0});
  const Tensor gold = testing::random_tensor({2, 3}, 16, 0, 2, false);
  const auto r = grad_check({x}, [&] {
    return masked_mse(model.phoneme_encoder(x, mask).scores, gold, mask);
  });
  EXPECT_LT(r.max_rel_error, kGradTolerance) << r.worst;
}

TEST(ModelGradient, FullModelAtReducedWidth) {
  for (bool hierarchical : {true, false}) {
    for (bool ma : {true, false}) {
      ModelConfig cfg = tiny_config();
      cfg.hierarchical = hierarchical;
      cfg.multi_aspect_attention = ma;
      HipamaModel model(cfg);
      const Batch batch = batch_of(tiny_samples());
      std::vector<Tensor> params;
      for (auto& p : model.parameters().params()) params.push_back(p.tensor);
      const auto r = grad_check(params, [&] {
        return hierarchical_loss(model.forward(batch), batch, cfg).total;
      });
      EXPECT_LT(r.max_rel_error, kGradTolerance)
          << "hierarchical=" << hierarchical << " ma=" << ma << " " << r.worst;
    }
  }
}

}  // namespace
}  // namespace hipama
