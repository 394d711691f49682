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

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hipama/data.hpp"
#include "hipama/model.hpp"

namespace hipama {

/// Pearson correlation; a zero-variance input yields 0 with `degenerate` set.
struct Correlation {
  double value = 0.0;
  bool degenerate = false;
};

inline Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least two pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return {0.0, true};
  return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

/**
 * Streaming Pearson statistics (count, means, centered second moments) that
 * can be merged across shards without revisiting the data.
 */
class PearsonAccumulator {
 public:
  void add(double x, double y) {
    n_ += 1.0;
    const double dx = x - mean_x_;
    mean_x_ += dx / n_;
    const double dy = y - mean_y_;
    mean_y_ += dy / n_;
    m2x_ += dx * (x - mean_x_);
    m2y_ += dy * (y - mean_y_);
    cxy_ += dx * (y - mean_y_);
  }

  void merge(const PearsonAccumulator& o) {
    if (o.n_ == 0.0) return;
    if (n_ == 0.0) {
      *this = o;
      return;
    }
    const double n = n_ + o.n_;
    const double dx = o.mean_x_ - mean_x_;
    const double dy = o.mean_y_ - mean_y_;
    const double w = n_ * o.n_ / n;
    m2x_ += o.m2x_ + dx * dx * w;
    m2y_ += o.m2y_ + dy * dy * w;
    cxy_ += o.cxy_ + dx * dy * w;
    mean_x_ += dx * o.n_ / n;
    mean_y_ += dy * o.n_ / n;
    n_ = n;
  }

  std::size_t count() const { return static_cast<std::size_t>(n_); }

  Correlation result() const {
    if (n_ < 2.0) throw std::invalid_argument("pearson: need at least two pairs");
    if (m2x_ == 0.0 || m2y_ == 0.0) return {0.0, true};
    return {std::clamp(cxy_ / std::sqrt(m2x_ * m2y_), -1.0, 1.0), false};
  }

 private:
  double n_ = 0.0;
  double mean_x_ = 0.0, mean_y_ = 0.0;
  double m2x_ = 0.0, m2y_ = 0.0, cxy_ = 0.0;
};

inline double mean_squared_error(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw std::invalid_argument("mse: bad lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return s / static_cast<double>(x.size());
}

struct EvalReport {
  double phoneme_mse = 0.0;
  Correlation phoneme_pcc;
  std::vector<std::string> word_aspects;
  std::vector<Correlation> word_pcc;
  std::vector<std::string> utt_aspects;
  std::vector<Correlation> utt_pcc;
  std::size_t n_phonemes = 0;
  std::size_t n_words = 0;
  std::size_t n_utterances = 0;

  double word(const std::string& aspect) const { return lookup(word_aspects, word_pcc, aspect); }
  double utt(const std::string& aspect) const { return lookup(utt_aspects, utt_pcc, aspect); }

 private:
  static double lookup(const std::vector<std::string>& names,
                       const std::vector<Correlation>& values, const std::string& aspect) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == aspect) return values[i].value;
    }
    throw std::out_of_range("no such aspect in report: " + aspect);
  }
};

/// Pooled (prediction, gold) pairs for every scored unit of a dataset.
struct ScoredPairs {
  std::vector<double> phone_pred, phone_gold;
  std::vector<std::vector<double>> word_pred, word_gold;  // per word aspect
  std::vector<std::vector<double>> utt_pred, utt_gold;    // per utterance aspect
};

inline double clamp_score(double v) { return std::clamp(v, 0.0, 2.0); }

/**
 * Runs `predict` (Batch -> PredictionSet) over `samples` in their given order
 * and pools one pair per unpadded phoneme, per word and per utterance.
 * Predictions are clamped to [0,2] before scoring.
 */
template <class Predict>
ScoredPairs collect_pairs(Predict&& predict, const std::vector<UtteranceSample>& samples,
                          const std::vector<std::string>& word_aspects,
                          const std::vector<std::string>& utt_aspects, std::size_t batch_size,
                          std::size_t max_len) {
  ScoredPairs pairs;
  pairs.word_pred.resize(word_aspects.size());
  pairs.word_gold.resize(word_aspects.size());
  pairs.utt_pred.resize(utt_aspects.size());
  pairs.utt_gold.resize(utt_aspects.size());
  for (const Batch& batch : make_batches(samples, batch_size, std::nullopt, max_len)) {
    const PredictionSet pred = predict(batch);
    const std::size_t T = batch.max_len;
    const std::size_t W = batch.max_words;
    for (std::size_t b = 0; b < batch.size; ++b) {
      for (std::size_t t = 0; t < batch.lengths[b]; ++t) {
        pairs.phone_pred.push_back(clamp_score(pred.phoneme_scores.data()[b * T + t]));
        pairs.phone_gold.push_back(batch.phone_labels.data()[b * T + t]);
      }
      for (std::size_t n = 0; n < word_aspects.size(); ++n) {
        const Tensor& gold = batch.word_target(word_aspects[n]);
        for (std::size_t w = 0; w < batch.word_counts[b]; ++w) {
          pairs.word_pred[n].push_back(clamp_score(pred.word_scores[n].data()[b * W + w]));
          pairs.word_gold[n].push_back(gold.data()[b * W + w]);
        }
      }
      for (std::size_t n = 0; n < utt_aspects.size(); ++n) {
        pairs.utt_pred[n].push_back(clamp_score(pred.utt_scores[n].data()[b]));
        pairs.utt_gold[n].push_back(batch.utt_target(utt_aspects[n]).data()[b]);
      }
    }
  }
  return pairs;
}

inline EvalReport report_from_pairs(const ScoredPairs& p,
                                    const std::vector<std::string>& word_aspects,
                                    const std::vector<std::string>& utt_aspects) {
  EvalReport r;
  r.word_aspects = word_aspects;
  r.utt_aspects = utt_aspects;
  r.n_phonemes = p.phone_pred.size();
  r.n_words = p.word_pred.empty() ? 0 : p.word_pred[0].size();
  r.n_utterances = p.utt_pred.empty() ? 0 : p.utt_pred[0].size();
  r.phoneme_mse = mean_squared_error(p.phone_pred, p.phone_gold);
  r.phoneme_pcc = pearson(p.phone_pred, p.phone_gold);
  for (std::size_t n = 0; n < word_aspects.size(); ++n) {
    r.word_pcc.push_back(pearson(p.word_pred[n], p.word_gold[n]));
  }
  for (std::size_t n = 0; n < utt_aspects.size(); ++n) {
    r.utt_pcc.push_back(pearson(p.utt_pred[n], p.utt_gold[n]));
  }
  return r;
}

template <class Predict>
EvalReport evaluate_with(Predict&& predict, const std::vector<UtteranceSample>& samples,
                         const std::vector<std::string>& word_aspects,
                         const std::vector<std::string>& utt_aspects,
                         std::size_t batch_size, std::size_t max_len) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  return report_from_pairs(
      collect_pairs(predict, samples, word_aspects, utt_aspects, batch_size, max_len),
      word_aspects, utt_aspects);
}

/// Evaluates in inference mode; the model's training flag is restored after.
inline EvalReport evaluate(HipamaModel& model, const std::vector<UtteranceSample>& samples,
                           std::size_t batch_size = 25) {
  const bool was_training = model.training();
  model.set_training(false);
  NoGradGuard no_grad;
  const auto& cfg = model.config();
  EvalReport report = evaluate_with([&](const Batch& b) { return model.forward(b); }, samples,
                                    cfg.aspects_word, cfg.aspects_utt, batch_size, cfg.max_len);
  model.set_training(was_training);
  return report;
}

// ---------------------------------------------------------------------------
// Text reports

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string exact(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string title_case(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace detail

/// Column titles in table order: phoneme MSE, phoneme PCC, word PCCs, utterance PCCs.
inline std::vector<std::string> report_columns(const EvalReport& r) {
  std::vector<std::string> cols{"Phoneme Acc (MSE)", "Phoneme Acc (PCC)"};
  for (const auto& a : r.word_aspects) cols.push_back("Word " + detail::title_case(a));
  for (const auto& a : r.utt_aspects) cols.push_back("Utt " + detail::title_case(a));
  return cols;
}

inline std::vector<double> report_values(const EvalReport& r) {
  std::vector<double> vals{r.phoneme_mse, r.phoneme_pcc.value};
  for (const auto& c : r.word_pcc) vals.push_back(c.value);
  for (const auto& c : r.utt_pcc) vals.push_back(c.value);
  return vals;
}

inline std::string table_row(const std::vector<std::string>& cells) {
  std::string out = "|";
  for (const auto& c : cells) out += " " + c + " |";
  return out + "\n";
}

/**
 * Human-readable table followed by one machine-readable line per metric
 * (`metric <level> <aspect> <kind> <value> <degenerate>`).
 */
inline std::string format_report(const EvalReport& r, const std::string& provenance = "") {
  std::string out = "# evaluation report\n";
  if (!provenance.empty()) out += "# config " + provenance + "\n";
  out += "units phonemes=" + std::to_string(r.n_phonemes) + " words=" +
         std::to_string(r.n_words) + " utterances=" + std::to_string(r.n_utterances) + "\n";
  std::vector<std::string> cells;
  for (double v : report_values(r)) cells.push_back(detail::fixed(v));
  out += table_row(report_columns(r));
  out += table_row(cells);
  auto line = [&](const std::string& level, const std::string& aspect, const char* kind,
                  double v, bool degenerate) {
    out += "metric " + level + " " + aspect + " " + kind + " " + detail::exact(v) + " " +
           (degenerate ? "1" : "0") + "\n";
  };
  line("phoneme", "accuracy", "mse", r.phoneme_mse, false);
  line("phoneme", "accuracy", "pcc", r.phoneme_pcc.value, r.phoneme_pcc.degenerate);
  for (std::size_t i = 0; i < r.word_aspects.size(); ++i) {
    line("word", r.word_aspects[i], "pcc", r.word_pcc[i].value, r.word_pcc[i].degenerate);
  }
  for (std::size_t i = 0; i < r.utt_aspects.size(); ++i) {
    line("utterance", r.utt_aspects[i], "pcc", r.utt_pcc[i].value, r.utt_pcc[i].degenerate);
  }
  return out;
}

/// Mean and sample standard deviation per column over several runs.
inline std::string format_summary(const std::vector<EvalReport>& runs) {
  if (runs.empty()) throw std::invalid_argument("format_summary: no runs");
  const auto cols = report_columns(runs.front());
  const std::size_t k = cols.size();
  std::vector<double> mean(k, 0.0), var(k, 0.0);
  for (const auto& r : runs) {
    const auto v = report_values(r);
    for (std::size_t i = 0; i < k; ++i) mean[i] += v[i];
  }
  for (double& m : mean) m /= static_cast<double>(runs.size());
  for (const auto& r : runs) {
    const auto v = report_values(r);
    for (std::size_t i = 0; i < k; ++i) var[i] += (v[i] - mean[i]) * (v[i] - mean[i]);
  }
  std::vector<std::string> cells;
  for (std::size_t i = 0; i < k; ++i) {
    const double sd =
        runs.size() > 1 ? std::sqrt(var[i] / static_cast<double>(runs.size() - 1)) : 0.0;
    cells.push_back(detail::fixed(mean[i], 3) + " ± " + detail::fixed(sd, 3));
  }
  std::string out = "# summary over " + std::to_string(runs.size()) + " runs (mean ± std)\n";
  out += table_row(cols);
  out += table_row(cells);
  return out;
}

}  // namespace hipama
