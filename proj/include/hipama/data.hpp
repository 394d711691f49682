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
 * @file data.hpp
 * @brief Utterance records, the line-delimited dataset format and batching.
 *
 * One utterance per line, nine fields separated by " | ":
 *
 *   utt_id | phone_ids | word_index | gop | phoneme_acc | word_acc |
 *   word_stress | word_total | utt_acc,utt_comp,utt_flu,utt_pros,utt_total
 *
 * Lists are comma-separated; gop holds one row of 2*n_phones values per
 * phoneme, rows separated by ';'. Phoneme accuracy is already on the 0-2
 * scale; word and utterance labels are raw 0-10 scores.
 */

#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "hipama/config.hpp"
#include "hipama/random.hpp"
#include "hipama/tensor.hpp"

namespace hipama {

inline constexpr double kRawLabelMax = 10.0;
inline constexpr double kLabelScale = 5.0;

/// Maps a raw 0-10 word/utterance score onto the 0-2 phoneme scale.
inline double scale_label(double raw) {
  if (!(raw >= 0.0 && raw <= kRawLabelMax)) {
    throw ValidationError("label " + std::to_string(raw) + " outside [0,10]");
  }
  return raw / kLabelScale;
}

inline double unscale_label(double scaled) { return scaled * kLabelScale; }

struct WordLabels {
  double accuracy = 0.0;
  double stress = 0.0;
  double total = 0.0;

  bool operator==(const WordLabels&) const = default;
};

struct UtteranceLabels {
  double accuracy = 0.0;
  double completeness = 0.0;
  double fluency = 0.0;
  double prosody = 0.0;
  double total = 0.0;

  bool operator==(const UtteranceLabels&) const = default;
};

inline double word_label(const WordLabels& w, std::string_view aspect) {
  if (aspect == "accuracy") return w.accuracy;
  if (aspect == "stress") return w.stress;
  if (aspect == "total") return w.total;
  throw std::out_of_range("unknown word aspect: " + std::string(aspect));
}

inline double utterance_label(const UtteranceLabels& u, std::string_view aspect) {
  if (aspect == "accuracy") return u.accuracy;
  if (aspect == "completeness") return u.completeness;
  if (aspect == "fluency") return u.fluency;
  if (aspect == "prosody") return u.prosody;
  if (aspect == "total") return u.total;
  throw std::out_of_range("unknown utterance aspect: " + std::string(aspect));
}

struct UtteranceSample {
  std::string utt_id;
  std::vector<int> phone_ids;
  std::vector<std::vector<double>> gop;
  std::vector<int> word_index;
  std::vector<double> phoneme_accuracy;
  std::vector<WordLabels> words;
  UtteranceLabels utterance;

  std::size_t length() const { return phone_ids.size(); }
  std::size_t num_words() const { return words.size(); }
  std::size_t gop_dim() const { return gop.empty() ? 0 : gop.front().size(); }

  bool operator==(const UtteranceSample&) const = default;
};

/// Checks every record invariant; `gop_dim` of 0 accepts any even width.
inline void validate_sample(const UtteranceSample& s, std::size_t gop_dim = 0) {
  auto fail = [&](const std::string& msg) {
    throw ValidationError("utterance '" + s.utt_id + "': " + msg);
  };
  if (s.utt_id.empty()) fail("empty utt_id");
  if (s.utt_id.find('|') != std::string::npos) fail("utt_id contains '|'");
  const std::size_t n = s.phone_ids.size();
  if (n == 0) fail("no phonemes");
  if (s.gop.size() != n) {
    fail(std::to_string(n) + " phonemes but " + std::to_string(s.gop.size()) + " GOP rows");
  }
  if (s.word_index.size() != n) fail("word_index length differs from phone_ids");
  if (s.phoneme_accuracy.size() != n) fail("phoneme_acc length differs from phone_ids");
  const std::size_t width = gop_dim ? gop_dim : s.gop.front().size();
  if (width == 0 || width % 2 != 0) fail("GOP rows must have an even, positive width");
  for (const auto& row : s.gop) {
    if (row.size() != width) fail("ragged GOP rows");
  }
  const auto n_phones = static_cast<int>(width / 2);
  for (int id : s.phone_ids) {
    if (id < 0 || id >= n_phones) fail("phone id " + std::to_string(id) + " out of range");
  }
  if (s.word_index.front() != 0) fail("word_index must start at 0");
  for (std::size_t i = 1; i < n; ++i) {
    const int step = s.word_index[i] - s.word_index[i - 1];
    if (step != 0 && step != 1) fail("word_index must be non-decreasing without gaps");
  }
  const auto words = static_cast<std::size_t>(s.word_index.back()) + 1;
  if (s.words.size() != words) {
    fail("expected " + std::to_string(words) + " word labels, got " +
         std::to_string(s.words.size()));
  }
  for (double q : s.phoneme_accuracy) {
    if (!(q >= 0.0 && q <= 2.0)) fail("phoneme accuracy outside [0,2]");
  }
  auto raw = [&](double v, const char* what) {
    if (!(v >= 0.0 && v <= kRawLabelMax)) fail(std::string(what) + " label outside [0,10]");
  };
  for (const auto& w : s.words) {
    raw(w.accuracy, "word accuracy");
    raw(w.stress, "word stress");
    raw(w.total, "word total");
  }
  raw(s.utterance.accuracy, "utterance accuracy");
  raw(s.utterance.completeness, "utterance completeness");
  raw(s.utterance.fluency, "utterance fluency");
  raw(s.utterance.prosody, "utterance prosody");
  raw(s.utterance.total, "utterance total");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

template <class T>
T parse_number(std::string_view s) {
  s = trim(s);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ValidationError("malformed number '" + std::string(s) + "'");
  }
  return value;
}

template <class T>
std::vector<T> parse_list(std::string_view s) {
  std::vector<T> out;
  if (trim(s).empty()) return out;
  for (auto part : split(s, ',')) out.push_back(parse_number<T>(part));
  return out;
}

/// Shortest decimal text that round-trips to the same double.
inline void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline void append_number(std::string& out, int v) { out += std::to_string(v); }

template <class T>
void append_list(std::string& out, const std::vector<T>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    append_number(out, values[i]);
  }
}

}  // namespace detail

inline UtteranceSample parse_record(std::string_view line) {
  const auto fields = detail::split(line, '|');
  if (fields.size() != 9) {
    throw ValidationError("expected 9 '|'-separated fields, got " +
                          std::to_string(fields.size()));
  }
  UtteranceSample s;
  s.utt_id = std::string(detail::trim(fields[0]));
  try {
    s.phone_ids = detail::parse_list<int>(fields[1]);
    s.word_index = detail::parse_list<int>(fields[2]);
    for (auto row : detail::split(fields[3], ';')) {
      s.gop.push_back(detail::parse_list<double>(row));
    }
    s.phoneme_accuracy = detail::parse_list<double>(fields[4]);
    const auto acc = detail::parse_list<double>(fields[5]);
    const auto stress = detail::parse_list<double>(fields[6]);
    const auto total = detail::parse_list<double>(fields[7]);
    if (acc.size() != stress.size() || acc.size() != total.size()) {
      throw ValidationError("word label lists differ in length");
    }
    for (std::size_t i = 0; i < acc.size(); ++i) s.words.push_back({acc[i], stress[i], total[i]});
    const auto utt = detail::parse_list<double>(fields[8]);
    if (utt.size() != 5) throw ValidationError("expected 5 utterance labels");
    s.utterance = {utt[0], utt[1], utt[2], utt[3], utt[4]};
  } catch (const ValidationError& e) {
    throw ValidationError("utterance '" + s.utt_id + "': " + e.what());
  }
  validate_sample(s);
  return s;
}

inline std::string format_record(const UtteranceSample& s) {
  std::string out = s.utt_id;
  out += " | ";
  detail::append_list(out, s.phone_ids);
  out += " | ";
  detail::append_list(out, s.word_index);
  out += " | ";
  for (std::size_t i = 0; i < s.gop.size(); ++i) {
    if (i) out += ';';
    detail::append_list(out, s.gop[i]);
  }
  out += " | ";
  detail::append_list(out, s.phoneme_accuracy);
  std::vector<double> acc, stress, total;
  for (const auto& w : s.words) {
    acc.push_back(w.accuracy);
    stress.push_back(w.stress);
    total.push_back(w.total);
  }
  out += " | ";
  detail::append_list(out, acc);
  out += " | ";
  detail::append_list(out, stress);
  out += " | ";
  detail::append_list(out, total);
  out += " | ";
  const auto& u = s.utterance;
  detail::append_list(out, std::vector<double>{u.accuracy, u.completeness, u.fluency,
                                               u.prosody, u.total});
  return out;
}

/// Parses a whole dataset; errors carry the 1-based line number.
inline std::vector<UtteranceSample> parse_dataset(std::istream& in) {
  std::vector<UtteranceSample> samples;
  std::string line;
  std::size_t line_no = 0;
  std::size_t gop_dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      UtteranceSample s = parse_record(line);
      if (gop_dim == 0) gop_dim = s.gop_dim();
      if (s.gop_dim() != gop_dim) {
        throw ValidationError("utterance '" + s.utt_id + "': GOP width " +
                              std::to_string(s.gop_dim()) + " differs from " +
                              std::to_string(gop_dim));
      }
      samples.push_back(std::move(s));
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return samples;
}

inline std::vector<UtteranceSample> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dataset " + path);
  return parse_dataset(in);
}

inline std::string format_dataset(const std::vector<UtteranceSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += format_record(s);
    out += '\n';
  }
  return out;
}

inline void write_dataset(const std::string& path,
                          const std::vector<UtteranceSample>& samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset " + path);
  out << format_dataset(samples);
}

/**
 * Padded, masked stack of utterances. Word and utterance labels are scaled to
 * 0-2 and stored in the order of known_word_aspects() /
 * known_utterance_aspects().
 */
struct Batch {
  std::vector<std::string> utt_ids;
  std::size_t size = 0;
  std::size_t max_len = 0;    // T
  std::size_t max_words = 0;  // W
  std::size_t n_phones = 0;
  Tensor gop;                   // [B,T,G], zero rows at padding
  std::vector<int> phone_ids;   // B*T, padding id n_phones
  Tensor mask;                  // [B,T]
  std::vector<int> word_index;  // B*T, -1 at padding
  Tensor alignment;             // [B,W,T], 1/len(word) where aligned
  Tensor word_mask;             // [B,W]
  Tensor utt_mask;              // [B], all ones
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> word_counts;
  Tensor phone_labels;              // [B,T]
  std::vector<Tensor> word_labels;  // per known word aspect, [B,W]
  std::vector<Tensor> utt_labels;   // per known utterance aspect, [B]

  const Tensor& word_target(std::string_view aspect) const {
    const auto& names = known_word_aspects();
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == aspect) return word_labels[i];
    }
    throw std::out_of_range("unknown word aspect: " + std::string(aspect));
  }
  const Tensor& utt_target(std::string_view aspect) const {
    const auto& names = known_utterance_aspects();
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == aspect) return utt_labels[i];
    }
    throw std::out_of_range("unknown utterance aspect: " + std::string(aspect));
  }
};

/// Pads `members` to a common length. `pad_to` of 0 pads to the longest.
inline Batch build_batch(const std::vector<const UtteranceSample*>& members,
                         std::size_t pad_to = 0) {
  if (members.empty()) throw std::invalid_argument("build_batch: no samples");
  Batch b;
  b.size = members.size();
  b.n_phones = members.front()->gop_dim() / 2;
  const std::size_t g = members.front()->gop_dim();
  for (const auto* s : members) {
    b.max_len = std::max(b.max_len, s->length());
    b.max_words = std::max(b.max_words, s->num_words());
    if (s->gop_dim() != g) throw ValidationError("build_batch: mixed GOP widths");
  }
  if (pad_to) {
    if (pad_to < b.max_len) throw std::invalid_argument("build_batch: pad_to too small");
    b.max_len = pad_to;
  }
  const std::size_t B = b.size, T = b.max_len, W = b.max_words;
  std::vector<double> gop(B * T * g, 0.0), mask(B * T, 0.0), align(B * W * T, 0.0),
      wmask(B * W, 0.0), plab(B * T, 0.0);
  b.phone_ids.assign(B * T, static_cast<int>(b.n_phones));
  b.word_index.assign(B * T, -1);
  const auto& wnames = known_word_aspects();
  const auto& unames = known_utterance_aspects();
  std::vector<std::vector<double>> wlab(wnames.size(), std::vector<double>(B * W, 0.0));
  std::vector<std::vector<double>> ulab(unames.size(), std::vector<double>(B, 0.0));
  for (std::size_t i = 0; i < B; ++i) {
    const UtteranceSample& s = *members[i];
    b.utt_ids.push_back(s.utt_id);
    b.lengths.push_back(s.length());
    b.word_counts.push_back(s.num_words());
    std::vector<std::size_t> word_len(s.num_words(), 0);
    for (int w : s.word_index) ++word_len[static_cast<std::size_t>(w)];
    for (std::size_t t = 0; t < s.length(); ++t) {
      std::copy(s.gop[t].begin(), s.gop[t].end(), gop.begin() + (i * T + t) * g);
      mask[i * T + t] = 1.0;
      b.phone_ids[i * T + t] = s.phone_ids[t];
      b.word_index[i * T + t] = s.word_index[t];
      plab[i * T + t] = s.phoneme_accuracy[t];
      const auto w = static_cast<std::size_t>(s.word_index[t]);
      align[(i * W + w) * T + t] = 1.0 / static_cast<double>(word_len[w]);
    }
    for (std::size_t w = 0; w < s.num_words(); ++w) {
      wmask[i * W + w] = 1.0;
      for (std::size_t a = 0; a < wnames.size(); ++a) {
        wlab[a][i * W + w] = scale_label(word_label(s.words[w], wnames[a]));
      }
    }
    for (std::size_t a = 0; a < unames.size(); ++a) {
      ulab[a][i] = scale_label(utterance_label(s.utterance, unames[a]));
    }
  }
  b.gop = Tensor({B, T, g}, std::move(gop));
  b.mask = Tensor({B, T}, std::move(mask));
  b.alignment = Tensor({B, W, T}, std::move(align));
  b.word_mask = Tensor({B, W}, std::move(wmask));
  b.utt_mask = Tensor({B}, 1.0);
  b.phone_labels = Tensor({B, T}, std::move(plab));
  for (auto& v : wlab) b.word_labels.emplace_back(Shape{B, W}, std::move(v));
  for (auto& v : ulab) b.utt_labels.emplace_back(Shape{B}, std::move(v));
  return b;
}

/**
 * Groups samples into batches of `batch_size` (the last may be smaller),
 * each padded to its own longest member. With a shuffle seed the order is a
 * deterministic permutation; without one the input order is kept.
 */
inline std::vector<Batch> make_batches(const std::vector<UtteranceSample>& samples,
                                       std::size_t batch_size,
                                       std::optional<std::uint64_t> shuffle_seed,
                                       std::size_t max_len) {
  if (batch_size == 0) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  for (const auto& s : samples) {
    if (s.length() > max_len) {
      throw ValidationError("utterance '" + s.utt_id + "' has " + std::to_string(s.length()) +
                            " phonemes, longer than max_len " + std::to_string(max_len));
    }
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    rng.shuffle(order);
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::vector<const UtteranceSample*> members;
    for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) {
      members.push_back(&samples[order[i]]);
    }
    batches.push_back(build_batch(members));
  }
  return batches;
}

}  // namespace hipama
