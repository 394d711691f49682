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
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace hipama {

/// Raised for user-facing validation failures (bad config, bad data files).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& known_word_aspects() {
  static const std::vector<std::string> names{"accuracy", "stress", "total"};
  return names;
}

inline const std::vector<std::string>& known_utterance_aspects() {
  static const std::vector<std::string> names{"accuracy", "completeness", "fluency",
                                              "prosody", "total"};
  return names;
}

struct ModelConfig {
  std::size_t n_phones = 42;
  std::size_t gop_dim = 84;
  std::size_t width = 24;
  std::size_t heads = 4;
  std::size_t kernel_size = 3;
  double dropout_utt = 0.2;
  std::size_t max_len = 50;
  std::vector<std::string> aspects_word = known_word_aspects();
  std::vector<std::string> aspects_utt = known_utterance_aspects();
  bool hierarchical = true;
  bool multi_aspect_attention = true;
  bool positional_encoding = false;
  std::uint64_t seed = 0;
  // Adam constants; learning rate lives in RunConfig.
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const {
    auto fail = [](const std::string& msg) { throw ValidationError("config: " + msg); };
    if (n_phones == 0) fail("n_phones must be positive");
    if (gop_dim != 2 * n_phones) fail("gop_dim must equal 2 * n_phones");
    if (width == 0) fail("width must be positive");
    if (heads == 0 || width % heads != 0) fail("width must be divisible by heads");
    if (kernel_size == 0 || kernel_size % 2 == 0) fail("kernel_size must be odd");
    if (dropout_utt < 0.0 || dropout_utt >= 1.0) fail("dropout_utt must lie in [0,1)");
    if (max_len == 0) fail("max_len must be positive");
    auto check_aspects = [&](const std::vector<std::string>& list,
                             const std::vector<std::string>& known, const char* level) {
      if (list.empty()) fail(std::string(level) + " aspect list is empty");
      std::set<std::string> seen;
      for (const auto& a : list) {
        if (!seen.insert(a).second) fail(std::string(level) + " aspect '" + a + "' repeated");
        if (std::find(known.begin(), known.end(), a) == known.end()) {
          fail(std::string(level) + " aspect '" + a + "' is unknown");
        }
      }
    };
    check_aspects(aspects_word, known_word_aspects(), "word");
    check_aspects(aspects_utt, known_utterance_aspects(), "utterance");
  }

  bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"n_phones", c.n_phones},
                     {"gop_dim", c.gop_dim},
                     {"width", c.width},
                     {"heads", c.heads},
                     {"kernel_size", c.kernel_size},
                     {"dropout_utt", c.dropout_utt},
                     {"max_len", c.max_len},
                     {"aspects_word", c.aspects_word},
                     {"aspects_utt", c.aspects_utt},
                     {"hierarchical", c.hierarchical},
                     {"multi_aspect_attention", c.multi_aspect_attention},
                     {"positional_encoding", c.positional_encoding},
                     {"seed", c.seed},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_epsilon", c.adam_epsilon}};
}

/// Missing keys keep their defaults, so partial config files are accepted.
inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  read("n_phones", c.n_phones);
  if (j.contains("gop_dim")) {
    j.at("gop_dim").get_to(c.gop_dim);
  } else {
    c.gop_dim = 2 * c.n_phones;
  }
  read("width", c.width);
  read("heads", c.heads);
  read("kernel_size", c.kernel_size);
  read("dropout_utt", c.dropout_utt);
  read("max_len", c.max_len);
  read("aspects_word", c.aspects_word);
  read("aspects_utt", c.aspects_utt);
  read("hierarchical", c.hierarchical);
  read("multi_aspect_attention", c.multi_aspect_attention);
  read("positional_encoding", c.positional_encoding);
  read("seed", c.seed);
  read("adam_beta1", c.adam_beta1);
  read("adam_beta2", c.adam_beta2);
  read("adam_epsilon", c.adam_epsilon);
}

}  // namespace hipama
