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
 * @file checkpoint.hpp
 * @brief Versioned binary checkpoints.
 *
 * Layout (all integers little-endian):
 *
 *   "HIPAMA-CKPT-1\n"
 *   u64 header length, header bytes (JSON: {"model": ModelConfig, "run": ...})
 *   u64 parameter count
 *   per parameter: u32 name length, name bytes, u32 rank, u64 extents[rank],
 *                  f64 values[product(extents)]
 */

#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hipama/config.hpp"
#include "hipama/model.hpp"

namespace hipama {

inline constexpr std::string_view kCheckpointMagic = "HIPAMA-CKPT-1\n";

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw ValidationError("checkpoint: truncated file");
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
    return v;
  }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const HipamaModel& model,
                                        const nlohmann::json& run = nlohmann::json::object()) {
  std::string out(kCheckpointMagic);
  const std::string header = nlohmann::json{{"model", model.config()}, {"run", run}}.dump();
  detail::put_u64(out, header.size());
  out += header;
  const auto& params = model.parameters().params();
  detail::put_u64(out, params.size());
  for (const auto& p : params) {
    detail::put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    detail::put_u32(out, static_cast<std::uint32_t>(p.tensor.dim()));
    for (std::size_t extent : p.tensor.shape()) detail::put_u64(out, extent);
    for (double v : p.tensor.data()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

struct LoadedCheckpoint {
  HipamaModel model;
  nlohmann::json run;
};

inline LoadedCheckpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw ValidationError("checkpoint: bad magic, expected HIPAMA-CKPT-1");
  }
  detail::ByteReader in(bytes.substr(kCheckpointMagic.size()));
  const auto header_len = in.u64();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.take(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: malformed header: ") + e.what());
  }
  ModelConfig config = header.at("model").get<ModelConfig>();
  HipamaModel model(config);
  auto& store = model.parameters();
  const auto count = in.u64();
  if (count != store.params().size()) {
    throw ValidationError("checkpoint: holds " + std::to_string(count) +
                          " parameters, config builds " +
                          std::to_string(store.params().size()));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name(in.take(in.u32()));
    if (!store.contains(name)) throw ValidationError("checkpoint: unexpected parameter " + name);
    Tensor& t = store.get(name);
    const auto rank = in.u32();
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(in.u64());
    if (shape != t.shape()) {
      throw ValidationError("checkpoint: parameter " + name + " has shape " + shape_str(shape) +
                            ", model expects " + shape_str(t.shape()));
    }
    for (double& v : t.data()) v = std::bit_cast<double>(in.u64());
  }
  if (!in.done()) throw ValidationError("checkpoint: trailing bytes");
  return {std::move(model), header.value("run", nlohmann::json::object())};
}

inline void save_checkpoint(const std::string& path, const HipamaModel& model,
                            const nlohmann::json& run = nlohmann::json::object()) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << serialize_checkpoint(model, run);
}

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace hipama
