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
 * @file layers.hpp
 * @brief Neural building blocks over hipama::Tensor.
 *
 * Sequence layers take inputs shaped [B, T, d] together with a constant
 * validity mask [B, T] holding 1 for real positions and 0 for padding.
 * Padding only ever occurs as a suffix of each row.
 */

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "hipama/optim.hpp"
#include "hipama/random.hpp"
#include "hipama/tensor.hpp"

namespace hipama {

enum class Activation { kNone, kRelu, kTanh };

inline Tensor activate(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::kRelu: return relu(x);
    case Activation::kTanh: return tanh(x);
    case Activation::kNone: break;
  }
  return x;
}

/// Rejects masks that are not 0/1 or that have a real position after padding.
inline void check_suffix_mask(const Tensor& mask) {
  if (mask.dim() != 2) {
    throw ShapeError("mask must be [B,T], got " + shape_str(mask.shape()));
  }
  const std::size_t b = mask.shape()[0];
  const std::size_t t = mask.shape()[1];
  const auto m = mask.data();
  for (std::size_t i = 0; i < b; ++i) {
    bool padded = false;
    for (std::size_t j = 0; j < t; ++j) {
      const double v = m[i * t + j];
      if (v != 0.0 && v != 1.0) throw std::invalid_argument("mask values must be 0 or 1");
      if (v == 0.0) {
        padded = true;
      } else if (padded) {
        throw std::invalid_argument("mask row " + std::to_string(i) +
                                    " has padding before a real position");
      }
    }
  }
}

/// [B,T] -> [B,T,1] so it broadcasts over features.
inline Tensor feature_mask(const Tensor& mask) {
  return Tensor(Shape{mask.shape()[0], mask.shape()[1], 1}, mask.values());
}

/// Inverted dropout. Identity at inference or when rate is 0.
inline Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate must lie in [0,1)");
  }
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> keep(x.numel());
  for (double& k : keep) k = rng.uniform() < rate ? 0.0 : keep_scale;
  return mul(x, Tensor(x.shape(), std::move(keep)));
}

/// Sinusoidal position table [T, d].
inline Tensor sinusoidal_positions(std::size_t length, std::size_t d) {
  std::vector<double> table(length * d);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < d; ++i) {
      const double rate =
          std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) * rate;
      table[pos * d + i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor(Shape{length, d}, std::move(table));
}

// y = act(x W + b)
class Dense {
 public:
  Dense() = default;
  Dense(ParameterStore& store, const std::string& prefix, std::size_t in_dim,
        std::size_t out_dim, Rng& rng, Activation act = Activation::kNone)
      : in_dim_(in_dim), act_(act) {
    weight_ = store.create_uniform(prefix + ".weight", {in_dim, out_dim}, in_dim,
                                   out_dim, rng);
    bias_ = store.create(prefix + ".bias", {out_dim});
  }

  Tensor operator()(const Tensor& x) const {
    if (x.dim() == 0 || x.shape().back() != in_dim_) {
      throw_shape("dense", x.shape(), weight_.shape());
    }
    return activate(add(matmul(x, weight_), bias_), act_);
  }

  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  std::size_t in_dim_ = 0;
  Activation act_ = Activation::kNone;
  Tensor weight_;
  Tensor bias_;
};

/// Lookup table with a reserved all-zero padding id equal to `rows`.
class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterStore& store, const std::string& prefix, std::size_t rows,
            std::size_t dim, Rng& rng) {
    table_ = store.create_uniform(prefix + ".weight", {rows, dim}, rows, dim, rng);
  }

  Tensor operator()(std::span<const int> ids, const Shape& ids_shape) const {
    return embedding(table_, ids, ids_shape);
  }

  const Tensor& table() const { return table_; }

 private:
  Tensor table_;
};

/**
 * Single-layer unidirectional LSTM, gate order (input, forget, cell, output).
 * At padded steps the state is carried through unchanged and the output is 0.
 */
class Lstm {
 public:
  Lstm() = default;
  Lstm(ParameterStore& store, const std::string& prefix, std::size_t in_dim,
       std::size_t hidden, Rng& rng)
      : in_dim_(in_dim), hidden_(hidden) {
    w_x_ = store.create_uniform(prefix + ".w_x", {in_dim, 4 * hidden}, in_dim, hidden, rng);
    w_h_ = store.create_uniform(prefix + ".w_h", {hidden, 4 * hidden}, hidden, hidden, rng);
    bias_ = store.create(prefix + ".bias", {4 * hidden});
    for (std::size_t j = hidden; j < 2 * hidden; ++j) bias_.data()[j] = 1.0;
  }

  Tensor operator()(const Tensor& x, const Tensor& mask) const {
    if (x.dim() != 3 || x.shape()[2] != in_dim_) throw_shape("lstm", x.shape(), w_x_.shape());
    if (mask.shape() != Shape{x.shape()[0], x.shape()[1]}) throw_shape("lstm", x.shape(), mask.shape());
    check_suffix_mask(mask);
    const std::size_t b = x.shape()[0];
    const std::size_t steps = x.shape()[1];
    const std::size_t h = hidden_;

    const Tensor projected = add(matmul(x, w_x_), bias_);  // [B,T,4h]
    Tensor hs(Shape{b, h});
    Tensor cs(Shape{b, h});
    std::vector<Tensor> outputs;
    outputs.reserve(steps);
    const auto mv = mask.data();
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<double> keep(b), hold(b);
      for (std::size_t i = 0; i < b; ++i) {
        keep[i] = mv[i * steps + t];
        hold[i] = 1.0 - keep[i];
      }
      const Tensor m(Shape{b, 1}, keep);
      const Tensor not_m(Shape{b, 1}, hold);
      const Tensor gates =
          add(reshape(slice(projected, 1, t, t + 1), {b, 4 * h}), matmul(hs, w_h_));
      const Tensor in_gate = sigmoid(slice(gates, 1, 0, h));
      const Tensor forget_gate = sigmoid(slice(gates, 1, h, 2 * h));
      const Tensor candidate = tanh(slice(gates, 1, 2 * h, 3 * h));
      const Tensor out_gate = sigmoid(slice(gates, 1, 3 * h, 4 * h));
      const Tensor c_new = add(mul(forget_gate, cs), mul(in_gate, candidate));
      const Tensor h_new = mul(out_gate, tanh(c_new));
      cs = add(mul(m, c_new), mul(not_m, cs));
      hs = add(mul(m, h_new), mul(not_m, hs));
      outputs.push_back(reshape(mul(m, hs), {b, 1, h}));
    }
    return concat(outputs, 1);
  }

  const Tensor& w_x() const { return w_x_; }
  const Tensor& w_h() const { return w_h_; }
  const Tensor& bias() const { return bias_; }

 private:
  std::size_t in_dim_ = 0;
  std::size_t hidden_ = 0;
  Tensor w_x_;
  Tensor w_h_;
  Tensor bias_;
};

/**
 * Multi-head scaled dot-product self-attention with an output projection.
 * Keys at padded positions are excluded; outputs at padded positions are 0.
 * No residual connection is applied here.
 */
class MultiHeadSelfAttention {
 public:
  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(ParameterStore& store, const std::string& prefix,
                         std::size_t dim, std::size_t heads, Rng& rng)
      : dim_(dim), heads_(heads) {
    if (heads == 0 || dim % heads != 0) {
      throw std::invalid_argument("attention width " + std::to_string(dim) +
                                  " is not divisible by " + std::to_string(heads) +
                                  " heads");
    }
    query_ = Dense(store, prefix + ".query", dim, dim, rng);
    key_ = Dense(store, prefix + ".key", dim, dim, rng);
    value_ = Dense(store, prefix + ".value", dim, dim, rng);
    output_ = Dense(store, prefix + ".output", dim, dim, rng);
  }

  /// When `weights` is non-null it receives the [B, heads, T, T] attention.
  Tensor operator()(const Tensor& x, const Tensor& mask, Tensor* weights = nullptr) const {
    if (x.dim() != 3 || x.shape()[2] != dim_) {
      throw_shape("multi_head_self_attention", x.shape(), Shape{dim_});
    }
    const std::size_t b = x.shape()[0];
    const std::size_t t = x.shape()[1];
    const std::size_t dh = dim_ / heads_;
    if (mask.shape() != Shape{b, t}) {
      throw_shape("multi_head_self_attention", x.shape(), mask.shape());
    }
    auto split = [&](const Tensor& y) {
      return permute(reshape(y, {b, t, heads_, dh}), {0, 2, 1, 3});
    };
    const Tensor q = split(query_(x));
    const Tensor k = split(key_(x));
    const Tensor v = split(value_(x));
    const Tensor scores =
        scale(matmul(q, transpose_last2(k)), 1.0 / std::sqrt(static_cast<double>(dh)));
    const Tensor key_mask = reshape(masked_logits(mask), {b, 1, 1, t});
    const Tensor attn = softmax(scores, -1, &key_mask);
    if (weights != nullptr) *weights = attn;
    const Tensor context =
        reshape(permute(matmul(attn, v), {0, 2, 1, 3}), {b, t, dim_});
    return mul(output_(context), feature_mask(mask));
  }

 private:
  std::size_t dim_ = 0;
  std::size_t heads_ = 1;
  Dense query_, key_, value_, output_;
};

/// Temporal convolution with zero "same" padding over an odd kernel.
class Conv1dSame {
 public:
  Conv1dSame() = default;
  Conv1dSame(ParameterStore& store, const std::string& prefix, std::size_t in_dim,
             std::size_t out_dim, std::size_t kernel, Rng& rng)
      : in_dim_(in_dim), out_dim_(out_dim), kernel_(kernel) {
    if (kernel == 0 || kernel % 2 == 0) {
      throw std::invalid_argument("conv1d: kernel size must be odd, got " +
                                  std::to_string(kernel));
    }
    weight_ = store.create_uniform(prefix + ".weight", {kernel, in_dim, out_dim},
                                   kernel * in_dim, out_dim, rng);
    bias_ = store.create(prefix + ".bias", {out_dim});
  }

  Tensor operator()(const Tensor& x, const Tensor& mask) const {
    if (x.dim() != 3 || x.shape()[2] != in_dim_) throw_shape("conv1d", x.shape(), weight_.shape());
    const std::size_t b = x.shape()[0];
    const std::size_t t = x.shape()[1];
    if (mask.shape() != Shape{b, t}) throw_shape("conv1d", x.shape(), mask.shape());
    const std::size_t r = kernel_ / 2;
    const Tensor fm = feature_mask(mask);
    const Tensor edge(Shape{b, r, in_dim_});
    const Tensor padded = r > 0 ? concat({edge, mul(x, fm), edge}, 1) : mul(x, fm);
    std::vector<Tensor> taps;
    taps.reserve(kernel_);
    for (std::size_t k = 0; k < kernel_; ++k) taps.push_back(slice(padded, 1, k, k + t));
    const Tensor columns = kernel_ > 1 ? concat(taps, 2) : taps[0];  // [B,T,K*in]
    const Tensor y = add(matmul(columns, reshape(weight_, {kernel_ * in_dim_, out_dim_})), bias_);
    return mul(y, fm);
  }

  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  std::size_t in_dim_ = 0;
  std::size_t out_dim_ = 0;
  std::size_t kernel_ = 1;
  Tensor weight_;
  Tensor bias_;
};

struct PooledRows {
  Tensor rows;     // [..., K, d], row i rescaled by weights_i
  Tensor weights;  // [..., K, 1]
};

/**
 * Attention pooling that keeps the row structure: energies
 * e_i = q . tanh(W S_i + b) are softmax-normalized over the K rows and each
 * row is rescaled by its weight.
 */
class AttentionPooling {
 public:
  AttentionPooling() = default;
  AttentionPooling(ParameterStore& store, const std::string& prefix, std::size_t dim,
                   Rng& rng)
      : dim_(dim) {
    proj_ = Dense(store, prefix + ".proj", dim, dim, rng, Activation::kTanh);
    query_ = store.create_uniform(prefix + ".query", {dim}, dim, 1, rng);
  }

  PooledRows operator()(const Tensor& rows) const {
    if (rows.dim() < 2 || rows.shape().back() != dim_) {
      throw_shape("attention_pooling", rows.shape(), Shape{dim_});
    }
    const Tensor energies = matmul(proj_(rows), reshape(query_, {dim_, 1}));
    const Tensor weights = softmax(energies, -2);
    return {mul(rows, weights), weights};
  }

  const Tensor& query() const { return query_; }
  const Dense& projection() const { return proj_; }

 private:
  std::size_t dim_ = 0;
  Dense proj_;
  Tensor query_;
};

}  // namespace hipama
