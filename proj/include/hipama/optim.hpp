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

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hipama/random.hpp"
#include "hipama/tensor.hpp"

namespace hipama {

struct Parameter {
  std::string name;
  Tensor tensor;
};

/// Ordered, name-unique collection of trainable tensors.
class ParameterStore {
 public:
  Tensor create(const std::string& name, Shape shape) {
    if (index_.count(name)) {
      throw std::invalid_argument("duplicate parameter name: " + name);
    }
    index_[name] = params_.size();
    params_.push_back({name, Tensor(std::move(shape), 0.0, true)});
    return params_.back().tensor;
  }

  /// Glorot-uniform matrix in +-sqrt(6 / (fan_in + fan_out)).
  Tensor create_uniform(const std::string& name, Shape shape, std::size_t fan_in,
                        std::size_t fan_out, Rng& rng) {
    Tensor t = create(name, std::move(shape));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.data()) v = rng.uniform(-limit, limit);
    return t;
  }

  const std::vector<Parameter>& params() const { return params_; }
  std::vector<Parameter>& params() { return params_; }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  Tensor& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return params_[it->second].tensor;
  }
  const Tensor& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return params_[it->second].tensor;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.numel();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  AdamState(const ParameterStore& store, AdamOptions options = {})
      : options_(options) {
    for (const auto& p : store.params()) {
      first_.emplace_back(p.tensor.numel(), 0.0);
      second_.emplace_back(p.tensor.numel(), 0.0);
    }
  }

  const AdamOptions& options() const { return options_; }
  std::uint64_t step_count() const { return step_; }
  const std::vector<double>& first_moment(std::size_t i) const { return first_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return second_[i]; }

  /// One bias-corrected Adam update. Gradients are read, not cleared.
  void step(ParameterStore& store) {
    auto& params = store.params();
    if (params.size() != first_.size()) {
      throw std::logic_error("adam: parameter set changed since construction");
    }
    for (const auto& p : params) {
      if (!p.tensor.has_grad()) {
        throw std::logic_error("adam: missing gradient for parameter " + p.name);
      }
    }
    ++step_;
    const double t = static_cast<double>(step_);
    const double bias1 = 1.0 - std::pow(options_.beta1, t);
    const double bias2 = 1.0 - std::pow(options_.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto value = params[i].tensor.data();
      auto grad = params[i].tensor.grad();
      auto& m = first_[i];
      auto& v = second_[i];
      for (std::size_t j = 0; j < value.size(); ++j) {
        const double g = grad[j];
        m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g;
        v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g * g;
        const double m_hat = m[j] / bias1;
        const double v_hat = v[j] / bias2;
        value[j] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
      }
    }
  }

 private:
  AdamOptions options_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

inline void adam_step(ParameterStore& store, AdamState& state) { state.step(store); }

}  // namespace hipama
