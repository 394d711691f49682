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
 * @file tensor.hpp
 * @brief Dense float64 tensors with reverse-mode automatic differentiation.
 *
 * A Tensor is a cheap handle to a graph node. Operations on tensors that
 * require gradients record a backward rule; Tensor::backward() on a scalar
 * walks the graph in reverse topological order and accumulates gradients
 * into every leaf that requires them. Leaf gradients accumulate across
 * backward calls until zero_grad() is called.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace hipama {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t numel_of(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

/// Raised when operand shapes do not conform for a primitive.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

[[noreturn]] inline void throw_shape(const char* op, const Shape& a,
                                     const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) +
                   " and " + shape_str(b));
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool grad_ready = false;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (!grad_ready) {
      grad.assign(data.size(), 0.0);
      grad_ready = true;
    }
  }
};

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    node_->data.assign(numel_of(shape), fill);
    node_->shape = std::move(shape);
    node_->requires_grad = requires_grad;
  }

  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    if (numel_of(shape) != data.size()) {
      throw ShapeError("Tensor: shape " + shape_str(shape) + " needs " +
                       std::to_string(numel_of(shape)) + " values, got " +
                       std::to_string(data.size()));
    }
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }

  std::size_t size(int axis) const {
    const int d = static_cast<int>(dim());
    if (axis < 0) axis += d;
    if (axis < 0 || axis >= d) {
      throw ShapeError("size: axis out of range for shape " + shape_str(shape()));
    }
    return node_->shape[static_cast<std::size_t>(axis)];
  }

  std::span<double> data() { return node_->data; }
  std::span<const double> data() const { return node_->data; }
  const std::vector<double>& values() const { return node_->data; }

  bool has_grad() const { return node_->grad_ready; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  double item() const {
    if (numel() != 1) {
      throw ShapeError("item: tensor of shape " + shape_str(shape()) +
                       " is not a scalar");
    }
    return node_->data[0];
  }

  double at(std::initializer_list<std::size_t> index) const {
    return node_->data[flat_index(index)];
  }
  double& at(std::initializer_list<std::size_t> index) {
    return node_->data[flat_index(index)];
  }

  void zero_grad() {
    node_->grad.assign(node_->data.size(), 0.0);
    node_->grad_ready = true;
  }

  /// Copy of the values with no graph history.
  Tensor detach() const { return Tensor(shape(), node_->data, false); }

  void backward() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  static Tensor from_node(std::shared_ptr<detail::Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::size_t flat_index(std::initializer_list<std::size_t> index) const {
    if (index.size() != dim()) {
      throw ShapeError("at: index rank does not match shape " +
                       shape_str(shape()));
    }
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
      if (i >= node_->shape[axis]) {
        throw std::out_of_range("at: index out of range for shape " +
                                shape_str(shape()));
      }
      flat = flat * node_->shape[axis] + i;
      ++axis;
    }
    return flat;
  }

  std::shared_ptr<detail::Node> node_;
};

namespace detail {

/// Builds an op result; the backward rule is attached only when grad mode is
/// on and some input requires grad.
inline Tensor make_result(Shape shape, std::vector<double> data,
                          std::initializer_list<const Tensor*> inputs,
                          std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool needs = false;
  if (grad_mode()) {
    for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const Tensor* t : inputs) node->parents.push_back(t->node_ptr());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor::from_node(std::move(node));
}

inline Tensor make_result(Shape shape, std::vector<double> data,
                          const std::vector<Tensor>& inputs,
                          std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool needs = false;
  if (grad_mode()) {
    for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const Tensor& t : inputs) node->parents.push_back(t.node_ptr());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor::from_node(std::move(node));
}

inline std::size_t norm_axis(int axis, std::size_t rank, const char* op) {
  const int r = static_cast<int>(rank);
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(axis);
}

// outer x axis x inner decomposition used by axis-wise ops.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

inline AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) throw_shape(op, a, b);
    out[i] = da == 1 ? db : da;
  }
  return out;
}

// For every flat index of `out`, the flat index of the broadcast source.
inline std::vector<std::size_t> broadcast_index(const Shape& in,
                                                const Shape& out) {
  const std::size_t rank = out.size();
  const std::size_t offset = rank - in.size();
  std::vector<std::size_t> stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    stride[i + offset] = in[i] == 1 ? 0 : s;
    s *= in[i];
  }
  const std::size_t n = numel_of(out);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    map[flat] = src;
    for (std::size_t ax = rank; ax-- > 0;) {
      ++counter[ax];
      src += stride[ax];
      if (counter[ax] < out[ax]) break;
      src -= stride[ax] * counter[ax];
      counter[ax] = 0;
    }
  }
  return map;
}

// C[m,n] += A[m,k] * B[k,n]
inline void gemm_acc(const double* a, const double* b, double* c,
                     std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// dA[m,k] += dC[m,n] * B[k,n]^T
inline void gemm_acc_bt(const double* dc, const double* b, double* da,
                        std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* drow = dc + i * n;
    double* arow = da + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += drow[j] * brow[j];
      arow[p] += s;
    }
  }
}

// dB[k,n] += A[m,k]^T * dC[m,n]
inline void gemm_acc_at(const double* a, const double* dc, double* db,
                        std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* drow = dc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* brow = db + p * n;
      for (std::size_t j = 0; j < n; ++j) brow[j] += av * drow[j];
    }
  }
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return make_result(x.shape(), std::move(out), {&x}, [deriv](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i] * deriv(p.data[i], self.data[i]);
    }
  });
}

enum class BinaryKind { kAdd, kSub, kMul };

inline Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind,
                     const char* op) {
  if (a.shape() == b.shape()) {
    const auto x = a.data();
    const auto y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      switch (kind) {
        case BinaryKind::kAdd: out[i] = x[i] + y[i]; break;
        case BinaryKind::kSub: out[i] = x[i] - y[i]; break;
        case BinaryKind::kMul: out[i] = x[i] * y[i]; break;
      }
    }
    return make_result(a.shape(), std::move(out), {&a, &b}, [kind](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      const std::size_t n = self.grad.size();
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          pa.grad[i] += kind == BinaryKind::kMul ? self.grad[i] * pb.data[i]
                                                 : self.grad[i];
        }
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          switch (kind) {
            case BinaryKind::kAdd: pb.grad[i] += self.grad[i]; break;
            case BinaryKind::kSub: pb.grad[i] -= self.grad[i]; break;
            case BinaryKind::kMul: pb.grad[i] += self.grad[i] * pa.data[i]; break;
          }
        }
      }
    });
  }

  Shape out_shape = broadcast_shape(a.shape(), b.shape(), op);
  auto ia = std::make_shared<std::vector<std::size_t>>(
      broadcast_index(a.shape(), out_shape));
  auto ib = std::make_shared<std::vector<std::size_t>>(
      broadcast_index(b.shape(), out_shape));
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(ia->size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double u = x[(*ia)[i]];
    const double v = y[(*ib)[i]];
    switch (kind) {
      case BinaryKind::kAdd: out[i] = u + v; break;
      case BinaryKind::kSub: out[i] = u - v; break;
      case BinaryKind::kMul: out[i] = u * v; break;
    }
  }
  return make_result(std::move(out_shape), std::move(out), {&a, &b},
                     [kind, ia, ib](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const std::size_t n = self.grad.size();
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        pa.grad[(*ia)[i]] += kind == BinaryKind::kMul
                                 ? self.grad[i] * pb.data[(*ib)[i]]
                                 : self.grad[i];
      }
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        switch (kind) {
          case BinaryKind::kAdd: pb.grad[(*ib)[i]] += self.grad[i]; break;
          case BinaryKind::kSub: pb.grad[(*ib)[i]] -= self.grad[i]; break;
          case BinaryKind::kMul:
            pb.grad[(*ib)[i]] += self.grad[i] * pa.data[(*ia)[i]];
            break;
        }
      }
    }
  });
}

}  // namespace detail

inline void Tensor::backward() const {
  if (numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     shape_str(shape()));
  }
  if (!requires_grad()) {
    throw std::logic_error("backward: loss does not require grad");
  }
  // Iterative post-order DFS; `order` ends with the root.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  // Interior gradients are recomputed each pass; leaf gradients accumulate.
  for (detail::Node* n : order) {
    if (n->backward_fn) {
      n->grad.assign(n->data.size(), 0.0);
      n->grad_ready = true;
    }
  }
  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

// ---------------------------------------------------------------------------
// Elementwise

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary(a, b, detail::BinaryKind::kAdd, "add");
}
inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary(a, b, detail::BinaryKind::kSub, "sub");
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary(a, b, detail::BinaryKind::kMul, "mul");
}

inline Tensor scale(const Tensor& x, double s) {
  return detail::unary(
      x, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

inline Tensor add_scalar(const Tensor& x, double s) {
  return detail::unary(
      x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor relu(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor exp(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

inline Tensor log(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

inline Tensor square(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

// ---------------------------------------------------------------------------
// Linear algebra

/**
 * Matrix product over the last two axes.
 *
 * Two forms are accepted: `[..., m, k] x [k, n]` (a shared weight applied to
 * every leading row) and `[B..., m, k] x [B..., k, n]` with identical leading
 * axes (batched). A rank-1 left operand `[k]` is treated as a single row.
 */
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.empty() || sb.size() < 2) throw_shape("matmul", sa, sb);
  const std::size_t k = sa.back();

  if (sb.size() == 2) {
    if (sb[0] != k) throw_shape("matmul", sa, sb);
    const std::size_t n = sb[1];
    const std::size_t rows = a.numel() / std::max<std::size_t>(k, 1);
    Shape out_shape(sa.begin(), sa.end() - 1);
    out_shape.push_back(n);
    std::vector<double> out(rows * n, 0.0);
    detail::gemm_acc(a.data().data(), b.data().data(), out.data(), rows, k, n);
    return detail::make_result(std::move(out_shape), std::move(out), {&a, &b},
                               [rows, k, n](detail::Node& self) {
      detail::Node& pa = *self.parents[0];
      detail::Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        detail::gemm_acc_bt(self.grad.data(), pb.data.data(), pa.grad.data(),
                            rows, k, n);
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        detail::gemm_acc_at(pa.data.data(), self.grad.data(), pb.grad.data(),
                            rows, k, n);
      }
    });
  }

  if (sa.size() != sb.size() || sa.size() < 3 ||
      !std::equal(sa.begin(), sa.end() - 2, sb.begin()) || sb[sb.size() - 2] != k) {
    throw_shape("matmul", sa, sb);
  }
  const std::size_t m = sa[sa.size() - 2];
  const std::size_t n = sb.back();
  const std::size_t batch = numel_of(Shape(sa.begin(), sa.end() - 2));
  Shape out_shape(sa.begin(), sa.end() - 1);
  out_shape.push_back(n);
  std::vector<double> out(batch * m * n, 0.0);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    detail::gemm_acc(a.data().data() + bi * m * k, b.data().data() + bi * k * n,
                     out.data() + bi * m * n, m, k, n);
  }
  return detail::make_result(std::move(out_shape), std::move(out), {&a, &b},
                             [batch, m, k, n](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    if (pa.requires_grad) pa.ensure_grad();
    if (pb.requires_grad) pb.ensure_grad();
    for (std::size_t bi = 0; bi < batch; ++bi) {
      const double* dc = self.grad.data() + bi * m * n;
      if (pa.requires_grad) {
        detail::gemm_acc_bt(dc, pb.data.data() + bi * k * n,
                            pa.grad.data() + bi * m * k, m, k, n);
      }
      if (pb.requires_grad) {
        detail::gemm_acc_at(pa.data.data() + bi * m * k, dc,
                            pb.grad.data() + bi * k * n, m, k, n);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum(const Tensor& x, int axis, bool keepdim = false) {
  const std::size_t ax = detail::norm_axis(axis, x.dim(), "sum");
  const auto s = detail::split_at(x.shape(), ax);
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[ax] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(ax));
  }
  std::vector<double> out(s.outer * s.inner, 0.0);
  const auto in = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t l = 0; l < s.len; ++l) {
      const double* src = in.data() + (o * s.len + l) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  return detail::make_result(std::move(out_shape), std::move(out), {&x},
                             [s](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t l = 0; l < s.len; ++l) {
        double* dst = p.grad.data() + (o * s.len + l) * s.inner;
        const double* g = self.grad.data() + o * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] += g[i];
      }
    }
  });
}

inline Tensor mean(const Tensor& x, int axis, bool keepdim = false) {
  const std::size_t ax = detail::norm_axis(axis, x.dim(), "mean");
  const std::size_t len = x.shape()[ax];
  if (len == 0) throw ShapeError("mean: empty axis in shape " + shape_str(x.shape()));
  return scale(sum(x, axis, keepdim), 1.0 / static_cast<double>(len));
}

inline Tensor sum_all(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return detail::make_result(Shape{}, {total}, {&x}, [](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    p.ensure_grad();
    for (double& g : p.grad) g += self.grad[0];
  });
}

inline Tensor mean_all(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean_all: empty tensor");
  return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

// ---------------------------------------------------------------------------
// Softmax

/**
 * Softmax along `axis`. When `mask` is given it is broadcast against `x` and
 * added to the logits before normalization; it never receives gradient. Use
 * -infinity (see masked_logits()) to exclude positions entirely. Every slice
 * must keep at least one finite logit.
 */
inline Tensor softmax(const Tensor& x, int axis, const Tensor* mask = nullptr) {
  const std::size_t ax = detail::norm_axis(axis, x.dim(), "softmax");
  std::vector<double> logits(x.data().begin(), x.data().end());
  if (mask != nullptr) {
    const Shape out = detail::broadcast_shape(x.shape(), mask->shape(), "softmax");
    if (out != x.shape()) throw_shape("softmax", x.shape(), mask->shape());
    const auto idx = detail::broadcast_index(mask->shape(), x.shape());
    const auto m = mask->data();
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += m[idx[i]];
  }
  const auto s = detail::split_at(x.shape(), ax);
  std::vector<double> out(logits.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < s.len; ++l) {
        mx = std::max(mx, logits[base + l * s.inner]);
      }
      double z = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const double e = std::exp(logits[base + l * s.inner] - mx);
        out[base + l * s.inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= z;
    }
  }
  return detail::make_result(x.shape(), std::move(out), {&x},
                             [s](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.len * s.inner + i;
        double dot = 0.0;
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t j = base + l * s.inner;
          dot += self.grad[j] * self.data[j];
        }
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t j = base + l * s.inner;
          p.grad[j] += self.data[j] * (self.grad[j] - dot);
        }
      }
    }
  });
}

/// Converts a 0/1 validity mask into additive logits (0 kept, -inf dropped).
inline Tensor masked_logits(const Tensor& valid) {
  std::vector<double> out(valid.numel());
  const auto v = valid.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = v[i] > 0.5 ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  return Tensor(valid.shape(), std::move(out));
}

// ---------------------------------------------------------------------------
// Shape manipulation

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel()) throw_shape("reshape", x.shape(), shape);
  std::vector<double> out(x.data().begin(), x.data().end());
  return detail::make_result(std::move(shape), std::move(out), {&x},
                             [](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const std::size_t ax = detail::norm_axis(axis, parts[0].dim(), "concat");
  Shape out_shape = parts[0].shape();
  out_shape[ax] = 0;
  for (const Tensor& t : parts) {
    Shape probe = t.shape();
    if (probe.size() != out_shape.size()) throw_shape("concat", parts[0].shape(), probe);
    probe[ax] = 0;
    Shape ref = parts[0].shape();
    ref[ax] = 0;
    if (probe != ref) throw_shape("concat", parts[0].shape(), t.shape());
    out_shape[ax] += t.shape()[ax];
  }
  const auto s = detail::split_at(out_shape, ax);
  std::vector<std::size_t> lens;
  for (const Tensor& t : parts) lens.push_back(t.shape()[ax]);
  std::vector<double> out(numel_of(out_shape));
  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const auto src = parts[pi].data();
    const std::size_t chunk = lens[pi] * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(src.data() + o * chunk, chunk,
                  out.data() + o * s.len * s.inner + offset * s.inner);
    }
    offset += lens[pi];
  }
  return detail::make_result(std::move(out_shape), std::move(out), parts,
                             [s, lens](detail::Node& self) {
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < lens.size(); ++pi) {
      detail::Node& p = *self.parents[pi];
      const std::size_t chunk = lens[pi] * s.inner;
      if (p.requires_grad) {
        p.ensure_grad();
        for (std::size_t o = 0; o < s.outer; ++o) {
          const double* g = self.grad.data() + o * s.len * s.inner + off * s.inner;
          double* dst = p.grad.data() + o * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[i];
        }
      }
      off += lens[pi];
    }
  });
}

/// Elements [begin, end) along `axis`.
inline Tensor slice(const Tensor& x, int axis, std::size_t begin, std::size_t end) {
  const std::size_t ax = detail::norm_axis(axis, x.dim(), "slice");
  if (begin > end || end > x.shape()[ax]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") out of bounds for shape " +
                     shape_str(x.shape()));
  }
  const auto s = detail::split_at(x.shape(), ax);
  Shape out_shape = x.shape();
  out_shape[ax] = end - begin;
  const std::size_t chunk = (end - begin) * s.inner;
  std::vector<double> out(s.outer * chunk);
  const auto in = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(in.data() + (o * s.len + begin) * s.inner, chunk,
                out.data() + o * chunk);
  }
  return detail::make_result(std::move(out_shape), std::move(out), {&x},
                             [s, begin, chunk](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      double* dst = p.grad.data() + (o * s.len + begin) * s.inner;
      const double* g = self.grad.data() + o * chunk;
      for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[i];
    }
  });
}

/// General axis permutation: result axis i is input axis `axes[i]`.
inline Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const Shape& in = x.shape();
  if (axes.size() != in.size()) throw ShapeError("permute: axes rank mismatch");
  std::vector<bool> seen(in.size(), false);
  Shape out_shape(in.size());
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i] >= in.size() || seen[axes[i]]) {
      throw ShapeError("permute: invalid axes for shape " + shape_str(in));
    }
    seen[axes[i]] = true;
    out_shape[i] = in[axes[i]];
  }
  std::vector<std::size_t> in_stride(in.size(), 1);
  for (std::size_t i = in.size(); i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
  // Source index for each output position.
  const std::size_t n = x.numel();
  auto map = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> counter(in.size(), 0);
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    (*map)[flat] = src;
    for (std::size_t ax = out_shape.size(); ax-- > 0;) {
      ++counter[ax];
      src += in_stride[axes[ax]];
      if (counter[ax] < out_shape[ax]) break;
      src -= in_stride[axes[ax]] * counter[ax];
      counter[ax] = 0;
    }
  }
  std::vector<double> out(n);
  const auto d = x.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = d[(*map)[i]];
  return detail::make_result(std::move(out_shape), std::move(out), {&x},
                             [map](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[(*map)[i]] += self.grad[i];
  });
}

inline Tensor transpose_last2(const Tensor& x) {
  if (x.dim() < 2) throw ShapeError("transpose_last2: rank < 2 for " + shape_str(x.shape()));
  std::vector<std::size_t> axes(x.dim());
  std::iota(axes.begin(), axes.end(), std::size_t{0});
  std::swap(axes[axes.size() - 1], axes[axes.size() - 2]);
  return permute(x, axes);
}

/**
 * Row lookup: `ids` (laid out with `ids_shape`) index rows of `table`
 * `[rows, d]`. The id `rows` is the padding id and yields a zero row.
 */
inline Tensor embedding(const Tensor& table, std::span<const int> ids,
                        const Shape& ids_shape) {
  if (table.dim() != 2) throw ShapeError("embedding: table must be 2-D, got " + shape_str(table.shape()));
  if (numel_of(ids_shape) != ids.size()) throw ShapeError("embedding: ids do not match ids_shape");
  const std::size_t rows = table.shape()[0];
  const std::size_t d = table.shape()[1];
  auto idv = std::make_shared<std::vector<int>>(ids.begin(), ids.end());
  for (int id : *idv) {
    if (id < 0 || static_cast<std::size_t>(id) > rows) {
      throw std::out_of_range("embedding: id " + std::to_string(id) +
                              " outside [0, " + std::to_string(rows) + "]");
    }
  }
  Shape out_shape = ids_shape;
  out_shape.push_back(d);
  std::vector<double> out(ids.size() * d, 0.0);
  const auto t = table.data();
  for (std::size_t i = 0; i < idv->size(); ++i) {
    const auto id = static_cast<std::size_t>((*idv)[i]);
    if (id == rows) continue;
    std::copy_n(t.data() + id * d, d, out.data() + i * d);
  }
  return detail::make_result(std::move(out_shape), std::move(out), {&table},
                             [idv, rows, d](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < idv->size(); ++i) {
      const auto id = static_cast<std::size_t>((*idv)[i]);
      if (id == rows) continue;
      for (std::size_t j = 0; j < d; ++j) p.grad[id * d + j] += self.grad[i * d + j];
    }
  });
}

}  // namespace hipama
