// Copyright 2026 The Posegen Authors.
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
#include <concepts>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "posegen/kernels.hpp"
#include "posegen/tensor.hpp"

namespace posegen {

template <std::floating_point T>
struct Node {
  Tensor<T> value;
  bool requires_grad = false;
  bool leaf = true;
  const char* op = "leaf";
  std::function<void(std::span<const T>, const Tensor<T>&)> backward;
};

/// Shared handle to a graph node. Copies alias the same node.
template <std::floating_point T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  std::span<const T> grad() const { return node_->value.grad(); }
  T item() const { return node_->value.item(); }
  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& handle() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// A trainable leaf. Its gradient accumulates across backward calls.
template <std::floating_point T>
Var<T> make_parameter(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->value.ensure_grad();
  return Var<T>(std::move(n));
}

template <std::floating_point T>
Var<T> make_constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return Var<T>(std::move(n));
}

/**
 * Computation tape for one forward/backward pass.
 *
 * Ops are methods; every op computes its value identically whether or not
 * recording is enabled, and records a backward closure only when recording
 * is on and at least one input requires a gradient. Nodes are appended in
 * creation order, so walking the tape backwards is a reverse topological
 * order.
 */
template <std::floating_point T>
class Graph {
 public:
  using Mask = std::vector<std::uint8_t>;

  explicit Graph(bool record_gradients = true) : record_(record_gradients) {}

  bool recording() const noexcept { return record_; }
  std::size_t tape_size() const noexcept { return tape_.size(); }

  Var<T> constant(Tensor<T> value) const { return make_constant(std::move(value)); }

  /// Populates gradients of everything reachable from a scalar root.
  void backward(const Var<T>& root) {
    if (root.size() != 1) {
      throw std::invalid_argument("backward: root must be scalar, got shape " +
                                  shape_str(root.shape()));
    }
    if (!root.requires_grad()) return;
    for (auto& n : tape_) {
      if (n->value.has_grad()) n->value.zero_grad();
    }
    root.node()->value.ensure_grad()[0] += T{1};
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
      Node<T>& n = **it;
      if (!n.value.has_grad()) continue;
      n.backward(n.value.grad(), n.value);
    }
  }

  // ---------------------------------------------------------------- linear algebra

  /**
   * Matrix product. Supported forms: [M,K]x[K,N], [B,M,K]x[B,K,N] (batched)
   * and [B,M,K]x[K,N] (shared right operand).
   */
  Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    std::size_t batch = 1, m = 0, k = 0, n = 0;
    bool shared_rhs = false;
    if (sa.size() == 2 && sb.size() == 2 && sa[1] == sb[0]) {
      m = sa[0], k = sa[1], n = sb[1];
    } else if (sa.size() == 3 && sb.size() == 3 && sa[0] == sb[0] && sa[2] == sb[1]) {
      batch = sa[0], m = sa[1], k = sa[2], n = sb[2];
    } else if (sa.size() == 3 && sb.size() == 2 && sa[2] == sb[0]) {
      m = sa[0] * sa[1], k = sa[2], n = sb[1];
      shared_rhs = true;
    } else {
      throw shape_error("matmul", sa, sb);
    }
    Shape out_shape = sa.size() == 2 ? Shape{m, n}
                      : shared_rhs   ? Shape{sa[0], sa[1], n}
                                     : Shape{batch, m, n};
    Tensor<T> out(out_shape);
    for (std::size_t bi = 0; bi < batch; ++bi) {
      kernels::gemm_nn(m, k, n, a.value().data().data() + bi * m * k,
                       b.value().data().data() + bi * k * n, out.data().data() + bi * m * n);
    }
    auto an = a.handle(), bn = b.handle();
    return make(std::move(out), "matmul", {a, b}, [an, bn, batch, m, k, n](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
      for (std::size_t bi = 0; bi < batch; ++bi) {
        const T* gp = g.data() + bi * m * n;
        if (an->requires_grad) {
          T* ga = an->value.ensure_grad().data() + bi * m * k;
          kernels::gemm_nt(m, n, k, gp, bn->value.data().data() + bi * k * n, ga);
        }
        if (bn->requires_grad) {
          T* gb = bn->value.ensure_grad().data() + bi * k * n;
          kernels::gemm_tn(m, k, n, an->value.data().data() + bi * m * k, gp, gb);
        }
      }
    });
  }

  /// Swaps the last two dimensions.
  Var<T> transpose(const Var<T>& a) {
    const Shape& s = a.shape();
    if (s.size() < 2) throw std::invalid_argument("op 'transpose': rank must be >= 2, got " + shape_str(s));
    const std::size_t r = s[s.size() - 2], c = s.back();
    const std::size_t batch = a.size() / (r * c);
    Shape os = s;
    std::swap(os[os.size() - 2], os.back());
    Tensor<T> out(os);
    for (std::size_t bi = 0; bi < batch; ++bi)
      kernels::transpose(r, c, a.value().data().data() + bi * r * c, out.data().data() + bi * r * c);
    auto an = a.handle();
    return make(std::move(out), "transpose", {a}, [an, batch, r, c](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
      T* ga = an->value.ensure_grad().data();
      for (std::size_t bi = 0; bi < batch; ++bi)
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) ga[bi * r * c + i * c + j] += g[bi * r * c + j * r + i];
    });
  }

  // ---------------------------------------------------------------- elementwise binary

  Var<T> add(const Var<T>& a, const Var<T>& b) {
    return binary("add", a, b, [](T x, T y) { return x + y; },
                  [](T, T) { return T{1}; }, [](T, T) { return T{1}; });
  }
  Var<T> sub(const Var<T>& a, const Var<T>& b) {
    return binary("sub", a, b, [](T x, T y) { return x - y; },
                  [](T, T) { return T{1}; }, [](T, T) { return T{-1}; });
  }
  Var<T> mul(const Var<T>& a, const Var<T>& b) {
    return binary("mul", a, b, [](T x, T y) { return x * y; },
                  [](T, T y) { return y; }, [](T x, T) { return x; });
  }
  Var<T> div(const Var<T>& a, const Var<T>& b) {
    return binary("div", a, b, [](T x, T y) { return x / y; },
                  [](T, T y) { return T{1} / y; }, [](T x, T y) { return -x / (y * y); });
  }

  Var<T> scale(const Var<T>& a, T c) {
    return unary("scale", a, [c](T x) { return c * x; }, [c](T, T) { return c; });
  }
  Var<T> add_scalar(const Var<T>& a, T c) {
    return unary("add_scalar", a, [c](T x) { return x + c; }, [](T, T) { return T{1}; });
  }

  // ---------------------------------------------------------------- elementwise unary

  Var<T> exp(const Var<T>& a) {
    return unary("exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
  }
  Var<T> log(const Var<T>& a) {
    return unary("log", a, [](T x) { return std::log(x); }, [](T x, T) { return T{1} / x; });
  }
  Var<T> sqrt(const Var<T>& a) {
    return unary("sqrt", a, [](T x) { return std::sqrt(x); },
                 [](T, T y) { return T{0.5} / y; });
  }
  Var<T> sigmoid(const Var<T>& a) {
    return unary("sigmoid", a, [](T x) { return kernels::sigmoid(x); },
                 [](T, T y) { return y * (T{1} - y); });
  }
  Var<T> softplus(const Var<T>& a) {
    return unary("softplus", a, [](T x) { return kernels::softplus(x); },
                 [](T x, T) { return kernels::sigmoid(x); });
  }
  Var<T> tanh(const Var<T>& a) {
    return unary("tanh", a, [](T x) { return std::tanh(x); },
                 [](T, T y) { return T{1} - y * y; });
  }
  Var<T> gelu(const Var<T>& a) {
    return unary("gelu", a, [](T x) { return kernels::gelu(x); },
                 [](T x, T) { return kernels::gelu_grad(x); });
  }

  // ---------------------------------------------------------------- last-axis row ops

  Var<T> softmax(const Var<T>& a) {
    const std::size_t d = last_dim("softmax", a);
    Tensor<T> out = a.value();
    for (std::size_t r = 0; r < out.size() / d; ++r) kernels::softmax_row(out.data().subspan(r * d, d));
    auto an = a.handle();
    return make(std::move(out), "softmax", {a}, [an, d](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
      T* ga = an->value.ensure_grad().data();
      const T* y = y_out.data().data();
      for (std::size_t r = 0; r < y_out.size() / d; ++r) {
        T dot{0};
        for (std::size_t j = 0; j < d; ++j) dot += g[r * d + j] * y[r * d + j];
        for (std::size_t j = 0; j < d; ++j) ga[r * d + j] += y[r * d + j] * (g[r * d + j] - dot);
      }
    });
  }

  Var<T> log_softmax(const Var<T>& a) {
    const std::size_t d = last_dim("log_softmax", a);
    Tensor<T> out = a.value();
    for (std::size_t r = 0; r < out.size() / d; ++r) {
      auto row = out.data().subspan(r * d, d);
      const T lse = kernels::logsumexp<T>(row);
      for (T& v : row) v -= lse;
    }
    auto an = a.handle();
    return make(std::move(out), "log_softmax", {a}, [an, d](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
      T* ga = an->value.ensure_grad().data();
      const T* y = y_out.data().data();
      for (std::size_t r = 0; r < y_out.size() / d; ++r) {
        T gsum{0};
        for (std::size_t j = 0; j < d; ++j) gsum += g[r * d + j];
        for (std::size_t j = 0; j < d; ++j) ga[r * d + j] += g[r * d + j] - std::exp(y[r * d + j]) * gsum;
      }
    });
  }

  /// log(sum(exp(.))) over the last axis; output drops that axis.
  Var<T> logsumexp(const Var<T>& a) {
    const std::size_t d = last_dim("logsumexp", a);
    const std::size_t rows = a.size() / d;
    Tensor<T> out(reduced_shape(a.shape()));
    for (std::size_t r = 0; r < rows; ++r) out[r] = kernels::logsumexp<T>(a.value().data().subspan(r * d, d));
    auto an = a.handle();
    return make(std::move(out), "logsumexp", {a}, [an, d, rows](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
      T* ga = an->value.ensure_grad().data();
      const T* x = an->value.data().data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) ga[r * d + j] += g[r] * std::exp(x[r * d + j] - y_out[r]);
    });
  }

  Var<T> sum_last(const Var<T>& a) { return reduce_last("sum_last", a, T{1}); }
  Var<T> mean_last(const Var<T>& a) {
    const std::size_t d = last_dim("mean_last", a);
    return reduce_last("mean_last", a, T{1} / static_cast<T>(d));
  }

  Var<T> sum(const Var<T>& a) { return reduce_all("sum", a, T{1}); }
  Var<T> mean(const Var<T>& a) {
    if (a.size() == 0) throw std::invalid_argument("op 'mean': empty tensor");
    return reduce_all("mean", a, T{1} / static_cast<T>(a.size()));
  }

  Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T{1e-5}) {
    const std::size_t d = last_dim("layer_norm", x);
    if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
      throw shape_error("layer_norm", x.shape(), gamma.shape());
    }
    const std::size_t rows = x.size() / d;
    Tensor<T> out(x.shape());
    auto xhat = std::make_shared<std::vector<T>>(x.size());
    auto inv_std = std::make_shared<std::vector<T>>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      kernels::layer_norm_row<T>(x.value().data().subspan(r * d, d), gamma.value().data(),
                                 beta.value().data(), eps, out.data().subspan(r * d, d),
                                 xhat->data() + r * d, inv_std->data() + r);
    }
    auto xn = x.handle(), gn = gamma.handle(), bn = beta.handle();
    return make(std::move(out), "layer_norm", {x, gamma, beta},
                [xn, gn, bn, xhat, inv_std, d, rows](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
                  if (gn->requires_grad || bn->requires_grad) {
                    T* gg = gn->requires_grad ? gn->value.ensure_grad().data() : nullptr;
                    T* gb = bn->requires_grad ? bn->value.ensure_grad().data() : nullptr;
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < d; ++j) {
                        if (gg) gg[j] += g[r * d + j] * (*xhat)[r * d + j];
                        if (gb) gb[j] += g[r * d + j];
                      }
                  }
                  if (xn->requires_grad) {
                    auto gx = xn->value.ensure_grad();
                    for (std::size_t r = 0; r < rows; ++r) {
                      kernels::layer_norm_row_backward<T>(
                          g.subspan(r * d, d), std::span<const T>(xhat->data() + r * d, d),
                          gn->value.data(), (*inv_std)[r], gx.subspan(r * d, d));
                    }
                  }
                });
  }

  /// Scales each last-axis row to unit L2 norm.
  Var<T> l2_normalize(const Var<T>& a, T eps = T{1e-12}) {
    const std::size_t d = last_dim("l2_normalize", a);
    const std::size_t rows = a.size() / d;
    Tensor<T> out(a.shape());
    auto norms = std::make_shared<std::vector<T>>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      T ss{0};
      for (std::size_t j = 0; j < d; ++j) ss += a.value()[r * d + j] * a.value()[r * d + j];
      const T nrm = std::sqrt(ss + eps);
      (*norms)[r] = nrm;
      for (std::size_t j = 0; j < d; ++j) out[r * d + j] = a.value()[r * d + j] / nrm;
    }
    auto an = a.handle();
    return make(std::move(out), "l2_normalize", {a}, [an, norms, d, rows](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
      T* ga = an->value.ensure_grad().data();
      for (std::size_t r = 0; r < rows; ++r) {
        T dot{0};
        for (std::size_t j = 0; j < d; ++j) dot += g[r * d + j] * y_out[r * d + j];
        for (std::size_t j = 0; j < d; ++j)
          ga[r * d + j] += (g[r * d + j] - y_out[r * d + j] * dot) / (*norms)[r];
      }
    });
  }

  // ---------------------------------------------------------------- indexing and layout

  Var<T> reshape(const Var<T>& a, Shape shape) {
    if (shape_size(shape) != a.size()) {
      throw std::invalid_argument("op 'reshape': cannot view " + shape_str(a.shape()) + " as " +
                                  shape_str(shape));
    }
    Tensor<T> out(std::move(shape), a.value().storage());
    auto an = a.handle();
    return make(std::move(out), "reshape", {a}, [an](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
      auto ga = an->value.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }

  /// out[..., j] = a[..., indices[j]]
  Var<T> gather_last(const Var<T>& a, std::vector<std::size_t> indices) {
    const std::size_t d = last_dim("gather_last", a);
    for (std::size_t idx : indices) {
      if (idx >= d) {
        throw std::out_of_range("op 'gather_last': index " + std::to_string(idx) +
                                " out of range for shape " + shape_str(a.shape()));
      }
    }
    const std::size_t rows = a.size() / d;
    const std::size_t w = indices.size();
    Shape os = a.shape();
    os.back() = w;
    Tensor<T> out(os);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < w; ++j) out[r * w + j] = a.value()[r * d + indices[j]];
    auto an = a.handle();
    auto idx = std::make_shared<std::vector<std::size_t>>(std::move(indices));
    return make(std::move(out), "gather_last", {a}, [an, idx, d, rows, w](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
      T* ga = an->value.ensure_grad().data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < w; ++j) ga[r * d + (*idx)[j]] += g[r * w + j];
    });
  }

  /// Picks elements by flat index into a tensor of the requested shape.
  Var<T> gather(const Var<T>& a, std::vector<std::size_t> flat_indices, Shape shape) {
    if (shape_size(shape) != flat_indices.size()) {
      throw std::invalid_argument("op 'gather': output shape " + shape_str(shape) + " does not hold " +
                                  std::to_string(flat_indices.size()) + " indices");
    }
    Tensor<T> out(std::move(shape));
    for (std::size_t i = 0; i < flat_indices.size(); ++i) {
      if (flat_indices[i] >= a.size()) {
        throw std::out_of_range("op 'gather': flat index " + std::to_string(flat_indices[i]) +
                                " out of range for shape " + shape_str(a.shape()));
      }
      out[i] = a.value()[flat_indices[i]];
    }
    auto an = a.handle();
    auto idx = std::make_shared<std::vector<std::size_t>>(std::move(flat_indices));
    return make(std::move(out), "gather", {a}, [an, idx](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
      T* ga = an->value.ensure_grad().data();
      for (std::size_t i = 0; i < idx->size(); ++i) ga[(*idx)[i]] += g[i];
    });
  }

  /// Replaces entries where mask != 0 with value. The mask follows the
  /// trailing-broadcast rule against a's shape.
  Var<T> masked_fill(const Var<T>& a, const Mask& mask, const Shape& mask_shape, T value) {
    if (shape_size(mask_shape) != mask.size() || !trailing_broadcastable(a.shape(), mask_shape)) {
      throw shape_error("masked_fill", a.shape(), mask_shape);
    }
    const std::size_t nm = mask.size();
    Tensor<T> out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i)
      if (mask[i % nm]) out[i] = value;
    auto an = a.handle();
    auto mk = std::make_shared<Mask>(mask);
    return make(std::move(out), "masked_fill", {a}, [an, mk, nm](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
      T* ga = an->value.ensure_grad().data();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!(*mk)[i % nm]) ga[i] += g[i];
    });
  }

  /// [B*S, H*Dh] -> [B*H, S, Dh]
  Var<T> split_heads(const Var<T>& a, std::size_t batch, std::size_t heads) {
    const Shape& s = a.shape();
    if (s.size() != 2 || batch == 0 || heads == 0 || s[0] % batch != 0 || s[1] % heads != 0) {
      throw std::invalid_argument("op 'split_heads': cannot split " + shape_str(s) + " into " +
                                  std::to_string(batch) + " sequences x " + std::to_string(heads) +
                                  " heads");
    }
    const std::size_t seq = s[0] / batch, dh = s[1] / heads, width = s[1];
    Tensor<T> out(Shape{batch * heads, seq, dh});
    auto src = [=](std::size_t b, std::size_t h, std::size_t t, std::size_t j) {
      return (b * seq + t) * width + h * dh + j;
    };
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t t = 0; t < seq; ++t)
          for (std::size_t j = 0; j < dh; ++j)
            out[((b * heads + h) * seq + t) * dh + j] = a.value()[src(b, h, t, j)];
    auto an = a.handle();
    return make(std::move(out), "split_heads", {a}, [an, batch, heads, seq, dh, src](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
      T* ga = an->value.ensure_grad().data();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t t = 0; t < seq; ++t)
            for (std::size_t j = 0; j < dh; ++j)
              ga[src(b, h, t, j)] += g[((b * heads + h) * seq + t) * dh + j];
    });
  }

  /// [B*H, S, Dh] -> [B*S, H*Dh]
  Var<T> merge_heads(const Var<T>& a, std::size_t batch) {
    const Shape& s = a.shape();
    if (s.size() != 3 || batch == 0 || s[0] % batch != 0) {
      throw std::invalid_argument("op 'merge_heads': cannot merge " + shape_str(s) + " for batch " +
                                  std::to_string(batch));
    }
    const std::size_t heads = s[0] / batch, seq = s[1], dh = s[2], width = heads * dh;
    Tensor<T> out(Shape{batch * seq, width});
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t t = 0; t < seq; ++t)
          for (std::size_t j = 0; j < dh; ++j)
            out[(b * seq + t) * width + h * dh + j] = a.value()[((b * heads + h) * seq + t) * dh + j];
    auto an = a.handle();
    return make(std::move(out), "merge_heads", {a}, [an, batch, heads, seq, dh, width](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
      T* ga = an->value.ensure_grad().data();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t t = 0; t < seq; ++t)
            for (std::size_t j = 0; j < dh; ++j)
              ga[((b * heads + h) * seq + t) * dh + j] += g[(b * seq + t) * width + h * dh + j];
    });
  }

 private:
  using BackFn = std::function<void(std::span<const T>, const Tensor<T>&)>;

  Var<T> make(Tensor<T> value, const char* op, std::initializer_list<Var<T>> inputs, BackFn fn) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->op = op;
    n->leaf = false;
    bool needs = false;
    for (const auto& in : inputs) needs = needs || in.requires_grad();
    if (record_ && needs) {
      n->requires_grad = true;
      n->backward = std::move(fn);
      tape_.push_back(n);
    }
    return Var<T>(std::move(n));
  }

  static std::invalid_argument shape_error(const char* op, const Shape& a, const Shape& b) {
    return std::invalid_argument(std::string("op '") + op + "': incompatible shapes " + shape_str(a) +
                                 " and " + shape_str(b) +
                                 " (only equal, scalar, or trailing-suffix shapes broadcast)");
  }

  static std::size_t last_dim(const char* op, const Var<T>& a) {
    if (a.shape().empty() || a.shape().back() == 0) {
      throw std::invalid_argument(std::string("op '") + op + "': needs a non-empty last axis, got " +
                                  shape_str(a.shape()));
    }
    return a.shape().back();
  }

  static Shape reduced_shape(const Shape& s) {
    Shape out(s.begin(), s.end() - 1);
    if (out.empty()) out.push_back(1);
    return out;
  }

  template <class Fwd, class Da, class Db>
  Var<T> binary(const char* op, const Var<T>& a, const Var<T>& b, Fwd f, Da da, Db db) {
    if (!trailing_broadcastable(a.shape(), b.shape())) throw shape_error(op, a.shape(), b.shape());
    const std::size_t nb = b.size();
    Tensor<T> out(a.shape());
    const T* x = a.value().data().data();
    const T* y = b.value().data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i], y[i % nb]);
    auto an = a.handle(), bn = b.handle();
    return make(std::move(out), op, {a, b}, [an, bn, nb, da, db](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
      const T* x = an->value.data().data();
      const T* y = bn->value.data().data();
      if (an->requires_grad) {
        T* ga = an->value.ensure_grad().data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(x[i], y[i % nb]);
      }
      if (bn->requires_grad) {
        T* gb = bn->value.ensure_grad().data();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % nb] += g[i] * db(x[i], y[i % nb]);
      }
    });
  }

  /// dfdx receives (input, output).
  template <class Fwd, class Dfdx>
  Var<T> unary(const char* op, const Var<T>& a, Fwd f, Dfdx dfdx) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.value()[i]);
    auto an = a.handle();
    return make(std::move(out), op, {a}, [an, dfdx](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
      T* ga = an->value.ensure_grad().data();
      const T* x = an->value.data().data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(x[i], y_out[i]);
    });
  }

  Var<T> reduce_last(const char* op, const Var<T>& a, T factor) {
    const std::size_t d = last_dim(op, a);
    const std::size_t rows = a.size() / d;
    Tensor<T> out(reduced_shape(a.shape()));
    for (std::size_t r = 0; r < rows; ++r) {
      T s{0};
      for (std::size_t j = 0; j < d; ++j) s += a.value()[r * d + j];
      out[r] = s * factor;
    }
    auto an = a.handle();
    return make(std::move(out), op, {a}, [an, d, rows, factor](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
      T* ga = an->value.ensure_grad().data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) ga[r * d + j] += g[r] * factor;
    });
  }

  Var<T> reduce_all(const char* op, const Var<T>& a, T factor) {
    T s{0};
    for (T v : a.value().data()) s += v;
    auto an = a.handle();
    return make(Tensor<T>::scalar(s * factor), op, {a}, [an, factor](std::span<const T> g, [[maybe_unused]] const Tensor<T>& y_out) {
      for (T& v : an->value.ensure_grad()) v += g[0] * factor;
    });
  }

  bool record_;
  std::vector<std::shared_ptr<Node<T>>> tape_;
};

}  // namespace posegen
