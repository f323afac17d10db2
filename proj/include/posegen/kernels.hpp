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

// Raw numeric kernels shared by the autograd ops and the cached inference
// path. Everything here works on flat row-major spans.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace posegen::kernels {

template <class T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using ConstView = Eigen::Map<const RowMajor<T>>;
template <class T>
using View = Eigen::Map<RowMajor<T>>;

/// c[m,n] += a[m,k] * b[k,n]
template <class T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k), N = static_cast<Eigen::Index>(n);
  View<T>(c, M, N).noalias() += ConstView<T>(a, M, K) * ConstView<T>(b, K, N);
}

/// c[k,n] += a[m,k]^T * d[m,n]
template <class T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* d, T* c) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k), N = static_cast<Eigen::Index>(n);
  View<T>(c, K, N).noalias() += ConstView<T>(a, M, K).transpose() * ConstView<T>(d, M, N);
}

/// out[cols,rows] = in[rows,cols]^T
template <class T>
void transpose(std::size_t rows, std::size_t cols, const T* in, T* out) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = in[i * cols + j];
}

/// c[m,n] += a[m,k] * b[n,k]^T
template <class T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  const auto M = static_cast<Eigen::Index>(m), K = static_cast<Eigen::Index>(k), N = static_cast<Eigen::Index>(n);
  View<T>(c, M, N).noalias() += ConstView<T>(a, M, K) * ConstView<T>(b, N, K).transpose();
}

template <class T>
T sigmoid(T x) {
  if (x >= T{0}) {
    const T e = std::exp(-x);
    return T{1} / (T{1} + e);
  }
  const T e = std::exp(x);
  return e / (T{1} + e);
}

/// log(1 + exp(x)) without overflow.
template <class T>
T softplus(T x) {
  return std::max(x, T{0}) + std::log1p(std::exp(-std::abs(x)));
}

template <class T>
constexpr T kGeluC = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
template <class T>
constexpr T kGeluA = static_cast<T>(0.044715);

/// tanh-approximation GELU.
template <class T>
T gelu(T x) {
  const T u = kGeluC<T> * (x + kGeluA<T> * x * x * x);
  return T{0.5} * x * (T{1} + std::tanh(u));
}

template <class T>
T gelu_grad(T x) {
  const T u = kGeluC<T> * (x + kGeluA<T> * x * x * x);
  const T t = std::tanh(u);
  const T du = kGeluC<T> * (T{1} + T{3} * kGeluA<T> * x * x);
  return T{0.5} * (T{1} + t) + T{0.5} * x * (T{1} - t * t) * du;
}

/// In-place numerically stable softmax of one row.
template <class T>
void softmax_row(std::span<T> row) {
  T mx = -std::numeric_limits<T>::infinity();
  for (T v : row) mx = std::max(mx, v);
  if (!std::isfinite(mx)) {
    // Every entry is -inf: no mass anywhere. Propagate NaN rather than guess.
    std::fill(row.begin(), row.end(), std::numeric_limits<T>::quiet_NaN());
    return;
  }
  T sum{0};
  for (T& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (T& v : row) v /= sum;
}

template <class T>
T logsumexp(std::span<const T> row) {
  T mx = -std::numeric_limits<T>::infinity();
  for (T v : row) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  T sum{0};
  for (T v : row) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

/// y = (x - mean) / sqrt(var + eps) * gamma + beta for one row. Stores the
/// normalized values and inverse std for the backward pass when requested.
template <class T>
void layer_norm_row(std::span<const T> x, std::span<const T> gamma, std::span<const T> beta,
                    T eps, std::span<T> y, T* xhat_out = nullptr, T* inv_std_out = nullptr) {
  const std::size_t d = x.size();
  T mean{0};
  for (T v : x) mean += v;
  mean /= static_cast<T>(d);
  T var{0};
  for (T v : x) var += (v - mean) * (v - mean);
  var /= static_cast<T>(d);
  const T inv_std = T{1} / std::sqrt(var + eps);
  for (std::size_t j = 0; j < d; ++j) {
    const T xh = (x[j] - mean) * inv_std;
    if (xhat_out) xhat_out[j] = xh;
    y[j] = xh * gamma[j] + beta[j];
  }
  if (inv_std_out) *inv_std_out = inv_std;
}

/// Adds dL/dx for one layer-norm row given dL/dy, xhat and inv_std.
template <class T>
void layer_norm_row_backward(std::span<const T> dy, std::span<const T> xhat,
                             std::span<const T> gamma, T inv_std, std::span<T> dx) {
  const std::size_t d = dy.size();
  T sum_g{0}, sum_gx{0};
  for (std::size_t j = 0; j < d; ++j) {
    const T g = dy[j] * gamma[j];
    sum_g += g;
    sum_gx += g * xhat[j];
  }
  const T inv_d = T{1} / static_cast<T>(d);
  for (std::size_t j = 0; j < d; ++j) {
    const T g = dy[j] * gamma[j];
    dx[j] += inv_std * (g - inv_d * sum_g - xhat[j] * inv_d * sum_gx);
  }
}

}  // namespace posegen::kernels
