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
#include <string>
#include <utility>
#include <vector>

#include "posegen/autograd.hpp"
#include "posegen/checkpoint.hpp"
#include "posegen/rng.hpp"

namespace posegen {

template <std::floating_point T>
struct NamedParameter {
  std::string name;
  Var<T> var;
};

/// Ordered, named view over a model's trainable leaves.
template <std::floating_point T>
class ParameterList {
 public:
  Var<T> add(std::string name, Tensor<T> init) {
    auto v = make_parameter(std::move(init));
    items_.push_back({std::move(name), v});
    return v;
  }

  const std::vector<NamedParameter<T>>& items() const { return items_; }
  std::size_t count_scalars() const {
    std::size_t n = 0;
    for (const auto& p : items_) n += p.var.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : items_) p.var.node()->value.zero_grad();
  }

  std::vector<NamedTensor> to_checkpoint() const {
    std::vector<NamedTensor> out;
    out.reserve(items_.size());
    for (const auto& p : items_) out.push_back({p.name, p.var.value().template cast<float>()});
    return out;
  }

  /// Copies values by name; every parameter must be present with its exact shape.
  void load(const std::vector<NamedTensor>& tensors) {
    for (auto& p : items_) {
      const auto& src = find_tensor(tensors, p.name);
      if (src.tensor.shape() != p.var.shape()) {
        throw CheckpointError("tensor '" + p.name + "' has shape " + shape_str(src.tensor.shape()) +
                              ", model expects " + shape_str(p.var.shape()));
      }
      auto dst = p.var.node()->value.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(src.tensor[i]);
    }
  }

  /// Copies values from another list with identical names and shapes.
  template <std::floating_point U>
  void copy_from(const ParameterList<U>& other) {
    if (other.items().size() != items_.size()) throw std::invalid_argument("copy_from: parameter count differs");
    for (std::size_t k = 0; k < items_.size(); ++k) {
      auto dst = items_[k].var.node()->value.data();
      auto src = other.items()[k].var.value().data();
      if (dst.size() != src.size() || items_[k].name != other.items()[k].name) {
        throw std::invalid_argument("copy_from: mismatch at " + items_[k].name);
      }
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(src[i]);
    }
  }

 private:
  std::vector<NamedParameter<T>> items_;
};

template <std::floating_point T>
Tensor<T> normal_init(Shape shape, double stddev, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (T& v : t.data()) v = static_cast<T>(rng.normal() * stddev);
  return t;
}

/// Weight for a fan_in x fan_out linear map, N(0, 1/fan_in).
template <std::floating_point T>
Tensor<T> linear_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  return normal_init<T>(Shape{fan_in, fan_out}, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

}  // namespace posegen
