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


// Shared helpers for the unit tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "posegen/autograd.hpp"
#include "posegen/rng.hpp"

namespace posegen::testing {

inline Tensor<double> random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal() * scale;
  return t;
}

/**
 * Largest relative error between the tape gradient of a scalar function
 * and central differences, over every element of every input.
 */
inline double max_grad_rel_error(const std::function<Var<double>(Graph<double>&, std::vector<Var<double>>&)>& f,
                                 std::vector<Tensor<double>> inputs, double h = 1e-6) {
  std::vector<Var<double>> vars;
  for (auto& t : inputs) vars.push_back(make_parameter(t));
  Graph<double> g;
  auto y = f(g, vars);
  g.backward(y);
  auto eval = [&](std::size_t k, std::size_t i, double delta) {
    std::vector<Var<double>> c;
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      Tensor<double> t = inputs[j];
      if (j == k) t[i] += delta;
      c.push_back(make_constant(std::move(t)));
    }
    Graph<double> g2(false);
    return f(g2, c).item();
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double fd = (eval(k, i, h) - eval(k, i, -h)) / (2 * h);
      const double ad = vars[k].grad()[i];
      worst = std::max(worst, std::abs(ad - fd) / std::max(1e-6, std::abs(fd)));
    }
  return worst;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("posegen_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace posegen::testing
