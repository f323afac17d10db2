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

// Diagonal-covariance Gaussian mixtures: the 2-D next-keypoint head model
// and a 1-D variant used by the tempered-sampling demos.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "posegen/autograd.hpp"
#include "posegen/kernels.hpp"
#include "posegen/rng.hpp"

namespace posegen {

using Point2 = std::array<double, 2>;

inline constexpr double kScaleFloor = 1e-3;
inline constexpr std::size_t kDefaultMixtures = 6;
inline const double kLog2Pi = std::log(2.0 * std::numbers::pi);

/// Width of the raw head block for K components: K logits, 2K means, 2K scales.
constexpr std::size_t gmm_raw_width(std::size_t k) { return 5 * k; }

/**
 * Parameters of a K-component 2-D mixture with diagonal covariance.
 *
 * Raw layout consumed by from_raw: [logit_0..logit_{K-1} | mx_0, my_0, ... |
 * sx_0, sy_0, ...]. Weights are the softmax of the logits; scales are
 * softplus(pre) + kScaleFloor.
 */
struct GmmParams {
  std::vector<double> weights;
  std::vector<Point2> means;
  std::vector<Point2> scales;

  std::size_t k() const { return weights.size(); }

  void validate() const {
    if (weights.empty() || means.size() != weights.size() || scales.size() != weights.size()) {
      throw std::invalid_argument("GmmParams: inconsistent component counts");
    }
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("GmmParams: negative weight");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("GmmParams: weights must sum to 1");
    for (const auto& s : scales)
      if (!(s[0] > 0.0 && s[1] > 0.0)) throw std::invalid_argument("GmmParams: scales must be positive");
  }
};

inline GmmParams gmm_from_raw(std::span<const double> raw, std::size_t k) {
  if (k == 0 || raw.size() != gmm_raw_width(k)) {
    throw std::invalid_argument("gmm_from_raw: expected " + std::to_string(gmm_raw_width(k)) +
                                " raw values for K=" + std::to_string(k) + ", got " + std::to_string(raw.size()));
  }
  GmmParams p;
  p.weights.assign(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(k));
  kernels::softmax_row<double>(p.weights);
  p.means.resize(k);
  p.scales.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t a = 0; a < 2; ++a) {
      p.means[c][a] = raw[k + 2 * c + a];
      p.scales[c][a] = kernels::softplus(raw[3 * k + 2 * c + a]) + kScaleFloor;
    }
  }
  return p;
}

/// log sum_k w_k N(point; mu_k, diag(sigma_k^2)), via log-sum-exp.
inline double gmm_log_density(const GmmParams& p, Point2 point) {
  double mx = -std::numeric_limits<double>::infinity();
  thread_local std::vector<double> terms;
  terms.resize(p.k());
  for (std::size_t c = 0; c < p.k(); ++c) {
    double t = std::log(p.weights[c]) - kLog2Pi;
    for (std::size_t a = 0; a < 2; ++a) {
      const double z = (point[a] - p.means[c][a]) / p.scales[c][a];
      t -= 0.5 * z * z + std::log(p.scales[c][a]);
    }
    terms[c] = t;
    mx = std::max(mx, t);
  }
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

/// Ancestral draw: component ~ Categorical(weights), then independent normals.
inline Point2 gmm_sample(const GmmParams& p, Rng& rng) {
  const std::size_t c = rng.categorical(p.weights);
  return {rng.normal(p.means[c][0], p.scales[c][0]), rng.normal(p.means[c][1], p.scales[c][1])};
}

/// Distribution adaptor over GmmParams for the tempered sampler.
struct Gmm2d {
  GmmParams params;

  Point2 sample(Rng& rng) const { return gmm_sample(params, rng); }
  double log_density(Point2 x) const { return gmm_log_density(params, x); }
};

/// 1-D mixture used by the tempered-sampling fixtures and demo.
struct Gmm1d {
  std::vector<double> weights, means, sigmas;

  void validate() const {
    if (weights.empty() || means.size() != weights.size() || sigmas.size() != weights.size()) {
      throw std::invalid_argument("Gmm1d: weights, means and sigmas must have equal non-zero length");
    }
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("Gmm1d: negative weight");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("Gmm1d: weights must sum to 1");
    for (double s : sigmas)
      if (!(s > 0.0)) throw std::invalid_argument("Gmm1d: sigmas must be positive");
  }

  double sample(Rng& rng) const {
    const std::size_t c = rng.categorical(weights);
    return rng.normal(means[c], sigmas[c]);
  }

  double log_density(double x) const {
    double mx = -std::numeric_limits<double>::infinity();
    std::array<double, 16> small{};
    std::vector<double> big;
    double* t = small.data();
    if (weights.size() > small.size()) {
      big.resize(weights.size());
      t = big.data();
    }
    for (std::size_t c = 0; c < weights.size(); ++c) {
      const double z = (x - means[c]) / sigmas[c];
      t[c] = weights[c] > 0.0 ? std::log(weights[c]) - 0.5 * z * z - std::log(sigmas[c]) - 0.5 * kLog2Pi
                              : -std::numeric_limits<double>::infinity();
      mx = std::max(mx, t[c]);
    }
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (std::size_t c = 0; c < weights.size(); ++c) s += std::exp(t[c] - mx);
    return mx + std::log(s);
  }

  /// d/dx log p(x).
  double score(double x) const {
    const double lp = log_density(x);
    double num = 0.0;
    for (std::size_t c = 0; c < weights.size(); ++c) {
      const double z = (x - means[c]) / sigmas[c];
      const double lc = std::log(weights[c]) - 0.5 * z * z - std::log(sigmas[c]) - 0.5 * kLog2Pi;
      num += std::exp(lc - lp) * (-z / sigmas[c]);
    }
    return num;
  }

  double cdf(double x) const {
    double c = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i)
      c += weights[i] * 0.5 * std::erfc(-(x - means[i]) / (sigmas[i] * std::numbers::sqrt2));
    return c;
  }
};

/**
 * Per-row negative log-likelihood of 2-D targets under mixtures whose raw
 * parameters are the rows of `raw` ([N, 5K]). `targets` holds N (x, y)
 * pairs. Returns an [N] tensor. Built from graph primitives so it is
 * differentiable w.r.t. `raw`.
 */
template <std::floating_point T>
Var<T> gmm_nll(Graph<T>& g, const Var<T>& raw, std::span<const Point2> targets, std::size_t k) {
  if (raw.shape().size() != 2 || raw.shape()[1] != gmm_raw_width(k) || raw.shape()[0] != targets.size()) {
    throw std::invalid_argument("gmm_nll: raw must be [N, " + std::to_string(gmm_raw_width(k)) + "] with N=" +
                                std::to_string(targets.size()) + ", got " + shape_str(raw.shape()));
  }
  const std::size_t n = targets.size();
  std::vector<std::size_t> logit_idx(k), mean_idx(2 * k), scale_idx(2 * k);
  for (std::size_t c = 0; c < k; ++c) logit_idx[c] = c;
  for (std::size_t j = 0; j < 2 * k; ++j) {
    mean_idx[j] = k + j;
    scale_idx[j] = 3 * k + j;
  }
  Tensor<T> tiled(Shape{n, 2 * k});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t a = 0; a < 2; ++a) tiled[r * 2 * k + 2 * c + a] = static_cast<T>(targets[r][a]);

  auto log_w = g.log_softmax(g.gather_last(raw, logit_idx));
  auto mu = g.gather_last(raw, mean_idx);
  auto sigma = g.add_scalar(g.softplus(g.gather_last(raw, scale_idx)), static_cast<T>(kScaleFloor));
  auto z = g.div(g.sub(g.constant(std::move(tiled)), mu), sigma);
  auto per_axis = g.add(g.scale(g.mul(z, z), T{-0.5}), g.scale(g.log(sigma), T{-1}));
  auto per_comp = g.sum_last(g.reshape(per_axis, Shape{n, k, 2}));
  auto joint = g.add(g.add_scalar(per_comp, static_cast<T>(-kLog2Pi)), log_w);
  return g.scale(g.logsumexp(joint), T{-1});
}

struct GradCheckReport {
  std::vector<double> autodiff;
  std::vector<double> finite_difference;
  double max_rel_error = 0.0;
  bool passed = false;
};

/**
 * Compares the autodiff gradient of -log_density w.r.t. the raw head block
 * (graph route) with central finite differences of the closed-form density.
 * Passes when every component has |ad - fd| / (|fd| + 1e-8) < tolerance.
 */
inline GradCheckReport gmm_nll_grad_check(std::span<const double> raw, Point2 point, std::size_t k,
                                          double h = 1e-4, double tolerance = 1e-3) {
  GradCheckReport rep;
  Graph<double> g;
  auto raw_var = make_parameter(Tensor<double>(Shape{1, raw.size()}, std::vector<double>(raw.begin(), raw.end())));
  const std::array<Point2, 1> tgt{point};
  auto nll = g.sum(gmm_nll(g, raw_var, tgt, k));
  g.backward(nll);
  rep.autodiff.assign(raw_var.grad().begin(), raw_var.grad().end());

  std::vector<double> work(raw.begin(), raw.end());
  for (std::size_t i = 0; i < work.size(); ++i) {
    const double orig = work[i];
    work[i] = orig + h;
    const double fp = -gmm_log_density(gmm_from_raw(work, k), point);
    work[i] = orig - h;
    const double fm = -gmm_log_density(gmm_from_raw(work, k), point);
    work[i] = orig;
    const double fd = (fp - fm) / (2 * h);
    rep.finite_difference.push_back(fd);
    rep.max_rel_error = std::max(rep.max_rel_error, std::abs(rep.autodiff[i] - fd) / (std::abs(fd) + 1e-8));
  }
  rep.passed = rep.max_rel_error < tolerance;
  return rep;
}

}  // namespace posegen
