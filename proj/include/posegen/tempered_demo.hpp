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

// Figure data for tempered sampling of a 1-D mixture: the quadrature-
// normalized p_T on a grid next to a histogram of tempered draws, per T.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "posegen/gmm.hpp"
#include "posegen/plots.hpp"
#include "posegen/rng.hpp"
#include "posegen/tempered.hpp"

namespace posegen {

struct TemperedDemoConfig {
  Gmm1d dist{{0.7, 0.3}, {-2.0, 3.0}, {1.0, 1.0}};
  std::vector<double> temperatures{1.0, 0.3, 0.05};  // illustrative choice
  std::size_t n_samples = 10000;
  std::size_t n_candidates = kDemoCandidates;
  std::size_t bins = 60;
  std::size_t grid_points = 601;
  std::uint64_t seed = 0;
};

struct TemperedDemoPanel {
  double temperature = 1.0;
  std::vector<double> grid_x, grid_density;
  std::vector<double> samples;
  plots::Histogram histogram;
};

struct TemperedDemoResult {
  double x_min = 0.0, x_max = 1.0;
  std::vector<TemperedDemoPanel> panels;
};

/// Plot window: every component's mean +- 4 sigma.
inline Window demo_window(const Gmm1d& g) {
  Window w{g.means[0] - 4 * g.sigmas[0], g.means[0] + 4 * g.sigmas[0]};
  for (std::size_t i = 1; i < g.means.size(); ++i) {
    w.lo = std::min(w.lo, g.means[i] - 4 * g.sigmas[i]);
    w.hi = std::max(w.hi, g.means[i] + 4 * g.sigmas[i]);
  }
  return w;
}

inline TemperedDemoResult tempered_demo(const TemperedDemoConfig& cfg) {
  cfg.dist.validate();
  if (cfg.temperatures.empty()) throw std::invalid_argument("tempered_demo: no temperatures");
  if (cfg.n_samples == 0 || cfg.bins == 0 || cfg.grid_points < 3) {
    throw std::invalid_argument("tempered_demo: n_samples, bins and grid_points must be positive");
  }
  TemperedDemoResult res;
  const Window w = demo_window(cfg.dist);
  res.x_min = w.lo;
  res.x_max = w.hi;
  // Normalizer from a wide window so the plotted density is exact, not truncated.
  double lo = w.lo, hi = w.hi;
  for (std::size_t i = 0; i < cfg.dist.means.size(); ++i) {
    lo = std::min(lo, cfg.dist.means[i] - 12 * cfg.dist.sigmas[i]);
    hi = std::max(hi, cfg.dist.means[i] + 12 * cfg.dist.sigmas[i]);
  }
  const auto wide = detail::Grid1d::build(cfg.dist, Window{lo, hi}, 200001);
  for (std::size_t k = 0; k < cfg.temperatures.size(); ++k) {
    const Temperature t(cfg.temperatures[k]);
    TemperedDemoPanel p;
    p.temperature = t.value();
    const double lz = wide.log_normalizer(t.value());
    for (std::size_t i = 0; i < cfg.grid_points; ++i) {
      const double x = w.lo + w.width() * static_cast<double>(i) / static_cast<double>(cfg.grid_points - 1);
      p.grid_x.push_back(x);
      p.grid_density.push_back(std::exp(cfg.dist.log_density(x) / t.value() - lz));
    }
    Rng rng(derive_seed(cfg.seed, k));
    p.samples.resize(cfg.n_samples);
    for (double& s : p.samples) s = tempered_sample(cfg.dist, t, cfg.n_candidates, rng);
    const double bw = w.width() / static_cast<double>(cfg.bins);
    p.histogram.edges.resize(cfg.bins + 1);
    for (std::size_t b = 0; b <= cfg.bins; ++b) p.histogram.edges[b] = w.lo + bw * static_cast<double>(b);
    p.histogram.density.assign(cfg.bins, 0.0);
    for (double s : p.samples) {
      if (s < w.lo || s >= w.hi) continue;
      const auto b = std::min(cfg.bins - 1, static_cast<std::size_t>((s - w.lo) / bw));
      p.histogram.density[b] += 1.0;
    }
    for (double& d : p.histogram.density) d /= static_cast<double>(cfg.n_samples) * bw;
    res.panels.push_back(std::move(p));
  }
  return res;
}

/// Long-format CSV: series,temperature,x,value (series is density or histogram;
/// histogram x is the bin center).
inline std::string tempered_demo_csv(const TemperedDemoResult& r) {
  std::string s = "series,temperature,x,value\n";
  for (const auto& p : r.panels) {
    for (std::size_t i = 0; i < p.grid_x.size(); ++i)
      s += "density," + plots::fmt("%g", p.temperature) + "," + plots::fmt("%.6f", p.grid_x[i]) + "," +
           plots::fmt("%.8g", p.grid_density[i]) + "\n";
    for (std::size_t b = 0; b < p.histogram.density.size(); ++b)
      s += "histogram," + plots::fmt("%g", p.temperature) + "," +
           plots::fmt("%.6f", 0.5 * (p.histogram.edges[b] + p.histogram.edges[b + 1])) + "," +
           plots::fmt("%.8g", p.histogram.density[b]) + "\n";
  }
  return s;
}

inline std::string tempered_demo_svg(const TemperedDemoResult& r) {
  std::vector<std::string> titles;
  std::vector<plots::Series> lines;
  std::vector<plots::Histogram> hists;
  for (const auto& p : r.panels) {
    titles.push_back("T = " + plots::fmt("%g", p.temperature));
    lines.push_back({"p_T", p.grid_x, p.grid_density, "#c44e52"});
    hists.push_back(p.histogram);
  }
  return plots::panels_svg(titles, lines, hists, r.x_min, r.x_max);
}

}  // namespace posegen
