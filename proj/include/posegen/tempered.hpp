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

// Tempered distributions p_T(x) = p(x)^(1/T) / Z_T for any density that can
// be sampled and evaluated, sampled by Monte-Carlo importance resampling:
// draw N candidates from p, then pick one with probability
// softmax((1/T - 1) * ln p(x_i)).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "posegen/rng.hpp"
#include "posegen/stats.hpp"

namespace posegen {

template <class D>
concept TemperableDistribution = requires(const D& d, Rng& rng) {
  d.sample(rng);
  { d.log_density(d.sample(rng)) } -> std::convertible_to<double>;
};

template <class D>
using point_type_t = std::remove_cvref_t<decltype(std::declval<const D&>().sample(std::declval<Rng&>()))>;

/// Strictly positive, finite temperature.
class Temperature {
 public:
  explicit Temperature(double t) : t_(t) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw std::invalid_argument("temperature must be a positive finite real, got " + std::to_string(t));
    }
  }
  double value() const noexcept { return t_; }

 private:
  double t_;
};

/// Candidate count used by the T2P generator per keypoint step.
inline constexpr std::size_t kDefaultCandidates = 1024;
/// Candidate count used by the 1-D demo figures.
inline constexpr std::size_t kDemoCandidates = 10000;

/// ln p(x) / T: the log of the numerator of p_T.
template <TemperableDistribution D>
double tempered_log_density_unnormalized(const D& dist, const point_type_t<D>& x, Temperature t) {
  return dist.log_density(x) / t.value();
}

/**
 * Normalized resampling weights softmax((1/T - 1) * ln p_i), computed with
 * max subtraction. Candidates with ln p = -inf get zero weight.
 */
inline void tempered_resampling_weights(std::span<const double> log_densities, Temperature t,
                                        std::vector<double>& weights) {
  const double coef = 1.0 / t.value() - 1.0;
  weights.resize(log_densities.size());
  double mx = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < log_densities.size(); ++i) {
    const double lp = log_densities[i];
    if (std::isnan(lp) || lp == std::numeric_limits<double>::infinity()) {
      throw std::domain_error("tempered sampling: candidate " + std::to_string(i) + " has log density " +
                              std::to_string(lp));
    }
    if (lp == -std::numeric_limits<double>::infinity()) {
      weights[i] = -std::numeric_limits<double>::infinity();
      continue;
    }
    any = true;
    weights[i] = coef * lp;
    mx = std::max(mx, weights[i]);
  }
  if (!any) throw std::domain_error("tempered sampling: every candidate has log density -inf");
  double total = 0.0;
  for (double& w : weights) {
    w = w == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(w - mx);
    total += w;
  }
  for (double& w : weights) w /= total;
}

inline std::vector<double> tempered_resampling_weights(std::span<const double> log_densities, Temperature t) {
  std::vector<double> w;
  tempered_resampling_weights(log_densities, t, w);
  return w;
}

/**
 * One draw from p_T: n_candidates i.i.d. points from dist, resampled once.
 * Callers wanting many tempered draws call repeatedly; candidates are never
 * reused across draws.
 */
template <TemperableDistribution D>
point_type_t<D> tempered_sample(const D& dist, Temperature t, std::size_t n_candidates, Rng& rng) {
  if (n_candidates == 0) throw std::invalid_argument("tempered_sample: n_candidates must be >= 1");
  thread_local std::vector<point_type_t<D>> candidates;
  thread_local std::vector<double> log_p, weights;
  candidates.resize(n_candidates);
  log_p.resize(n_candidates);
  for (std::size_t i = 0; i < n_candidates; ++i) {
    candidates[i] = dist.sample(rng);
    log_p[i] = dist.log_density(candidates[i]);
  }
  tempered_resampling_weights(log_p, t, weights);
  return candidates[rng.categorical(weights)];
}

// ---------------------------------------------------------------------------
// Property verification on quadrature grids.

struct Window {
  double lo = 0.0, hi = 1.0;
  double width() const { return hi - lo; }
};

struct TheoremCheckConfig {
  Window quadrature;  ///< normalization window; must hold essentially all mass
  Window uniform;     ///< truncated support for the high-temperature check
  std::size_t grid_points = 200001;  ///< per axis in 1-D; 2-D uses grid_points_2d
  std::size_t grid_points_2d = 501;
  double mode_selection_temperature = 0.01;
  double mode_mass_threshold = 0.99;
  double high_temperature = 100.0;
  double uniform_ks_threshold = 0.05;
  std::size_t uniform_samples = 20000;
  std::size_t score_points = 50;
  double score_step = 1e-5;
  double score_tolerance = 1e-3;
  double invariance_tolerance = 1e-10;
  std::uint64_t seed = 0;
};

struct TemperatureRow {
  double temperature = 1.0;
  std::size_t modes_p = 0;
  std::size_t modes_pt = 0;
  double max_mode_shift = 0.0;  ///< worst |argmax_p - argmax_pT| over matched modes
  bool modes_conserved = false;
  double score_max_rel_error = 0.0;
  bool score_ok = false;
};

struct PropertyReport {
  std::vector<TemperatureRow> rows;
  std::vector<double> mode_locations;  ///< local maxima of p on the grid (1-D: x; 2-D: x,y pairs)
  double t1_max_abs_diff = 0.0;
  bool t1_ok = false;
  bool modes_ok = false;
  double mode_selection_mass = 0.0;
  bool mode_selection_ok = false;
  double uniform_ks = 0.0;
  bool uniform_ok = false;
  bool score_ok = false;

  bool all_passed() const { return t1_ok && modes_ok && mode_selection_ok && uniform_ok && score_ok; }
};

namespace detail {

/// Log-densities of a 1-D distribution on an even grid.
struct Grid1d {
  double lo = 0.0, h = 1.0;
  std::vector<double> log_p;

  double x(std::size_t i) const { return lo + h * static_cast<double>(i); }

  template <class D>
  static Grid1d build(const D& dist, Window w, std::size_t n) {
    if (n < 3 || !(w.hi > w.lo)) throw std::invalid_argument("quadrature grid needs >= 3 points and hi > lo");
    Grid1d g;
    g.lo = w.lo;
    g.h = w.width() / static_cast<double>(n - 1);
    g.log_p.resize(n);
    for (std::size_t i = 0; i < n; ++i) g.log_p[i] = dist.log_density(g.x(i));
    return g;
  }

  /// ln of the trapezoid integral of p^(1/T).
  double log_normalizer(double t) const {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : log_p) mx = std::max(mx, v / t);
    double s = 0.0;
    for (std::size_t i = 0; i < log_p.size(); ++i) {
      const double w = (i == 0 || i + 1 == log_p.size()) ? 0.5 : 1.0;
      s += w * std::exp(log_p[i] / t - mx);
    }
    return mx + std::log(s * h);
  }

  std::vector<double> tempered_density(double t) const {
    const double lz = log_normalizer(t);
    std::vector<double> out(log_p.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(log_p[i] / t - lz);
    return out;
  }

  /// Indices of strict-left / weak-right local maxima of v.
  static std::vector<std::size_t> local_maxima(const std::vector<double>& v) {
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i)
      if (v[i] > v[i - 1] && v[i] >= v[i + 1]) out.push_back(i);
    return out;
  }

  /// Global modes of p: local maxima whose log density ties the maximum.
  std::vector<std::size_t> global_modes() const {
    const auto lm = local_maxima(log_p);
    double best = -std::numeric_limits<double>::infinity();
    for (auto i : lm) best = std::max(best, log_p[i]);
    std::vector<std::size_t> out;
    for (auto i : lm)
      if (log_p[i] >= best - 1e-9) out.push_back(i);
    return out;
  }

  /// Grid interval [first, last] of the basin of attraction of local
  /// maximum `mode`: extend outward while log p does not increase.
  std::pair<std::size_t, std::size_t> basin(std::size_t mode) const {
    std::size_t a = mode, b = mode;
    while (a > 0 && log_p[a - 1] <= log_p[a]) --a;
    while (b + 1 < log_p.size() && log_p[b + 1] <= log_p[b]) ++b;
    return {a, b};
  }

  /// Trapezoid mass of `density` over the basins of the global modes.
  double mass_in_global_basins(const std::vector<double>& density) const {
    std::vector<char> inside(density.size(), 0);
    for (auto m : global_modes()) {
      const auto [a, b] = basin(m);
      std::fill(inside.begin() + static_cast<std::ptrdiff_t>(a), inside.begin() + static_cast<std::ptrdiff_t>(b) + 1, 1);
    }
    double mass = 0.0;
    for (std::size_t i = 0; i + 1 < density.size(); ++i)
      if (inside[i] && inside[i + 1]) mass += 0.5 * (density[i] + density[i + 1]) * h;
    return mass;
  }
};

}  // namespace detail

/// Basins of attraction (under hill climbing on p) of the global mode(s) of p.
template <TemperableDistribution D>
  requires std::same_as<point_type_t<D>, double>
std::vector<Window> global_mode_basins(const D& dist, Window w, std::size_t points = 200001) {
  const auto g = detail::Grid1d::build(dist, w, points);
  std::vector<Window> out;
  for (auto m : g.global_modes()) {
    const auto [a, b] = g.basin(m);
    out.push_back({g.x(a), g.x(b)});
  }
  return out;
}

/// Mass of p_T over the global-mode basins of p, by quadrature on window w.
template <TemperableDistribution D>
  requires std::same_as<point_type_t<D>, double>
double tempered_mass_in_global_basins(const D& dist, Temperature t, Window w, std::size_t points = 200001) {
  const auto g = detail::Grid1d::build(dist, w, points);
  return g.mass_in_global_basins(g.tempered_density(t.value()));
}

/**
 * Checks the tempered-transform properties for a 1-D distribution:
 * temperature-one invariance, conservation of modes and score scaling for
 * each T in `temperatures`, mode selection at a small temperature, and
 * uniform thermalization at a large temperature on the truncated window.
 */
template <TemperableDistribution D>
  requires std::same_as<point_type_t<D>, double>
PropertyReport verify_theorem_properties(const D& dist, std::span<const double> temperatures,
                                         const TheoremCheckConfig& cfg) {
  PropertyReport rep;
  const auto grid = detail::Grid1d::build(dist, cfg.quadrature, cfg.grid_points);
  const auto modes_p = detail::Grid1d::local_maxima(grid.log_p);
  for (auto i : modes_p) rep.mode_locations.push_back(grid.x(i));

  {
    const auto p1 = grid.tempered_density(1.0);
    for (std::size_t i = 0; i < p1.size(); ++i)
      rep.t1_max_abs_diff = std::max(rep.t1_max_abs_diff, std::abs(p1[i] - std::exp(grid.log_p[i])));
    rep.t1_ok = rep.t1_max_abs_diff < cfg.invariance_tolerance;
  }

  Rng rng(cfg.seed);
  std::vector<double> score_x(cfg.score_points);
  for (double& x : score_x) x = rng.uniform(cfg.uniform.lo, cfg.uniform.hi);

  rep.modes_ok = true;
  rep.score_ok = true;
  for (double tv : temperatures) {
    const Temperature t(tv);
    TemperatureRow row;
    row.temperature = tv;
    const auto pt = grid.tempered_density(tv);
    std::vector<double> log_pt(pt.size());
    const double lz = grid.log_normalizer(tv);
    for (std::size_t i = 0; i < pt.size(); ++i) log_pt[i] = grid.log_p[i] / tv - lz;
    const auto modes_t = detail::Grid1d::local_maxima(log_pt);
    row.modes_p = modes_p.size();
    row.modes_pt = modes_t.size();
    row.modes_conserved = modes_t.size() == modes_p.size();
    if (row.modes_conserved) {
      for (std::size_t m = 0; m < modes_p.size(); ++m) {
        const double shift = std::abs(grid.x(modes_p[m]) - grid.x(modes_t[m]));
        row.max_mode_shift = std::max(row.max_mode_shift, shift);
        if (shift > grid.h * 1.000001) row.modes_conserved = false;
      }
    }

    for (double x : score_x) {
      const double hstep = cfg.score_step;
      const double lpt_plus = tempered_log_density_unnormalized(dist, x + hstep, t) - lz;
      const double lpt_minus = tempered_log_density_unnormalized(dist, x - hstep, t) - lz;
      const double fd = (lpt_plus - lpt_minus) / (2 * hstep);
      double base_score;
      if constexpr (requires { dist.score(x); }) {
        base_score = dist.score(x);
      } else {
        base_score = (dist.log_density(x + hstep) - dist.log_density(x - hstep)) / (2 * hstep);
      }
      const double expected = base_score / tv;
      row.score_max_rel_error = std::max(row.score_max_rel_error, std::abs(fd - expected) / (std::abs(expected) + 1e-8));
    }
    row.score_ok = row.score_max_rel_error < cfg.score_tolerance;
    rep.modes_ok = rep.modes_ok && row.modes_conserved;
    rep.score_ok = rep.score_ok && row.score_ok;
    rep.rows.push_back(row);
  }

  rep.mode_selection_mass = grid.mass_in_global_basins(grid.tempered_density(cfg.mode_selection_temperature));
  rep.mode_selection_ok = rep.mode_selection_mass >= cfg.mode_mass_threshold;

  // High temperature: exact inverse-CDF draws from p_T restricted to the
  // truncated window, compared with Uniform(window).
  {
    const auto ug = detail::Grid1d::build(dist, cfg.uniform, cfg.grid_points);
    const auto dens = ug.tempered_density(cfg.high_temperature);
    std::vector<double> cdf(dens.size(), 0.0);
    for (std::size_t i = 1; i < dens.size(); ++i) cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * ug.h;
    const double total = cdf.back();
    for (double& c : cdf) c /= total;
    std::vector<double> samples(cfg.uniform_samples);
    for (double& s : samples) {
      const double u = rng.uniform();
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
      const std::size_t lo = hi == 0 ? 0 : hi - 1;
      const double span = cdf[hi] - cdf[lo];
      const double frac = span > 0.0 ? (u - cdf[lo]) / span : 0.0;
      s = ug.x(lo) + frac * ug.h;
    }
    const Window w = cfg.uniform;
    rep.uniform_ks = stats::ks_statistic(std::move(samples), [w](double x) {
      return std::clamp((x - w.lo) / w.width(), 0.0, 1.0);
    });
    rep.uniform_ok = rep.uniform_ks < cfg.uniform_ks_threshold;
  }
  return rep;
}

/**
 * 2-D counterpart on a square grid. Modes are 8-neighbour local maxima,
 * basins follow steepest ascent over the 8-neighbourhood, and uniformity is
 * the larger of the two marginal KS statistics.
 */
template <TemperableDistribution D>
  requires std::same_as<point_type_t<D>, std::array<double, 2>>
PropertyReport verify_theorem_properties(const D& dist, std::span<const double> temperatures,
                                         const TheoremCheckConfig& cfg, Window y_quadrature, Window y_uniform) {
  using P = std::array<double, 2>;
  PropertyReport rep;
  struct Grid2 {
    Window wx, wy;
    std::size_t n;
    double hx, hy;
    std::vector<double> lp;
    double x(std::size_t i) const { return wx.lo + hx * static_cast<double>(i); }
    double y(std::size_t j) const { return wy.lo + hy * static_cast<double>(j); }
    double log_normalizer(double t) const {
      double mx = -std::numeric_limits<double>::infinity();
      for (double v : lp) mx = std::max(mx, v / t);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double w = ((i == 0 || i + 1 == n) ? 0.5 : 1.0) * ((j == 0 || j + 1 == n) ? 0.5 : 1.0);
          s += w * std::exp(lp[i * n + j] / t - mx);
        }
      return mx + std::log(s * hx * hy);
    }
    std::vector<std::size_t> maxima(const std::vector<double>& v) const {
      std::vector<std::size_t> out;
      for (std::size_t i = 1; i + 1 < n; ++i)
        for (std::size_t j = 1; j + 1 < n; ++j) {
          const double c = v[i * n + j];
          bool is_max = true;
          for (int di = -1; di <= 1 && is_max; ++di)
            for (int dj = -1; dj <= 1; ++dj) {
              if (!di && !dj) continue;
              const double o = v[(i + di) * n + (j + dj)];
              const bool earlier = di < 0 || (di == 0 && dj < 0);
              if (earlier ? !(c > o) : !(c >= o)) { is_max = false; break; }
            }
          if (is_max) out.push_back(i * n + j);
        }
      return out;
    }
  };
  auto build = [&](Window wx, Window wy, std::size_t n) {
    Grid2 g{wx, wy, n, wx.width() / static_cast<double>(n - 1), wy.width() / static_cast<double>(n - 1), {}};
    g.lp.resize(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) g.lp[i * n + j] = dist.log_density(P{g.x(i), g.y(j)});
    return g;
  };
  const std::size_t n = cfg.grid_points_2d;
  const auto grid = build(cfg.quadrature, y_quadrature, n);
  const auto modes_p = grid.maxima(grid.lp);
  for (auto m : modes_p) {
    rep.mode_locations.push_back(grid.x(m / n));
    rep.mode_locations.push_back(grid.y(m % n));
  }
  {
    const double lz = grid.log_normalizer(1.0);
    for (double v : grid.lp) rep.t1_max_abs_diff = std::max(rep.t1_max_abs_diff, std::abs(std::exp(v - lz) - std::exp(v)));
    rep.t1_ok = rep.t1_max_abs_diff < cfg.invariance_tolerance;
  }
  Rng rng(cfg.seed);
  std::vector<P> score_x(cfg.score_points);
  for (auto& p : score_x) p = {rng.uniform(cfg.uniform.lo, cfg.uniform.hi), rng.uniform(y_uniform.lo, y_uniform.hi)};
  rep.modes_ok = rep.score_ok = true;
  for (double tv : temperatures) {
    const Temperature t(tv);
    TemperatureRow row;
    row.temperature = tv;
    const double lz = grid.log_normalizer(tv);
    std::vector<double> lpt(grid.lp.size());
    for (std::size_t i = 0; i < lpt.size(); ++i) lpt[i] = grid.lp[i] / tv - lz;
    const auto modes_t = grid.maxima(lpt);
    row.modes_p = modes_p.size();
    row.modes_pt = modes_t.size();
    row.modes_conserved = modes_t.size() == modes_p.size();
    for (std::size_t m = 0; row.modes_conserved && m < modes_p.size(); ++m) {
      const double dx = std::abs(grid.x(modes_p[m] / n) - grid.x(modes_t[m] / n));
      const double dy = std::abs(grid.y(modes_p[m] % n) - grid.y(modes_t[m] % n));
      row.max_mode_shift = std::max({row.max_mode_shift, dx, dy});
      if (dx > grid.hx * 1.000001 || dy > grid.hy * 1.000001) row.modes_conserved = false;
    }
    const double hs = cfg.score_step;
    for (const auto& p : score_x) {
      for (std::size_t a = 0; a < 2; ++a) {
        P plus = p, minus = p;
        plus[a] += hs;
        minus[a] -= hs;
        const double fd = ((tempered_log_density_unnormalized(dist, plus, t) - lz) -
                           (tempered_log_density_unnormalized(dist, minus, t) - lz)) / (2 * hs);
        const double expected = (dist.log_density(plus) - dist.log_density(minus)) / (2 * hs) / tv;
        row.score_max_rel_error = std::max(row.score_max_rel_error, std::abs(fd - expected) / (std::abs(expected) + 1e-8));
      }
    }
    row.score_ok = row.score_max_rel_error < cfg.score_tolerance;
    rep.modes_ok = rep.modes_ok && row.modes_conserved;
    rep.score_ok = rep.score_ok && row.score_ok;
    rep.rows.push_back(row);
  }
  {
    const double ts = cfg.mode_selection_temperature;
    const double lz = grid.log_normalizer(ts);
    double best = -std::numeric_limits<double>::infinity();
    for (auto m : modes_p) best = std::max(best, grid.lp[m]);
    std::vector<std::size_t> global;
    for (auto m : modes_p)
      if (grid.lp[m] >= best - 1e-9) global.push_back(m);
    // Steepest-ascent pointers; a cell is in a global basin if its ascent
    // path ends at a global maximum.
    std::vector<std::size_t> up(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        std::size_t best_k = i * n + j;
        for (int di = -1; di <= 1; ++di)
          for (int dj = -1; dj <= 1; ++dj) {
            const auto ii = static_cast<std::ptrdiff_t>(i) + di, jj = static_cast<std::ptrdiff_t>(j) + dj;
            if (ii < 0 || jj < 0 || ii >= static_cast<std::ptrdiff_t>(n) || jj >= static_cast<std::ptrdiff_t>(n)) continue;
            const auto k = static_cast<std::size_t>(ii) * n + static_cast<std::size_t>(jj);
            if (grid.lp[k] > grid.lp[best_k]) best_k = k;
          }
        up[i * n + j] = best_k;
      }
    std::vector<char> in_global(n * n, 0);
    for (auto m : global) in_global[m] = 1;
    std::vector<char> state(n * n, 0);  // 0 unknown, 1 global basin, 2 other
    std::vector<std::size_t> path;
    for (std::size_t c = 0; c < n * n; ++c) {
      std::size_t k = c;
      path.clear();
      while (state[k] == 0 && up[k] != k) {
        path.push_back(k);
        k = up[k];
      }
      const char v = state[k] ? state[k] : (in_global[k] ? 1 : 2);
      state[k] = v;
      for (auto q : path) state[q] = v;
    }
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (state[i * n + j] != 1) continue;
        const double w = ((i == 0 || i + 1 == n) ? 0.5 : 1.0) * ((j == 0 || j + 1 == n) ? 0.5 : 1.0);
        mass += w * std::exp(grid.lp[i * n + j] / ts - lz) * grid.hx * grid.hy;
      }
    rep.mode_selection_mass = mass;
    rep.mode_selection_ok = mass >= cfg.mode_mass_threshold;
  }
  {
    const auto ug = build(cfg.uniform, y_uniform, n);
    const double th = cfg.high_temperature;
    const double lz = ug.log_normalizer(th);
    std::vector<double> mx(n, 0.0), my(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double d = std::exp(ug.lp[i * n + j] / th - lz);
        mx[i] += d * ug.hy;
        my[j] += d * ug.hx;
      }
    auto marginal_ks = [&](const std::vector<double>& m, double h) {
      std::vector<double> cdf(n, 0.0);
      for (std::size_t i = 1; i < n; ++i) cdf[i] = cdf[i - 1] + 0.5 * (m[i] + m[i - 1]) * h;
      double ks = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        ks = std::max(ks, std::abs(cdf[i] / cdf.back() - static_cast<double>(i) / static_cast<double>(n - 1)));
      return ks;
    };
    rep.uniform_ks = std::max(marginal_ks(mx, ug.hx), marginal_ks(my, ug.hy));
    rep.uniform_ok = rep.uniform_ks < cfg.uniform_ks_threshold;
  }
  return rep;
}

}  // namespace posegen
