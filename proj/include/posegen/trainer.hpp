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

// Adam training loops for the pose generator and the contrastive scorer,
// plus the evaluation helpers used to judge them.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "posegen/checkpoint.hpp"
#include "posegen/clapp.hpp"
#include "posegen/gmm.hpp"
#include "posegen/parameters.hpp"
#include "posegen/plots.hpp"
#include "posegen/pose.hpp"
#include "posegen/rng.hpp"
#include "posegen/t2p.hpp"
#include "posegen/text_features.hpp"

namespace posegen {

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 64;
  double learning_rate = 3e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double grad_clip = 1.0;
  bool cosine_decay = false;
  std::size_t warmup_steps = 0;  ///< linear ramp from lr/warmup to lr; 0 disables
  /// T2P only: gradients come from NLL + existence_weight * BCE. Logged
  /// losses stay unweighted. The two terms read disjoint head outputs, so the
  /// weight moves the optimization path, not the target distribution.
  double existence_weight = 1.0;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  ///< 0 disables intermediate checkpoints
  std::size_t log_every = 0;         ///< 0 disables progress callbacks

  void validate(std::size_t min_batch = 1) const {
    if (batch_size < min_batch) {
      throw std::invalid_argument("TrainConfig: batch_size must be >= " + std::to_string(min_batch));
    }
    if (!(learning_rate > 0.0) || !(grad_clip > 0.0) || !(existence_weight > 0.0)) {
      throw std::invalid_argument("TrainConfig: learning_rate, grad_clip and existence_weight must be positive");
    }
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"steps", c.steps},       {"batch_size", c.batch_size},     {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},       {"beta2", c.beta2},               {"eps", c.eps},
          {"grad_clip", c.grad_clip}, {"cosine_decay", c.cosine_decay}, {"warmup_steps", c.warmup_steps},
          {"existence_weight", c.existence_weight},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every}, {"log_every", c.log_every}};
}

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adam with bias correction over a parameter list.
template <std::floating_point T>
class Adam {
 public:
  Adam(ParameterList<T>& params, double beta1, double beta2, double eps)
      : params_(params), b1_(beta1), b2_(beta2), eps_(eps) {
    for (const auto& p : params_.items()) {
      m_.emplace_back(p.var.size(), 0.0);
      v_.emplace_back(p.var.size(), 0.0);
    }
  }

  void step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.items().size(); ++k) {
      auto& node = *params_.items()[k].var.node();
      auto w = node.value.data();
      auto g = node.value.grad();
      if (g.empty()) continue;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        m_[k][i] = b1_ * m_[k][i] + (1.0 - b1_) * gi;
        v_[k][i] = b2_ * v_[k][i] + (1.0 - b2_) * gi * gi;
        w[i] -= static_cast<T>(lr * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_));
      }
    }
  }

 private:
  ParameterList<T>& params_;
  double b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <std::floating_point T>
double clip_grad_norm(ParameterList<T>& params, double max_norm) {
  double ss = 0.0;
  for (const auto& p : params.items())
    for (T g : p.var.grad()) ss += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(ss);
  if (norm > max_norm) {
    const double f = max_norm / (norm + 1e-12);
    for (auto& p : params.items())
      for (T& g : p.var.node()->value.grad()) g = static_cast<T>(g * f);
  }
  return norm;
}

template <std::floating_point T>
double grad_norm(const ParameterList<T>& params) {
  double ss = 0.0;
  for (const auto& p : params.items())
    for (T g : p.var.grad()) ss += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(ss);
}

/// Optional linear warmup, then constant or cosine decay to zero at the
/// last step.
inline double learning_rate_at(const TrainConfig& c, std::size_t step) {
  if (step < c.warmup_steps) {
    return c.learning_rate * static_cast<double>(step + 1) / static_cast<double>(c.warmup_steps);
  }
  const std::size_t decay_steps = c.steps > c.warmup_steps ? c.steps - c.warmup_steps : 0;
  if (!c.cosine_decay || decay_steps <= 1) return c.learning_rate;
  const double frac = static_cast<double>(step - c.warmup_steps) / static_cast<double>(decay_steps - 1);
  return c.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(frac, 1.0)));
}

struct LossPoint {
  std::size_t step = 0;
  double loss = 0.0;
  double term_a = 0.0;  ///< NLL for T2P; text->pose CE for CLaPP
  double term_b = 0.0;  ///< BCE for T2P; pose->text CE for CLaPP
  double grad_norm = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<LossPoint> curve;
};

/// Mean loss over the first and last `window` points of a curve.
struct SmoothedEnds {
  double initial = 0.0, final = 0.0;
};

inline SmoothedEnds smoothed_ends(const std::vector<LossPoint>& curve, std::size_t window) {
  if (curve.empty()) throw std::invalid_argument("smoothed_ends: empty curve");
  window = std::max<std::size_t>(1, std::min(window, curve.size()));
  SmoothedEnds e;
  for (std::size_t i = 0; i < window; ++i) {
    e.initial += curve[i].loss;
    e.final += curve[curve.size() - 1 - i].loss;
  }
  e.initial /= static_cast<double>(window);
  e.final /= static_cast<double>(window);
  return e;
}

/// step,loss,<term_a>,<term_b>,grad_norm,lr
inline std::string loss_curve_csv(const std::vector<LossPoint>& curve, const std::string& term_a,
                                  const std::string& term_b) {
  std::string s = "step,loss," + term_a + "," + term_b + ",grad_norm,lr\n";
  for (const auto& p : curve) {
    s += std::to_string(p.step) + "," + plots::fmt("%.9g", p.loss) + "," + plots::fmt("%.9g", p.term_a) + "," +
         plots::fmt("%.9g", p.term_b) + "," + plots::fmt("%.9g", p.grad_norm) + "," + plots::fmt("%.9g", p.lr) + "\n";
  }
  return s;
}

/// Writes `path` (PGCK) and `path` + ".json" (config sidecar).
template <std::floating_point T>
void save_model(const std::filesystem::path& path, const ParameterList<T>& params, const nlohmann::json& config) {
  save_checkpoint(path, params.to_checkpoint());
  plots::write_text(path.string() + ".json", config.dump(2) + "\n");
}

inline nlohmann::json load_sidecar(const std::filesystem::path& ckpt) {
  const auto p = std::filesystem::path(ckpt.string() + ".json");
  std::ifstream f(p);
  if (!f) throw CheckpointError("missing config sidecar " + p.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("malformed config sidecar " + p.string() + ": " + e.what());
  }
}

inline T2pModel<float> load_t2p(const std::filesystem::path& ckpt) {
  const auto side = load_sidecar(ckpt);
  T2pModel<float> m(t2p_config_from_json(side.contains("model_config") ? side["model_config"] : side), 0);
  m.parameters().load(load_checkpoint(ckpt));
  return m;
}

inline ClappModel<float> load_clapp(const std::filesystem::path& ckpt) {
  const auto side = load_sidecar(ckpt);
  ClappModel<float> m(clapp_config_from_json(side.contains("model_config") ? side["model_config"] : side), 0);
  m.parameters().load(load_checkpoint(ckpt));
  return m;
}

/// Caches provider output per caption.
class FeatureCache {
 public:
  explicit FeatureCache(const TextFeatureProvider& provider) : provider_(provider) {}
  const TextFeatures& get(const std::string& caption) {
    auto it = cache_.find(caption);
    if (it == cache_.end()) it = cache_.emplace(caption, provider_.encode(caption)).first;
    return it->second;
  }

 private:
  const TextFeatureProvider& provider_;
  std::unordered_map<std::string, TextFeatures> cache_;
};

struct TrainOutputs {
  std::optional<std::filesystem::path> checkpoint;  ///< final checkpoint (+ .json sidecar)
  std::optional<std::filesystem::path> loss_csv;
  std::function<void(const LossPoint&)> on_log;     ///< called every log_every steps
};

namespace detail {

inline void check_finite(std::size_t step, const std::string& what, double total, double a, double b,
                         const char* a_name, const char* b_name) {
  if (std::isfinite(total)) return;
  throw TrainingDiverged(what + ": non-finite loss at step " + std::to_string(step) + " (loss " +
                         plots::fmt("%g", total) + ", " + a_name + " " + plots::fmt("%g", a) + ", " + b_name + " " +
                         plots::fmt("%g", b) + ")");
}

}  // namespace detail

/**
 * Trains the generator with minibatches drawn uniformly with replacement.
 * Zero steps leave the model untouched (the checkpoint then equals init).
 */
template <std::floating_point T>
TrainResult train_t2p(const TrainConfig& cfg, const std::vector<PoseRecord>& corpus, T2pModel<T>& model,
                      const TextFeatureProvider& provider, const TrainOutputs& out = {}) {
  cfg.validate();
  if (corpus.empty()) throw std::invalid_argument("train_t2p: empty corpus");
  if (provider.dim() != model.config().d_text) {
    throw std::invalid_argument("train_t2p: provider dim " + std::to_string(provider.dim()) +
                                " does not match model d_text " + std::to_string(model.config().d_text));
  }
  FeatureCache cache(provider);
  Adam<T> opt(model.parameters(), cfg.beta1, cfg.beta2, cfg.eps);
  Rng batch_rng(derive_seed(cfg.seed, 1));
  Rng dropout_rng(derive_seed(cfg.seed, 2));
  TrainResult res;
  std::vector<Pose> poses(cfg.batch_size);
  std::vector<TextFeatures> texts(cfg.batch_size);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const auto& r = corpus[batch_rng.index(corpus.size())];
      poses[b] = r.pose;
      texts[b] = cache.get(r.caption);
    }
    model.parameters().zero_grad();
    Graph<T> g;
    auto loss = t2p_loss(g, model, poses, texts, model.config().dropout > 0 ? &dropout_rng : nullptr);
    const double total = static_cast<double>(loss.total.item());
    detail::check_finite(step, "train_t2p", total, loss.nll, loss.bce, "nll", "bce");
    g.backward(cfg.existence_weight == 1.0
                   ? loss.total
                   : g.add(loss.total, g.scale(loss.existence, static_cast<T>(cfg.existence_weight - 1.0))));
    const double gn = clip_grad_norm(model.parameters(), cfg.grad_clip);
    const double lr = learning_rate_at(cfg, step);
    opt.step(lr);
    res.curve.push_back({step, total, loss.nll, loss.bce, gn, lr});
    if (out.on_log && cfg.log_every && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) out.on_log(res.curve.back());
    if (out.checkpoint && cfg.checkpoint_every && (step + 1) % cfg.checkpoint_every == 0 && step + 1 < cfg.steps) {
      save_model(out.checkpoint->string() + ".step" + std::to_string(step + 1), model.parameters(),
                 {{"model_config", to_json(model.config())}, {"train_config", to_json(cfg)}, {"step", step + 1}});
    }
  }
  if (out.loss_csv) plots::write_text(*out.loss_csv, loss_curve_csv(res.curve, "nll", "bce"));
  if (out.checkpoint) {
    save_model(*out.checkpoint, model.parameters(),
               {{"model_config", to_json(model.config())}, {"train_config", to_json(cfg)}, {"step", cfg.steps}});
  }
  return res;
}

/**
 * Draws batch_size records with pairwise distinct captions. Throws when the
 * corpus has fewer distinct captions than the batch needs.
 */
inline std::vector<std::size_t> sample_distinct_caption_batch(const std::vector<PoseRecord>& corpus,
                                                              std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> out;
  std::set<std::string_view> seen;
  std::size_t attempts = 0;
  const std::size_t max_attempts = 1000 * batch_size + 1000;
  while (out.size() < batch_size) {
    if (++attempts > max_attempts) {
      throw std::invalid_argument("cannot fill a batch of " + std::to_string(batch_size) +
                                  " records with distinct captions");
    }
    const std::size_t i = rng.index(corpus.size());
    if (seen.insert(corpus[i].caption).second) out.push_back(i);
  }
  return out;
}

inline std::size_t count_distinct_captions(const std::vector<PoseRecord>& corpus) {
  std::set<std::string_view> s;
  for (const auto& r : corpus) s.insert(r.caption);
  return s.size();
}

template <std::floating_point T>
TrainResult train_clapp(const TrainConfig& cfg, const std::vector<PoseRecord>& corpus, ClappModel<T>& model,
                        const TextFeatureProvider& provider, const TrainOutputs& out = {}) {
  cfg.validate(2);
  if (corpus.empty()) throw std::invalid_argument("train_clapp: empty corpus");
  const std::size_t distinct = count_distinct_captions(corpus);
  if (distinct < cfg.batch_size) {
    throw std::invalid_argument("train_clapp: corpus has " + std::to_string(distinct) +
                                " distinct captions, fewer than batch_size " + std::to_string(cfg.batch_size));
  }
  FeatureCache cache(provider);
  Adam<T> opt(model.parameters(), cfg.beta1, cfg.beta2, cfg.eps);
  Rng batch_rng(derive_seed(cfg.seed, 1));
  TrainResult res;
  std::vector<Pose> poses(cfg.batch_size);
  std::vector<TextFeatures> texts(cfg.batch_size);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto idx = sample_distinct_caption_batch(corpus, cfg.batch_size, batch_rng);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      poses[b] = corpus[idx[b]].pose;
      texts[b] = cache.get(corpus[idx[b]].caption);
    }
    model.parameters().zero_grad();
    Graph<T> g;
    auto loss = contrastive_loss(g, model, texts, poses);
    const double total = static_cast<double>(loss.item());
    detail::check_finite(step, "train_clapp", total, total, model.logit_scale_value(), "loss", "logit_scale");
    g.backward(loss);
    const double gn = clip_grad_norm(model.parameters(), cfg.grad_clip);
    const double lr = learning_rate_at(cfg, step);
    opt.step(lr);
    model.clamp_logit_scale();
    res.curve.push_back({step, total, total, static_cast<double>(model.logit_scale_value()), gn, lr});
    if (out.on_log && cfg.log_every && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) out.on_log(res.curve.back());
    if (out.checkpoint && cfg.checkpoint_every && (step + 1) % cfg.checkpoint_every == 0 && step + 1 < cfg.steps) {
      save_model(out.checkpoint->string() + ".step" + std::to_string(step + 1), model.parameters(),
                 {{"model_config", to_json(model.config())}, {"train_config", to_json(cfg)}, {"step", step + 1}});
    }
  }
  if (out.loss_csv) plots::write_text(*out.loss_csv, loss_curve_csv(res.curve, "symmetric_ce", "logit_scale"));
  if (out.checkpoint) {
    save_model(*out.checkpoint, model.parameters(),
               {{"model_config", to_json(model.config())}, {"train_config", to_json(cfg)}, {"step", cfg.steps}});
  }
  return res;
}

// ---------------------------------------------------------------------------
// Evaluation.

struct EvalNll {
  double mean_nll = 0.0;   ///< per existing keypoint
  std::size_t points = 0;
};

/// Mean -log p(point) of every existing keypoint under the teacher-forced
/// step mixtures.
template <std::floating_point T>
EvalNll t2p_eval_nll(const T2pModel<T>& model, const std::vector<PoseRecord>& records,
                     const TextFeatureProvider& provider, std::size_t batch = 16) {
  FeatureCache cache(provider);
  EvalNll r;
  double total = 0.0;
  const std::size_t k = model.config().k_mixtures, hw = model.config().head_width();
  for (std::size_t start = 0; start < records.size(); start += batch) {
    const std::size_t n = std::min(batch, records.size() - start);
    std::vector<Pose> poses;
    std::vector<TextFeatures> texts;
    for (std::size_t i = 0; i < n; ++i) {
      poses.push_back(records[start + i].pose);
      texts.push_back(cache.get(records[start + i].caption));
    }
    Graph<T> g(false);
    const auto out = t2p_forward(g, model, poses, texts);
    std::vector<double> raw(gmm_raw_width(k));
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t t = 0; t < kNumSlots; ++t) {
        const auto& kp = poses[b][t];
        if (!kp.exists()) continue;
        const std::size_t row = b * kNumSlots + t;
        for (std::size_t j = 0; j < raw.size(); ++j) raw[j] = static_cast<double>(out.value()[row * hw + j]);
        total -= gmm_log_density(gmm_from_raw(raw, k), {kp.x(), kp.y()});
        ++r.points;
      }
  }
  r.mean_nll = r.points ? total / static_cast<double>(r.points) : 0.0;
  return r;
}

/// Context-free baseline: one 2-D diagonal mixture over all existing keypoints.
inline GmmParams fit_global_gmm(const std::vector<PoseRecord>& records, std::size_t k = kDefaultMixtures,
                                std::size_t iterations = 200, std::uint64_t seed = 0) {
  std::vector<Point2> pts;
  for (const auto& r : records)
    for (const auto& kp : r.pose.slots())
      if (kp.exists()) pts.push_back({kp.x(), kp.y()});
  if (pts.size() < k) throw std::invalid_argument("fit_global_gmm: fewer points than components");
  Rng rng(seed);
  GmmParams p;
  p.weights.assign(k, 1.0 / static_cast<double>(k));
  Point2 mean{0, 0}, var{0, 0};
  for (const auto& q : pts)
    for (int a = 0; a < 2; ++a) mean[a] += q[a] / static_cast<double>(pts.size());
  for (const auto& q : pts)
    for (int a = 0; a < 2; ++a) var[a] += (q[a] - mean[a]) * (q[a] - mean[a]) / static_cast<double>(pts.size());
  for (std::size_t c = 0; c < k; ++c) {
    p.means.push_back(pts[rng.index(pts.size())]);
    p.scales.push_back({std::sqrt(var[0]), std::sqrt(var[1])});
  }
  std::vector<double> resp(k);
  for (std::size_t it = 0; it < iterations; ++it) {
    std::vector<double> nk(k, 0.0);
    std::vector<Point2> sx(k, {0, 0}), sxx(k, {0, 0});
    for (const auto& q : pts) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double t = std::log(p.weights[c]);
        for (int a = 0; a < 2; ++a) {
          const double z = (q[a] - p.means[c][a]) / p.scales[c][a];
          t -= 0.5 * z * z + std::log(p.scales[c][a]);
        }
        resp[c] = t;
        mx = std::max(mx, t);
      }
      double s = 0.0;
      for (double& v : resp) s += (v = std::exp(v - mx));
      for (std::size_t c = 0; c < k; ++c) {
        const double w = resp[c] / s;
        nk[c] += w;
        for (int a = 0; a < 2; ++a) {
          sx[c][a] += w * q[a];
          sxx[c][a] += w * q[a] * q[a];
        }
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      const double n = std::max(nk[c], 1e-12);
      p.weights[c] = std::max(nk[c] / static_cast<double>(pts.size()), 1e-12);
      for (int a = 0; a < 2; ++a) {
        p.means[c][a] = sx[c][a] / n;
        const double v = std::max(sxx[c][a] / n - p.means[c][a] * p.means[c][a], 0.0);
        p.scales[c][a] = std::max(std::sqrt(v), kScaleFloor);
      }
    }
    double tw = 0.0;
    for (double w : p.weights) tw += w;
    for (double& w : p.weights) w /= tw;
  }
  return p;
}

inline EvalNll global_gmm_eval_nll(const GmmParams& p, const std::vector<PoseRecord>& records) {
  EvalNll r;
  double total = 0.0;
  for (const auto& rec : records)
    for (const auto& kp : rec.pose.slots())
      if (kp.exists()) {
        total -= gmm_log_density(p, {kp.x(), kp.y()});
        ++r.points;
      }
  r.mean_nll = r.points ? total / static_cast<double>(r.points) : 0.0;
  return r;
}

/**
 * Top-1 text->pose retrieval. Each held-out record queries a candidate set
 * of its own pose plus n_candidates - 1 other held-out poses; a hit means
 * the best-scoring candidate carries the query's caption.
 */
template <std::floating_point T>
double clapp_retrieval_accuracy(const ClappModel<T>& model, const std::vector<PoseRecord>& records,
                                const TextFeatureProvider& provider, std::size_t n_candidates = 64,
                                std::uint64_t seed = 0) {
  if (records.size() < n_candidates) {
    throw std::invalid_argument("retrieval needs at least " + std::to_string(n_candidates) + " records");
  }
  std::vector<TextFeatures> texts;
  std::vector<Pose> poses;
  for (const auto& r : records) {
    texts.push_back(provider.encode(r.caption));
    poses.push_back(r.pose);
  }
  const auto te = clapp_text_embeddings(model, texts);
  const auto pe = clapp_pose_embeddings(model, poses);
  Rng rng(seed);
  std::size_t hits = 0;
  std::vector<std::size_t> others(records.size() - 1);
  for (std::size_t q = 0; q < records.size(); ++q) {
    for (std::size_t i = 0, k = 0; i < records.size(); ++i)
      if (i != q) others[k++] = i;
    rng.shuffle(others);
    std::size_t best = q;
    double best_s = cosine(te[q], pe[q]);
    for (std::size_t c = 0; c + 1 < n_candidates; ++c) {
      const double s = cosine(te[q], pe[others[c]]);
      if (s > best_s) best_s = s, best = others[c];
    }
    hits += records[best].caption == records[q].caption;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

}  // namespace posegen
