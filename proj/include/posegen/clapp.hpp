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

// Contrastive text/pose scorer. Text tower: mean of the tokens_len feature
// rows -> MLP. Pose tower: the 128 x (x, y, exists) sequence flattened to
// 384 values -> MLP. Both end in L2 normalization, so a score is a cosine.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "posegen/autograd.hpp"
#include "posegen/parameters.hpp"
#include "posegen/pose.hpp"
#include "posegen/rng.hpp"
#include "posegen/text_features.hpp"

namespace posegen {

inline const double kInitLogitScale = std::log(1.0 / 0.07);
inline const double kMaxLogitScale = std::log(100.0);
inline constexpr std::size_t kPoseFlatWidth = 3 * kNumSlots;

struct ClappConfig {
  std::size_t d_text = kToyTextDim;
  std::size_t hidden = 256;
  std::size_t d_joint = 64;

  void validate() const {
    if (d_text == 0 || hidden == 0 || d_joint == 0) throw std::invalid_argument("ClappConfig: sizes must be positive");
  }
  friend bool operator==(const ClappConfig&, const ClappConfig&) = default;
};

inline nlohmann::json to_json(const ClappConfig& c) {
  return {{"model", "clapp"}, {"d_text", c.d_text}, {"hidden", c.hidden}, {"d_joint", c.d_joint}};
}

inline ClappConfig clapp_config_from_json(const nlohmann::json& j) {
  if (j.value("model", std::string("clapp")) != "clapp") throw std::invalid_argument("config is not a clapp config");
  ClappConfig c;
  c.d_text = j.value("d_text", c.d_text);
  c.hidden = j.value("hidden", c.hidden);
  c.d_joint = j.value("d_joint", c.d_joint);
  c.validate();
  return c;
}

/// Mean of the first tokens_len rows.
inline std::vector<double> mean_pool(const TextFeatures& f) {
  std::vector<double> out(f.dim(), 0.0);
  for (std::size_t r = 0; r < f.tokens_len; ++r)
    for (std::size_t j = 0; j < f.dim(); ++j) out[j] += f.features.at(r, j);
  for (double& v : out) v /= static_cast<double>(f.tokens_len);
  return out;
}

inline std::vector<double> flatten_pose(const Pose& p) {
  std::vector<double> out(kPoseFlatWidth);
  for (std::size_t i = 0; i < kNumSlots; ++i) {
    out[3 * i] = p[i].x();
    out[3 * i + 1] = p[i].y();
    out[3 * i + 2] = p[i].exists() ? 1.0 : 0.0;
  }
  return out;
}

template <std::floating_point T>
class ClappModel {
 public:
  ClappModel(const ClappConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    const auto& c = config_;
    text_w1_ = params_.add("text.w1", linear_init<T>(c.d_text, c.hidden, rng));
    text_b1_ = params_.add("text.b1", Tensor<T>(Shape{c.hidden}));
    text_w2_ = params_.add("text.w2", linear_init<T>(c.hidden, c.d_joint, rng));
    text_b2_ = params_.add("text.b2", Tensor<T>(Shape{c.d_joint}));
    pose_w1_ = params_.add("pose.w1", linear_init<T>(kPoseFlatWidth, c.hidden, rng));
    pose_b1_ = params_.add("pose.b1", Tensor<T>(Shape{c.hidden}));
    pose_w2_ = params_.add("pose.w2", linear_init<T>(c.hidden, c.d_joint, rng));
    pose_b2_ = params_.add("pose.b2", Tensor<T>(Shape{c.d_joint}));
    logit_scale_ = params_.add("logit_scale", Tensor<T>::scalar(static_cast<T>(kInitLogitScale)));
  }

  const ClappConfig& config() const { return config_; }
  ParameterList<T>& parameters() { return params_; }
  const ParameterList<T>& parameters() const { return params_; }

  const Var<T>& logit_scale() const { return logit_scale_; }
  T logit_scale_value() const { return logit_scale_.value()[0]; }
  void set_logit_scale(T v) { logit_scale_.node()->value[0] = v; }
  /// Enforces logit_scale <= ln 100; call after every optimizer update.
  void clamp_logit_scale() {
    auto& v = logit_scale_.node()->value[0];
    v = std::min(v, static_cast<T>(kMaxLogitScale));
  }

  /// [B, d_joint] unit rows.
  Var<T> embed_texts(Graph<T>& g, std::span<const TextFeatures> texts) const {
    Tensor<T> x(Shape{texts.size(), config_.d_text});
    for (std::size_t b = 0; b < texts.size(); ++b) {
      check_feature_dim(texts[b], config_.d_text);
      const auto pooled = mean_pool(texts[b]);
      for (std::size_t j = 0; j < pooled.size(); ++j) x.at(b, j) = static_cast<T>(pooled[j]);
    }
    return tower(g, g.constant(std::move(x)), text_w1_, text_b1_, text_w2_, text_b2_);
  }

  Var<T> embed_poses(Graph<T>& g, std::span<const Pose> poses) const {
    Tensor<T> x(Shape{poses.size(), kPoseFlatWidth});
    for (std::size_t b = 0; b < poses.size(); ++b) {
      const auto flat = flatten_pose(poses[b]);
      for (std::size_t j = 0; j < flat.size(); ++j) x.at(b, j) = static_cast<T>(flat[j]);
    }
    return tower(g, g.constant(std::move(x)), pose_w1_, pose_b1_, pose_w2_, pose_b2_);
  }

 private:
  static Var<T> tower(Graph<T>& g, const Var<T>& x, const Var<T>& w1, const Var<T>& b1, const Var<T>& w2,
                      const Var<T>& b2) {
    auto h = g.gelu(g.add(g.matmul(x, w1), b1));
    return g.l2_normalize(g.add(g.matmul(h, w2), b2));
  }

  ClappConfig config_;
  ParameterList<T> params_;
  Var<T> text_w1_, text_b1_, text_w2_, text_b2_;
  Var<T> pose_w1_, pose_b1_, pose_w2_, pose_b2_;
  Var<T> logit_scale_;
};

/**
 * Symmetric InfoNCE over a [B, B] similarity matrix scaled by
 * exp(logit_scale): the mean of the text->pose and pose->text cross
 * entropies with the diagonal as targets.
 */
template <std::floating_point T>
Var<T> contrastive_loss_from_similarities(Graph<T>& g, const Var<T>& sims, const Var<T>& logit_scale) {
  if (sims.shape().size() != 2 || sims.shape()[0] != sims.shape()[1]) {
    throw std::invalid_argument("contrastive loss needs a square similarity matrix, got " + shape_str(sims.shape()));
  }
  const std::size_t B = sims.shape()[0];
  if (B < 2) throw std::invalid_argument("contrastive loss needs batch size >= 2, got " + std::to_string(B));
  auto logits = g.mul(sims, g.exp(logit_scale));
  std::vector<std::size_t> diag(B);
  for (std::size_t i = 0; i < B; ++i) diag[i] = i * B + i;
  auto ce_t = g.mean(g.gather(g.log_softmax(logits), diag, Shape{B}));
  auto ce_p = g.mean(g.gather(g.log_softmax(g.transpose(logits)), diag, Shape{B}));
  return g.scale(g.add(ce_t, ce_p), T{-0.5});
}

template <std::floating_point T>
Var<T> contrastive_loss(Graph<T>& g, const ClappModel<T>& m, std::span<const TextFeatures> texts,
                        std::span<const Pose> poses) {
  if (texts.size() != poses.size()) throw std::invalid_argument("contrastive_loss: texts and poses differ in count");
  if (texts.size() < 2) {
    throw std::invalid_argument("contrastive_loss: batch size must be >= 2, got " + std::to_string(texts.size()));
  }
  auto te = m.embed_texts(g, texts);
  auto pe = m.embed_poses(g, poses);
  return contrastive_loss_from_similarities(g, g.matmul(te, g.transpose(pe)), m.logit_scale());
}

/// Row-major embeddings, one vector per input.
template <std::floating_point T>
std::vector<std::vector<double>> clapp_text_embeddings(const ClappModel<T>& m, std::span<const TextFeatures> texts) {
  Graph<T> g(false);
  const auto e = m.embed_texts(g, texts);
  std::vector<std::vector<double>> out(texts.size(), std::vector<double>(m.config().d_joint));
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = 0; j < out[i].size(); ++j) out[i][j] = e.value().at(i, j);
  return out;
}

template <std::floating_point T>
std::vector<std::vector<double>> clapp_pose_embeddings(const ClappModel<T>& m, std::span<const Pose> poses) {
  Graph<T> g(false);
  const auto e = m.embed_poses(g, poses);
  std::vector<std::vector<double>> out(poses.size(), std::vector<double>(m.config().d_joint));
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = 0; j < out[i].size(); ++j) out[i][j] = e.value().at(i, j);
  return out;
}

/// Cosine of two vectors, clamped to [-1, 1] against rounding.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

template <std::floating_point T>
double clapp_score(const ClappModel<T>& m, const TextFeatures& text, const Pose& pose) {
  const auto te = clapp_text_embeddings(m, std::span<const TextFeatures>(&text, 1));
  const auto pe = clapp_pose_embeddings(m, std::span<const Pose>(&pose, 1));
  return cosine(te[0], pe[0]);
}

template <std::floating_point T>
double clapp_score(const ClappModel<T>& m, std::string_view prompt, const Pose& pose,
                   const TextFeatureProvider& provider) {
  return clapp_score(m, provider.encode(prompt), pose);
}

/// scores[i][j] = score(caption_i, pose_j).
template <std::floating_point T>
std::vector<std::vector<double>> score_matrix(const ClappModel<T>& m, const std::vector<PoseRecord>& records,
                                              const TextFeatureProvider& provider) {
  std::vector<TextFeatures> texts;
  std::vector<Pose> poses;
  for (const auto& r : records) {
    texts.push_back(provider.encode(r.caption));
    poses.push_back(r.pose);
  }
  const auto te = clapp_text_embeddings(m, texts);
  const auto pe = clapp_pose_embeddings(m, poses);
  std::vector<std::vector<double>> s(records.size(), std::vector<double>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t j = 0; j < records.size(); ++j) s[i][j] = cosine(te[i], pe[j]);
  return s;
}

/// Fraction of rows whose diagonal entry beats every other entry in its row and column.
inline double diagonal_dominance(const std::vector<std::vector<double>>& s) {
  if (s.empty()) return 0.0;
  std::size_t good = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < s.size(); ++j)
      if (j != i && (s[i][j] >= s[i][i] || s[j][i] >= s[i][i])) ok = false;
    good += ok;
  }
  return static_cast<double>(good) / static_cast<double>(s.size());
}

}  // namespace posegen
