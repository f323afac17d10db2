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

// Text-to-pose transformer. Step t sees BOS plus slots 0..t-1 and predicts
// slot t as a K-component 2-D mixture (5K raw values) and an existence
// logit. Blocks are pre-norm: causal self-attention, cross-attention over
// the 32 text rows, GELU feed-forward (x4).

#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "posegen/autograd.hpp"
#include "posegen/gmm.hpp"
#include "posegen/kernels.hpp"
#include "posegen/parameters.hpp"
#include "posegen/pose.hpp"
#include "posegen/rng.hpp"
#include "posegen/tempered.hpp"
#include "posegen/text_features.hpp"

namespace posegen {

struct T2pConfig {
  std::size_t n_layers = 4;
  std::size_t d_model = 128;
  std::size_t n_heads = 4;
  std::size_t k_mixtures = kDefaultMixtures;
  std::size_t d_text = kToyTextDim;
  std::size_t seq_len = kNumSlots;
  double dropout = 0.0;

  constexpr std::size_t head_width() const { return gmm_raw_width(k_mixtures) + 1; }

  void validate() const {
    if (seq_len != kNumSlots) throw std::invalid_argument("T2pConfig: seq_len must be 128, got " + std::to_string(seq_len));
    if (n_layers == 0 || d_model == 0 || n_heads == 0 || k_mixtures == 0 || d_text == 0) {
      throw std::invalid_argument("T2pConfig: sizes must be positive");
    }
    if (d_model % n_heads != 0) {
      throw std::invalid_argument("T2pConfig: d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                                  std::to_string(n_heads));
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("T2pConfig: dropout must lie in [0, 1)");
  }

  friend bool operator==(const T2pConfig&, const T2pConfig&) = default;
};

inline nlohmann::json to_json(const T2pConfig& c) {
  return {{"model", "t2p"},         {"n_layers", c.n_layers},     {"d_model", c.d_model},
          {"n_heads", c.n_heads},   {"k_mixtures", c.k_mixtures}, {"d_text", c.d_text},
          {"seq_len", c.seq_len},   {"dropout", c.dropout}};
}

inline T2pConfig t2p_config_from_json(const nlohmann::json& j) {
  if (j.value("model", std::string("t2p")) != "t2p") throw std::invalid_argument("config is not a t2p config");
  T2pConfig c;
  c.n_layers = j.value("n_layers", c.n_layers);
  c.d_model = j.value("d_model", c.d_model);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.k_mixtures = j.value("k_mixtures", c.k_mixtures);
  c.d_text = j.value("d_text", c.d_text);
  c.seq_len = j.value("seq_len", c.seq_len);
  c.dropout = j.value("dropout", c.dropout);
  c.validate();
  return c;
}

/// Closed form; see docs/t2p_parameters.md.
constexpr std::size_t t2p_param_count(const T2pConfig& c) {
  const std::size_t d = c.d_model, dt = c.d_text, h = c.head_width();
  const std::size_t embed = 3 * d + d + d + c.seq_len * d;
  const std::size_t per_layer = 14 * d * d + 19 * d + 2 * dt * d;
  return embed + c.n_layers * per_layer + 2 * d + (d + 1) * h;
}

struct StepOutput {
  std::vector<double> gmm_raw;
  double exist_logit = 0.0;
};

template <std::floating_point T>
class T2pModel {
 public:
  struct Attention {
    Var<T> wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct Block {
    Var<T> ln1_g, ln1_b, ln2_g, ln2_b, ln3_g, ln3_b;
    Attention self, cross;
    Var<T> ff_w1, ff_b1, ff_w2, ff_b2;
  };

  T2pModel(const T2pConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    const std::size_t d = config_.d_model, dt = config_.d_text;
    auto zeros = [](std::size_t n) { return Tensor<T>(Shape{n}); };
    auto ones = [](std::size_t n) { return Tensor<T>(Shape{n}, T{1}); };
    input_w_ = params_.add("input.w", linear_init<T>(3, d, rng));
    input_b_ = params_.add("input.b", zeros(d));
    bos_ = params_.add("bos", normal_init<T>(Shape{d}, 0.5, rng));
    pos_ = params_.add("pos", normal_init<T>(Shape{config_.seq_len, d}, 0.5, rng));
    for (std::size_t l = 0; l < config_.n_layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      Block b;
      b.ln1_g = params_.add(p + "ln1.g", ones(d));
      b.ln1_b = params_.add(p + "ln1.b", zeros(d));
      b.self = attention(p + "self.", d, rng);
      b.ln2_g = params_.add(p + "ln2.g", ones(d));
      b.ln2_b = params_.add(p + "ln2.b", zeros(d));
      b.cross = attention(p + "cross.", dt, rng);
      b.ln3_g = params_.add(p + "ln3.g", ones(d));
      b.ln3_b = params_.add(p + "ln3.b", zeros(d));
      b.ff_w1 = params_.add(p + "ff.w1", linear_init<T>(d, 4 * d, rng));
      b.ff_b1 = params_.add(p + "ff.b1", zeros(4 * d));
      b.ff_w2 = params_.add(p + "ff.w2", linear_init<T>(4 * d, d, rng));
      b.ff_b2 = params_.add(p + "ff.b2", zeros(d));
      blocks_.push_back(b);
    }
    lnf_g_ = params_.add("ln_f.g", ones(d));
    lnf_b_ = params_.add("ln_f.b", zeros(d));
    auto hw = linear_init<T>(d, config_.head_width(), rng);
    for (T& v : hw.data()) v *= T{0.1};
    head_w_ = params_.add("head.w", std::move(hw));
    head_b_ = params_.add("head.b", zeros(config_.head_width()));
  }

  const T2pConfig& config() const { return config_; }
  ParameterList<T>& parameters() { return params_; }
  const ParameterList<T>& parameters() const { return params_; }
  std::size_t count_params() const { return params_.count_scalars(); }

  const Var<T>& input_w() const { return input_w_; }
  const Var<T>& input_b() const { return input_b_; }
  const Var<T>& bos() const { return bos_; }
  const Var<T>& pos() const { return pos_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const Var<T>& lnf_g() const { return lnf_g_; }
  const Var<T>& lnf_b() const { return lnf_b_; }
  const Var<T>& head_w() const { return head_w_; }
  const Var<T>& head_b() const { return head_b_; }

 private:
  Attention attention(const std::string& p, std::size_t kv_in, Rng& rng) {
    const std::size_t d = config_.d_model;
    Attention a;
    a.wq = params_.add(p + "wq", linear_init<T>(d, d, rng));
    a.bq = params_.add(p + "bq", Tensor<T>(Shape{d}));
    a.wk = params_.add(p + "wk", linear_init<T>(kv_in, d, rng));
    a.bk = params_.add(p + "bk", Tensor<T>(Shape{d}));
    a.wv = params_.add(p + "wv", linear_init<T>(kv_in, d, rng));
    a.bv = params_.add(p + "bv", Tensor<T>(Shape{d}));
    a.wo = params_.add(p + "wo", linear_init<T>(d, d, rng));
    a.bo = params_.add(p + "bo", Tensor<T>(Shape{d}));
    return a;
  }

  T2pConfig config_;
  ParameterList<T> params_;
  Var<T> input_w_, input_b_, bos_, pos_;
  std::vector<Block> blocks_;
  Var<T> lnf_g_, lnf_b_, head_w_, head_b_;
};

namespace detail {

template <std::floating_point T>
Var<T> linear(Graph<T>& g, const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  return g.add(g.matmul(x, w), b);
}

/// Inverted dropout through a constant mask; identity when rng is null or p == 0.
template <std::floating_point T>
Var<T> dropout(Graph<T>& g, const Var<T>& x, double p, Rng* rng) {
  if (!rng || p <= 0.0) return x;
  Tensor<T> m(x.shape());
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (T& v : m.data()) v = rng->uniform() < p ? T{0} : keep;
  return g.mul(x, g.constant(std::move(m)));
}

template <std::floating_point T>
Var<T> multi_head_attention(Graph<T>& g, const typename T2pModel<T>::Attention& a, const Var<T>& xq,
                            const Var<T>& xkv, std::size_t batch, std::size_t heads, bool causal) {
  auto q = g.split_heads(linear(g, xq, a.wq, a.bq), batch, heads);
  auto k = g.split_heads(linear(g, xkv, a.wk, a.bk), batch, heads);
  auto v = g.split_heads(linear(g, xkv, a.wv, a.bv), batch, heads);
  const std::size_t sq = q.shape()[1], sk = k.shape()[1], dh = q.shape()[2];
  auto scores = g.scale(g.matmul(q, g.transpose(k)), static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
  if (causal) {
    std::vector<std::uint8_t> mask(sq * sk, 0);
    for (std::size_t i = 0; i < sq; ++i)
      for (std::size_t j = i + 1; j < sk; ++j) mask[i * sk + j] = 1;
    scores = g.masked_fill(scores, mask, Shape{sq, sk}, -std::numeric_limits<T>::infinity());
  }
  auto ctx = g.merge_heads(g.matmul(g.softmax(scores), v), batch);
  return linear(g, ctx, a.wo, a.bo);
}

}  // namespace detail

/**
 * Teacher-forced forward pass over a batch. Returns [B*128, 5K+1]: row
 * b*128+t holds step t of sequence b. Pass an rng to enable dropout.
 */
template <std::floating_point T>
Var<T> t2p_forward(Graph<T>& g, const T2pModel<T>& m, std::span<const Pose> poses,
                   std::span<const TextFeatures> texts, Rng* dropout_rng = nullptr) {
  const auto& c = m.config();
  if (poses.empty() || poses.size() != texts.size()) {
    throw std::invalid_argument("t2p_forward: need equal, non-zero numbers of poses and texts");
  }
  for (const auto& t : texts) check_feature_dim(t, c.d_text);
  const std::size_t B = poses.size(), S = c.seq_len, d = c.d_model;

  Tensor<T> in(Shape{B * S, 3}), not_first(Shape{B * S, 1}), first(Shape{B * S, 1});
  Tensor<T> text(Shape{B * kTextContext, c.d_text});
  for (std::size_t b = 0; b < B; ++b) {
    first[b * S] = T{1};
    for (std::size_t t = 1; t < S; ++t) {
      const auto& kp = poses[b][t - 1];
      const std::size_t r = b * S + t;
      in[r * 3] = static_cast<T>(kp.x());
      in[r * 3 + 1] = static_cast<T>(kp.y());
      in[r * 3 + 2] = kp.exists() ? T{1} : T{0};
      not_first[r] = T{1};
    }
    const auto src = texts[b].features.data();
    for (std::size_t i = 0; i < src.size(); ++i) text[b * kTextContext * c.d_text + i] = static_cast<T>(src[i]);
  }

  auto x = g.matmul(g.constant(std::move(in)), m.input_w());
  x = g.add(x, g.matmul(g.constant(std::move(not_first)), g.reshape(m.input_b(), Shape{1, d})));
  x = g.add(x, g.matmul(g.constant(std::move(first)), g.reshape(m.bos(), Shape{1, d})));
  x = g.reshape(g.add(g.reshape(x, Shape{B, S, d}), m.pos()), Shape{B * S, d});
  auto text_var = g.constant(std::move(text));

  for (const auto& blk : m.blocks()) {
    auto a = g.layer_norm(x, blk.ln1_g, blk.ln1_b);
    x = g.add(x, detail::dropout(g, detail::multi_head_attention(g, blk.self, a, a, B, c.n_heads, true), c.dropout,
                                 dropout_rng));
    auto cq = g.layer_norm(x, blk.ln2_g, blk.ln2_b);
    x = g.add(x, detail::dropout(g, detail::multi_head_attention(g, blk.cross, cq, text_var, B, c.n_heads, false),
                                 c.dropout, dropout_rng));
    auto f = g.layer_norm(x, blk.ln3_g, blk.ln3_b);
    f = detail::linear(g, g.gelu(detail::linear(g, f, blk.ff_w1, blk.ff_b1)), blk.ff_w2, blk.ff_b2);
    x = g.add(x, detail::dropout(g, f, c.dropout, dropout_rng));
  }
  x = g.layer_norm(x, m.lnf_g(), m.lnf_b());
  return detail::linear(g, x, m.head_w(), m.head_b());
}

template <std::floating_point T>
struct T2pLoss {
  Var<T> total;      ///< scalar: mean over B*128 steps of masked NLL + BCE
  Var<T> existence;  ///< scalar: the BCE part alone, for reweighting in training
  double nll = 0.0;  ///< NLL part of the same mean
  double bce = 0.0;  ///< BCE part of the same mean
};

/**
 * mean_{b,t} [ e_t * NLL(p_t | raw_t) + BCE(logit_t, e_t) ], the NLL
 * evaluated only on existing targets.
 */
template <std::floating_point T>
T2pLoss<T> t2p_loss_from_outputs(Graph<T>& g, const Var<T>& out, std::span<const Pose> poses, std::size_t k) {
  const std::size_t S = kNumSlots, w = gmm_raw_width(k), hw = w + 1;
  const std::size_t rows = poses.size() * S;
  if (out.shape() != Shape{rows, hw}) {
    throw std::invalid_argument("t2p_loss: outputs " + shape_str(out.shape()) + " do not match batch");
  }
  std::vector<std::size_t> raw_idx, logit_idx(rows);
  std::vector<Point2> targets;
  Tensor<T> labels(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& kp = poses[r / S][r % S];
    logit_idx[r] = r * hw + w;
    if (!kp.exists()) continue;
    labels[r] = T{1};
    targets.push_back({kp.x(), kp.y()});
    for (std::size_t j = 0; j < w; ++j) raw_idx.push_back(r * hw + j);
  }
  const T inv = T{1} / static_cast<T>(rows);
  auto logits = g.gather(out, std::move(logit_idx), Shape{rows});
  auto bce = g.scale(g.sum(g.sub(g.softplus(logits), g.mul(logits, g.constant(std::move(labels))))), inv);
  T2pLoss<T> res;
  res.existence = bce;
  res.bce = static_cast<double>(bce.item());
  if (targets.empty()) {
    res.total = bce;
    return res;
  }
  const std::size_t n = targets.size();
  auto raw = g.gather(out, std::move(raw_idx), Shape{n, w});
  auto nll = g.scale(g.sum(gmm_nll(g, raw, targets, k)), inv);
  res.nll = static_cast<double>(nll.item());
  res.total = g.add(nll, bce);
  return res;
}

template <std::floating_point T>
T2pLoss<T> t2p_loss(Graph<T>& g, const T2pModel<T>& m, std::span<const Pose> poses,
                    std::span<const TextFeatures> texts, Rng* dropout_rng = nullptr) {
  return t2p_loss_from_outputs(g, t2p_forward(g, m, poses, texts, dropout_rng), poses, m.config().k_mixtures);
}

/**
 * Cached single-sequence decoder. Each step feeds the previous keypoint (BOS
 * at step 0) and returns that step's head outputs; per-layer keys and values
 * are kept so a step costs O(t) attention work.
 */
template <std::floating_point T>
class IncrementalDecoder {
 public:
  IncrementalDecoder(const T2pModel<T>& model, const TextFeatures& text) : m_(model) {
    const auto& c = m_.config();
    check_feature_dim(text, c.d_text);
    const std::size_t d = c.d_model;
    std::vector<T> tx(text.features.size());
    for (std::size_t i = 0; i < tx.size(); ++i) tx[i] = static_cast<T>(text.features[i]);
    for (const auto& blk : m_.blocks()) {
      LayerCache lc;
      lc.text_k = affine(tx, kTextContext, blk.cross.wk, blk.cross.bk);
      lc.text_v = affine(tx, kTextContext, blk.cross.wv, blk.cross.bv);
      lc.self_k.reserve(c.seq_len * d);
      lc.self_v.reserve(c.seq_len * d);
      cache_.push_back(std::move(lc));
    }
  }

  std::size_t steps_done() const { return step_; }

  /// prev is ignored at step 0 (BOS).
  StepOutput step(const Keypoint& prev) {
    const auto& c = m_.config();
    if (step_ >= c.seq_len) throw std::out_of_range("IncrementalDecoder: all 128 steps already produced");
    const std::size_t d = c.d_model, H = c.n_heads, dh = d / H;
    std::vector<T> x(d);
    const auto pos = m_.pos().value().data().subspan(step_ * d, d);
    if (step_ == 0) {
      const auto bos = m_.bos().value().data();
      for (std::size_t j = 0; j < d; ++j) x[j] = bos[j] + pos[j];
    } else {
      const T in[3] = {static_cast<T>(prev.x()), static_cast<T>(prev.y()), prev.exists() ? T{1} : T{0}};
      x = affine(std::vector<T>(in, in + 3), 1, m_.input_w(), m_.input_b());
      for (std::size_t j = 0; j < d; ++j) x[j] += pos[j];
    }
    std::vector<T> a(d), scores;
    const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    auto attend = [&](const std::vector<T>& q, const std::vector<T>& K, const std::vector<T>& V, std::size_t n) {
      std::vector<T> ctx(d, T{0});
      scores.resize(n);
      for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t s = 0; s < n; ++s) {
          T dot{0};
          for (std::size_t j = 0; j < dh; ++j) dot += q[h * dh + j] * K[s * d + h * dh + j];
          scores[s] = dot * inv_sqrt;
        }
        kernels::softmax_row<T>(scores);
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t j = 0; j < dh; ++j) ctx[h * dh + j] += scores[s] * V[s * d + h * dh + j];
      }
      return ctx;
    };
    for (std::size_t l = 0; l < m_.blocks().size(); ++l) {
      const auto& blk = m_.blocks()[l];
      auto& lc = cache_[l];
      norm(x, blk.ln1_g, blk.ln1_b, a);
      const auto q = affine(a, 1, blk.self.wq, blk.self.bq);
      const auto k = affine(a, 1, blk.self.wk, blk.self.bk);
      const auto v = affine(a, 1, blk.self.wv, blk.self.bv);
      lc.self_k.insert(lc.self_k.end(), k.begin(), k.end());
      lc.self_v.insert(lc.self_v.end(), v.begin(), v.end());
      auto o = affine(attend(q, lc.self_k, lc.self_v, step_ + 1), 1, blk.self.wo, blk.self.bo);
      for (std::size_t j = 0; j < d; ++j) x[j] += o[j];
      norm(x, blk.ln2_g, blk.ln2_b, a);
      const auto cq = affine(a, 1, blk.cross.wq, blk.cross.bq);
      o = affine(attend(cq, lc.text_k, lc.text_v, kTextContext), 1, blk.cross.wo, blk.cross.bo);
      for (std::size_t j = 0; j < d; ++j) x[j] += o[j];
      norm(x, blk.ln3_g, blk.ln3_b, a);
      auto hdn = affine(a, 1, blk.ff_w1, blk.ff_b1);
      for (T& v2 : hdn) v2 = kernels::gelu(v2);
      o = affine(hdn, 1, blk.ff_w2, blk.ff_b2);
      for (std::size_t j = 0; j < d; ++j) x[j] += o[j];
    }
    norm(x, m_.lnf_g(), m_.lnf_b(), a);
    const auto head = affine(a, 1, m_.head_w(), m_.head_b());
    ++step_;
    StepOutput out;
    const std::size_t w = gmm_raw_width(c.k_mixtures);
    out.gmm_raw.assign(head.begin(), head.begin() + static_cast<std::ptrdiff_t>(w));
    out.exist_logit = static_cast<double>(head[w]);
    return out;
  }

 private:
  struct LayerCache {
    std::vector<T> self_k, self_v, text_k, text_v;
  };

  static std::vector<T> affine(const std::vector<T>& x, std::size_t rows, const Var<T>& w, const Var<T>& b) {
    const std::size_t in = w.shape()[0], out = w.shape()[1];
    std::vector<T> y(rows * out);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < out; ++j) y[r * out + j] = b.value()[j];
    kernels::gemm_nn(rows, in, out, x.data(), w.value().data().data(), y.data());
    return y;
  }

  static void norm(const std::vector<T>& x, const Var<T>& gmm, const Var<T>& beta, std::vector<T>& y) {
    kernels::layer_norm_row<T>(x, gmm.value().data(), beta.value().data(), T{1e-5}, y);
  }

  const T2pModel<T>& m_;
  std::vector<LayerCache> cache_;
  std::size_t step_ = 0;
};

/// All 128 teacher-forced step outputs through the cached decoder.
template <std::floating_point T>
std::vector<StepOutput> t2p_step_outputs(const T2pModel<T>& m, const Pose& pose, const TextFeatures& text) {
  IncrementalDecoder<T> dec(m, text);
  std::vector<StepOutput> out;
  out.reserve(kNumSlots);
  for (std::size_t t = 0; t < kNumSlots; ++t) out.push_back(dec.step(t == 0 ? Keypoint::absent() : pose[t - 1]));
  return out;
}

enum class ExistenceMode { kSample, kThreshold };

struct GenerateOptions {
  std::size_t n_candidates = kDefaultCandidates;
  ExistenceMode existence = ExistenceMode::kSample;
};

struct GenerationTrace {
  Pose pose;
  std::vector<StepOutput> steps;
};

/**
 * Autoregressive generation: per step, existence ~ Bernoulli(sigmoid(logit))
 * (or logit > 0 in threshold mode); an existing point is a tempered draw
 * from the step mixture, clamped to [0,1]^2, and is fed back as input.
 */
template <std::floating_point T>
GenerationTrace generate_traced(const T2pModel<T>& m, const TextFeatures& text, Temperature temp, Rng& rng,
                                const GenerateOptions& opt = {}) {
  IncrementalDecoder<T> dec(m, text);
  GenerationTrace tr;
  tr.steps.reserve(kNumSlots);
  Pose::Slots slots{};
  Keypoint prev;
  for (std::size_t t = 0; t < kNumSlots; ++t) {
    auto so = dec.step(prev);
    const double p_exist = kernels::sigmoid(so.exist_logit);
    const bool exists = opt.existence == ExistenceMode::kSample ? rng.bernoulli(p_exist) : so.exist_logit > 0.0;
    if (exists) {
      const Gmm2d dist{gmm_from_raw(so.gmm_raw, m.config().k_mixtures)};
      const auto pt = tempered_sample(dist, temp, opt.n_candidates, rng);
      slots[t] = Keypoint::present(std::clamp(pt[0], 0.0, 1.0), std::clamp(pt[1], 0.0, 1.0));
    }
    prev = slots[t];
    tr.steps.push_back(std::move(so));
  }
  tr.pose = Pose(slots);
  return tr;
}

template <std::floating_point T>
Pose generate(const T2pModel<T>& m, const TextFeatures& text, Temperature temp, Rng& rng,
              const GenerateOptions& opt = {}) {
  return generate_traced(m, text, temp, rng, opt).pose;
}

}  // namespace posegen
