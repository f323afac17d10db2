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


#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "posegen/t2p.hpp"
#include "test_util.hpp"

namespace posegen {
namespace {

T2pConfig tiny_config() {
  T2pConfig c;
  c.n_layers = 1;
  c.d_model = 16;
  c.n_heads = 2;
  c.k_mixtures = 2;
  return c;
}

Pose random_pose(Rng& rng, double p_exist = 0.6) {
  Pose::Slots s{};
  for (auto& kp : s)
    if (rng.bernoulli(p_exist)) kp = Keypoint::present(rng.uniform(), rng.uniform());
  return Pose(s);
}

Tensor<double> forward_values(const T2pModel<double>& m, const Pose& p, const TextFeatures& t) {
  Graph<double> g(false);
  return t2p_forward(g, m, std::span<const Pose>(&p, 1), std::span<const TextFeatures>(&t, 1)).value();
}

TEST(T2pConfig, ParameterCountMatchesClosedForm) {
  T2pConfig c;
  c.n_layers = 2;
  c.d_model = 64;
  EXPECT_EQ(t2p_param_count(c), 144159u);  // hand-expanded for this config
  EXPECT_EQ(T2pModel<float>(c, 1).count_params(), 144159u);
  EXPECT_EQ(t2p_param_count(T2pConfig{}), 1014047u);
  for (const auto& cfg : {T2pConfig{}, tiny_config()}) EXPECT_EQ(T2pModel<float>(cfg, 1).count_params(), t2p_param_count(cfg));
}

TEST(T2pConfig, ValidationAndJson) {
  auto c = tiny_config();
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.seq_len = 64;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.dropout = 0.1;
  const auto back = t2p_config_from_json(to_json(c));
  EXPECT_EQ(back.d_model, 16u);
  EXPECT_EQ(back.k_mixtures, 2u);
  EXPECT_DOUBLE_EQ(back.dropout, 0.1);
}

TEST(T2pForward, OutputShapeAndTextDimCheck) {
  const T2pModel<double> m(tiny_config(), 3);
  Rng rng(1);
  const std::vector<Pose> poses{random_pose(rng), random_pose(rng)};
  const std::vector<TextFeatures> texts{encode_toy("a"), encode_toy("b")};
  Graph<double> g(false);
  EXPECT_EQ(t2p_forward(g, m, std::span(poses), std::span(texts)).shape(), (Shape{256, tiny_config().head_width()}));
  PrecomputedTextProvider p(8);
  const std::vector<TextFeatures> wrong{features_from_matrix(Tensor<float>(Shape{1, 8}))};
  EXPECT_THROW(t2p_forward(g, m, std::span(poses).first(1), std::span(wrong)), std::invalid_argument);
}

TEST(T2pForward, IsCausal) {
  const T2pModel<double> m(tiny_config(), 5);
  Rng rng(2);
  const Pose a = random_pose(rng);
  const auto text = encode_toy("a person jumping");
  const std::size_t j = 40;
  Pose::Slots s = a.slots();
  s[j] = s[j].exists() ? Keypoint::absent() : Keypoint::present(0.3, 0.7);
  const Pose b(s);
  const auto ya = forward_values(m, a, text), yb = forward_values(m, b, text);
  const std::size_t hw = tiny_config().head_width();
  // Slot j is the input of step j + 1, so steps 0..j must not move.
  for (std::size_t t = 0; t <= j; ++t)
    for (std::size_t c = 0; c < hw; ++c) EXPECT_NEAR(ya[t * hw + c], yb[t * hw + c], 1e-12) << "step " << t;
  double diff = 0.0;
  for (std::size_t c = 0; c < hw; ++c) diff += std::abs(ya[(j + 1) * hw + c] - yb[(j + 1) * hw + c]);
  EXPECT_GT(diff, 1e-6);
}

TEST(T2pForward, DependsOnText) {
  const T2pModel<double> m(tiny_config(), 5);
  Rng rng(3);
  const Pose p = random_pose(rng);
  const auto ya = forward_values(m, p, encode_toy("sitting")), yb = forward_values(m, p, encode_toy("running"));
  double diff = 0.0;
  for (std::size_t i = 0; i < ya.size(); ++i) diff += std::abs(ya[i] - yb[i]);
  EXPECT_GT(diff, 1e-3);
}

TEST(IncrementalDecoder, MatchesFullForward) {
  T2pConfig c = tiny_config();
  c.n_layers = 2;
  const T2pModel<double> m(c, 7);
  Rng rng(4);
  const Pose p = random_pose(rng);
  const auto text = encode_toy("two people hugging");
  const auto full = forward_values(m, p, text);
  const auto steps = t2p_step_outputs(m, p, text);
  const std::size_t hw = c.head_width(), w = hw - 1;
  ASSERT_EQ(steps.size(), kNumSlots);
  for (std::size_t t = 0; t < kNumSlots; ++t) {
    for (std::size_t j = 0; j < w; ++j) EXPECT_NEAR(steps[t].gmm_raw[j], full[t * hw + j], 1e-10);
    EXPECT_NEAR(steps[t].exist_logit, full[t * hw + w], 1e-10);
  }
}

TEST(IncrementalDecoder, RejectsStepPastSequence) {
  const T2pModel<float> m(tiny_config(), 1);
  IncrementalDecoder<float> dec(m, encode_toy("x"));
  for (std::size_t t = 0; t < kNumSlots; ++t) dec.step(Keypoint::absent());
  EXPECT_EQ(dec.steps_done(), kNumSlots);
  EXPECT_THROW(dec.step(Keypoint::absent()), std::out_of_range);
}

TEST(T2pLoss, MatchesPerStepOracle) {
  // Mean over B*128 steps of BCE(existence) + [exists] * -ln p(x, y),
  // rebuilt from the cached decoder and the closed-form mixture density.
  const auto c = tiny_config();
  const T2pModel<double> m(c, 9);
  Rng rng(5);
  const std::vector<Pose> poses{random_pose(rng), random_pose(rng, 0.3)};
  const std::vector<TextFeatures> texts{encode_toy("waving"), encode_toy("kneeling down")};
  double want = 0.0;
  for (std::size_t b = 0; b < 2; ++b) {
    const auto steps = t2p_step_outputs(m, poses[b], texts[b]);
    for (std::size_t t = 0; t < kNumSlots; ++t) {
      const double z = steps[t].exist_logit;
      const auto& kp = poses[b][t];
      want += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - (kp.exists() ? z : 0.0);
      if (kp.exists()) want -= gmm_log_density(gmm_from_raw(steps[t].gmm_raw, c.k_mixtures), {kp.x(), kp.y()});
    }
  }
  want /= 2.0 * kNumSlots;
  Graph<double> g(false);
  const auto loss = t2p_loss(g, m, std::span(poses), std::span(texts));
  EXPECT_NEAR(loss.total.item(), want, 1e-9);
  EXPECT_NEAR(loss.nll + loss.bce, want, 1e-9);
}

TEST(T2pLoss, AllAbsentPoseHasOnlyExistenceTerm) {
  const T2pModel<double> m(tiny_config(), 9);
  const std::vector<Pose> poses{Pose{}};
  const std::vector<TextFeatures> texts{encode_toy("empty")};
  Graph<double> g(false);
  const auto loss = t2p_loss(g, m, std::span(poses), std::span(texts));
  EXPECT_EQ(loss.nll, 0.0);
  EXPECT_DOUBLE_EQ(loss.total.item(), loss.bce);
}

TEST(T2pLoss, GradientMatchesFiniteDifferences) {
  auto m = T2pModel<double>(tiny_config(), 11);
  Rng rng(6);
  const std::vector<Pose> poses{random_pose(rng), random_pose(rng)};
  const std::vector<TextFeatures> texts{encode_toy("stretching arms"), encode_toy("bowing")};
  auto loss_value = [&] {
    Graph<double> g(false);
    return t2p_loss(g, m, std::span(poses), std::span(texts)).total.item();
  };
  m.parameters().zero_grad();
  {
    Graph<double> g;
    g.backward(t2p_loss(g, m, std::span(poses), std::span(texts)).total);
  }
  // Every tensor, a handful of coordinates each.
  double worst = 0.0;
  const double h = 1e-6;
  for (const auto& item : m.parameters().items()) {
    auto var = item.var;
    auto& vals = var.value();
    for (int trial = 0; trial < 4; ++trial) {
      const std::size_t i = rng.index(vals.size());
      const double orig = vals[i];
      vals[i] = orig + h;
      const double fp = loss_value();
      vals[i] = orig - h;
      const double fm = loss_value();
      vals[i] = orig;
      const double fd = (fp - fm) / (2 * h);
      const double err = std::abs(var.grad()[i] - fd) / std::max(1e-4, std::abs(fd));
      worst = std::max(worst, err);
      EXPECT_LT(err, 1e-4) << item.name << "[" << i << "] tape " << var.grad()[i] << " fd " << fd;
    }
  }
  RecordProperty("worst_rel_error", std::to_string(worst));
}

TEST(T2pLoss, BatchIsMeanOfSingles) {
  const T2pModel<double> m(tiny_config(), 13);
  Rng rng(7);
  const std::vector<Pose> poses{random_pose(rng), random_pose(rng)};
  const std::vector<TextFeatures> texts{encode_toy("a"), encode_toy("b")};
  Graph<double> g(false);
  const double both = t2p_loss(g, m, std::span(poses), std::span(texts)).total.item();
  const double a = t2p_loss(g, m, std::span(poses).first(1), std::span(texts).first(1)).total.item();
  const double b = t2p_loss(g, m, std::span(poses).last(1), std::span(texts).last(1)).total.item();
  EXPECT_NEAR(both, 0.5 * (a + b), 1e-10);
}

TEST(T2pForward, DropoutOnlyWithRng) {
  auto c = tiny_config();
  c.dropout = 0.3;
  const T2pModel<double> m(c, 15);
  Rng rng(8);
  const std::vector<Pose> poses{random_pose(rng)};
  const std::vector<TextFeatures> texts{encode_toy("walking")};
  Graph<double> g(false);
  const double a = t2p_loss(g, m, std::span(poses), std::span(texts)).total.item();
  const double b = t2p_loss(g, m, std::span(poses), std::span(texts)).total.item();
  Rng drop(1);
  const double d = t2p_loss(g, m, std::span(poses), std::span(texts), &drop).total.item();
  EXPECT_EQ(a, b);
  EXPECT_NE(a, d);
}

TEST(Generate, DeterministicAndInUnitSquare) {
  const T2pModel<float> m(tiny_config(), 17);
  const auto text = encode_toy("a person dancing");
  Rng r1(21), r2(21), r3(22);
  const GenerateOptions opt{64, ExistenceMode::kSample};
  const Pose a = generate(m, text, Temperature(0.3), r1, opt);
  const Pose b = generate(m, text, Temperature(0.3), r2, opt);
  const Pose c = generate(m, text, Temperature(0.3), r3, opt);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (std::size_t t = 0; t < kNumSlots; ++t) {
    if (!a[t].exists()) continue;
    EXPECT_GE(a[t].x(), 0.0);
    EXPECT_LE(a[t].x(), 1.0);
    EXPECT_GE(a[t].y(), 0.0);
    EXPECT_LE(a[t].y(), 1.0);
  }
}

TEST(Generate, TraceFeedsBackGeneratedPoints) {
  const T2pModel<double> m(tiny_config(), 19);
  const auto text = encode_toy("squatting");
  Rng rng(23);
  const auto tr = generate_traced(m, text, Temperature(1.0), rng, {32, ExistenceMode::kThreshold});
  // Teacher-forcing the generated pose must reproduce the traced outputs.
  const auto steps = t2p_step_outputs(m, tr.pose, text);
  for (std::size_t t = 0; t < kNumSlots; ++t) {
    EXPECT_EQ(tr.steps[t].exist_logit, steps[t].exist_logit);
    EXPECT_EQ(tr.pose[t].exists(), steps[t].exist_logit > 0.0);
  }
}

}  // namespace
}  // namespace posegen
