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
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "posegen/synth.hpp"
#include "posegen/trainer.hpp"
#include "test_util.hpp"

namespace posegen {
namespace {

T2pConfig tiny_t2p() {
  T2pConfig c;
  c.n_layers = 1;
  c.d_model = 16;
  c.n_heads = 2;
  c.k_mixtures = 2;
  return c;
}

TrainConfig quick(std::size_t steps, std::size_t batch) {
  TrainConfig c;
  c.steps = steps;
  c.batch_size = batch;
  c.learning_rate = 3e-3;
  c.seed = 3;
  return c;
}

const std::vector<PoseRecord>& corpus() {
  static const auto c = generate_corpus(1, 300).records;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // After one step m_hat = g and v_hat = g^2, so each weight moves by
  // lr * g / (|g| + eps).
  ParameterList<double> ps;
  auto w = ps.add("w", Tensor<double>(Shape{3}, {1.0, -2.0, 0.5}));
  auto g = w.node()->value.ensure_grad();
  g[0] = 4.0, g[1] = -0.01, g[2] = 0.0;
  Adam<double> opt(ps, 0.9, 0.999, 1e-8);
  opt.step(0.1);
  EXPECT_NEAR(w.value()[0], 1.0 - 0.1 * 4.0 / (4.0 + 1e-8), 1e-12);
  EXPECT_NEAR(w.value()[1], -2.0 + 0.1 * 0.01 / (0.01 + 1e-8), 1e-12);
  EXPECT_EQ(w.value()[2], 0.5);
}

TEST(Adam, SecondStepUsesBiasCorrection) {
  ParameterList<double> ps;
  auto w = ps.add("w", Tensor<double>(Shape{1}, {0.0}));
  Adam<double> opt(ps, 0.9, 0.999, 0.0);
  w.node()->value.ensure_grad()[0] = 1.0;
  opt.step(1.0);
  w.node()->value.ensure_grad()[0] = 3.0;
  opt.step(1.0);
  const double m = (0.9 * 0.1 + 0.1 * 3.0) / (1 - 0.81);
  const double v = (0.999 * 0.001 + 0.001 * 9.0) / (1 - 0.999 * 0.999);
  EXPECT_NEAR(w.value()[0], -1.0 - m / std::sqrt(v), 1e-12);
}

TEST(ClipGradNorm, RescalesOnlyAboveThreshold) {
  ParameterList<double> ps;
  auto a = ps.add("a", Tensor<double>(Shape{2}));
  auto b = ps.add("b", Tensor<double>(Shape{1}));
  a.node()->value.ensure_grad()[0] = 3.0;
  b.node()->value.ensure_grad()[0] = 4.0;
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 10.0), 5.0);
  EXPECT_DOUBLE_EQ(grad_norm(ps), 5.0);
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(grad_norm(ps), 1.0, 1e-12);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-12);
}

TEST(LearningRate, CosineSchedule) {
  TrainConfig c;
  c.steps = 101;
  c.learning_rate = 2.0;
  EXPECT_EQ(learning_rate_at(c, 50), 2.0);
  c.cosine_decay = true;
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 0), 2.0);
  EXPECT_NEAR(learning_rate_at(c, 50), 1.0, 1e-12);
  EXPECT_NEAR(learning_rate_at(c, 100), 0.0, 1e-12);
}

TEST(LearningRate, WarmupThenCosine) {
  TrainConfig c;
  c.steps = 110;
  c.learning_rate = 2.0;
  c.warmup_steps = 10;
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 0), 0.2);
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 4), 1.0);
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 60), 2.0);  // constant without decay
  c.cosine_decay = true;
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 9), 2.0);
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 10), 2.0);
  EXPECT_NEAR(learning_rate_at(c, 60), 1.0 + std::cos(std::numbers::pi * 50.0 / 99.0), 1e-12);
  EXPECT_NEAR(learning_rate_at(c, 109), 0.0, 1e-12);
  c.warmup_steps = 500;  // longer than the run: never leaves the ramp
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 109), 2.0 * 110.0 / 500.0);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.batch_size = 1;
  EXPECT_THROW(c.validate(2), std::invalid_argument);
  c.batch_size = 4;
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.learning_rate = 1e-3;
  c.existence_weight = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(SmoothedEnds, AveragesWindows) {
  std::vector<LossPoint> curve;
  for (std::size_t i = 0; i < 10; ++i) curve.push_back({i, static_cast<double>(i)});
  const auto e = smoothed_ends(curve, 3);
  EXPECT_DOUBLE_EQ(e.initial, 1.0);
  EXPECT_DOUBLE_EQ(e.final, 8.0);
  EXPECT_DOUBLE_EQ(smoothed_ends(curve, 50).initial, 4.5);
  EXPECT_THROW(smoothed_ends({}, 3), std::invalid_argument);
}

TEST(TrainT2p, ZeroStepsLeaveModelUnchanged) {
  const auto dir = testing::temp_dir("trainer_zero");
  T2pModel<float> m(tiny_t2p(), 5);
  const T2pModel<float> ref(tiny_t2p(), 5);
  const ToyTextEncoder enc;
  const auto res = train_t2p(quick(0, 4), corpus(), m, enc, {dir / "m.pgck", dir / "loss.csv", {}});
  EXPECT_TRUE(res.curve.empty());
  for (std::size_t k = 0; k < m.parameters().items().size(); ++k)
    EXPECT_EQ(m.parameters().items()[k].var.value(), ref.parameters().items()[k].var.value());
  const auto loaded = load_t2p(dir / "m.pgck");
  EXPECT_EQ(loaded.parameters().items()[3].var.value(), ref.parameters().items()[3].var.value());
  EXPECT_EQ(slurp(dir / "loss.csv"), "step,loss,nll,bce,grad_norm,lr\n");
}

TEST(TrainT2p, LossDecreasesAndGradientsAreClipped) {
  T2pModel<float> m(tiny_t2p(), 6);
  const ToyTextEncoder enc;
  const auto res = train_t2p(quick(80, 8), corpus(), m, enc);
  ASSERT_EQ(res.curve.size(), 80u);
  const auto e = smoothed_ends(res.curve, 10);
  EXPECT_LT(e.final, e.initial - 0.5);
  // The reported norm is pre-clipping; the applied update never exceeds the cap.
  ParameterList<float>& ps = m.parameters();
  ps.zero_grad();
  Graph<float> g;
  const std::vector<Pose> poses{corpus()[0].pose, corpus()[1].pose};
  const std::vector<TextFeatures> texts{enc.encode(corpus()[0].caption), enc.encode(corpus()[1].caption)};
  g.backward(t2p_loss(g, m, poses, texts).total);
  clip_grad_norm(ps, 1.0);
  EXPECT_LE(grad_norm(ps), 1.0 + 1e-6);
}

TEST(TrainT2p, ExistenceWeightChangesUpdatesButNotLoggedLoss) {
  const ToyTextEncoder enc;
  T2pModel<float> a(tiny_t2p(), 4), b(tiny_t2p(), 4);
  auto cfg = quick(3, 4);
  const auto plain = train_t2p(cfg, corpus(), a, enc);
  cfg.existence_weight = 5.0;
  const auto weighted = train_t2p(cfg, corpus(), b, enc);
  // Same batches and same starting point, so step 0 logs the same loss.
  EXPECT_EQ(plain.curve[0].loss, weighted.curve[0].loss);
  EXPECT_NE(plain.curve[2].loss, weighted.curve[2].loss);
  for (const auto& p : weighted.curve) EXPECT_NEAR(p.loss, p.term_a + p.term_b, 1e-5 * (1.0 + std::abs(p.loss)));
}

TEST(TrainT2p, DeterministicForSeed) {
  const ToyTextEncoder enc;
  T2pModel<float> a(tiny_t2p(), 7), b(tiny_t2p(), 7);
  const auto ra = train_t2p(quick(15, 4), corpus(), a, enc);
  const auto rb = train_t2p(quick(15, 4), corpus(), b, enc);
  for (std::size_t i = 0; i < ra.curve.size(); ++i) EXPECT_EQ(ra.curve[i].loss, rb.curve[i].loss);
  auto other = quick(15, 4);
  other.seed = 4;
  T2pModel<float> c(tiny_t2p(), 7);
  EXPECT_NE(train_t2p(other, corpus(), c, enc).curve.back().loss, ra.curve.back().loss);
}

TEST(TrainT2p, CheckpointRoundTripReproducesEvaluation) {
  const auto dir = testing::temp_dir("trainer_ckpt");
  const ToyTextEncoder enc;
  T2pModel<float> m(tiny_t2p(), 8);
  auto cfg = quick(12, 4);
  cfg.checkpoint_every = 5;
  train_t2p(cfg, corpus(), m, enc, {dir / "m.pgck", dir / "loss.csv", {}});
  EXPECT_TRUE(std::filesystem::exists(dir / "m.pgck.step5"));
  EXPECT_TRUE(std::filesystem::exists(dir / "m.pgck.step10.json"));
  EXPECT_FALSE(std::filesystem::exists(dir / "m.pgck.step12"));
  const auto side = load_sidecar(dir / "m.pgck");
  EXPECT_EQ(side["step"], 12);
  EXPECT_EQ(side["model_config"]["d_model"], 16);
  EXPECT_EQ(side["train_config"]["checkpoint_every"], 5);
  const auto loaded = load_t2p(dir / "m.pgck");
  const std::vector<PoseRecord> few(corpus().begin(), corpus().begin() + 6);
  EXPECT_EQ(t2p_eval_nll(loaded, few, enc).mean_nll, t2p_eval_nll(m, few, enc).mean_nll);
  std::filesystem::remove(dir / "m.pgck.json");
  EXPECT_THROW(load_t2p(dir / "m.pgck"), CheckpointError);
}

TEST(TrainT2p, NonFiniteLossRaises) {
  T2pModel<float> m(tiny_t2p(), 9);
  auto hb = m.head_b();
  hb.value()[0] = std::numeric_limits<float>::quiet_NaN();
  const ToyTextEncoder enc;
  try {
    train_t2p(quick(3, 2), corpus(), m, enc);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
  }
}

TEST(TrainT2p, RejectsBadInputs) {
  T2pModel<float> m(tiny_t2p(), 9);
  const ToyTextEncoder enc;
  EXPECT_THROW(train_t2p(quick(1, 2), {}, m, enc), std::invalid_argument);
  PrecomputedTextProvider wrong(8);
  EXPECT_THROW(train_t2p(quick(1, 2), corpus(), m, wrong), std::invalid_argument);
}

TEST(EvalNll, AgreesWithLossNllTerm) {
  const T2pModel<double> m(tiny_t2p(), 10);
  const ToyTextEncoder enc;
  const std::vector<PoseRecord> few(corpus().begin(), corpus().begin() + 3);
  std::vector<Pose> poses;
  std::vector<TextFeatures> texts;
  for (const auto& r : few) poses.push_back(r.pose), texts.push_back(enc.encode(r.caption));
  Graph<double> g(false);
  const double nll_term = t2p_loss(g, m, poses, texts).nll;
  const auto ev = t2p_eval_nll(m, few, enc, 2);
  EXPECT_NEAR(ev.mean_nll * ev.points, nll_term * 3 * kNumSlots, 1e-8);
}

// Face presence is a fair coin that the caption says nothing about, so the
// first face slot should come out near 0.5 after training. With the plain
// objective the sharp mixture gradients swamp this in a short run and the
// slot just copies its neighbour (p ~ 0.96); the existence weight fixes that.
TEST(TrainT2p, ExistenceIsCalibratedWhenTextIsUninformative) {
  Rng rng(21);
  std::vector<PoseRecord> recs;
  for (int i = 0; i < 200; ++i) {
    const SceneSpec spec{1, ArmState::kDown, Position::kCenter, i % 2 == 0, false};
    recs.emplace_back("a person", render_scene(spec, rng));
  }
  T2pModel<float> m(tiny_t2p(), 12);
  auto cfg = quick(400, 16);
  cfg.learning_rate = 1e-2;
  cfg.cosine_decay = true;
  cfg.existence_weight = 10.0;
  train_t2p(cfg, recs, m, ToyTextEncoder{});
  const auto text = encode_toy("a person");
  double p = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double z = t2p_step_outputs(m, recs[i].pose, text)[kFaceBegin].exist_logit;
    p += 1.0 / (1.0 + std::exp(-z)) / 20.0;
  }
  EXPECT_GE(p, 0.4);
  EXPECT_LE(p, 0.6);
}

TEST(GlobalGmm, RecoversSeparatedClusters) {
  Rng rng(11);
  std::vector<PoseRecord> recs;
  for (int i = 0; i < 40; ++i) {
    Pose::Slots s{};
    for (std::size_t j = 0; j < 10; ++j) s[j] = Keypoint::present(0.2 + 0.01 * rng.normal(), 0.2 + 0.01 * rng.normal());
    for (std::size_t j = 10; j < 40; ++j) s[j] = Keypoint::present(0.8 + 0.02 * rng.normal(), 0.7 + 0.02 * rng.normal());
    recs.emplace_back("x", Pose(s));
  }
  const auto p = fit_global_gmm(recs, 2, 100, 1);
  const std::size_t a = p.means[0][0] < p.means[1][0] ? 0 : 1, b = 1 - a;
  EXPECT_NEAR(p.weights[a], 0.25, 0.01);
  EXPECT_NEAR(p.means[a][0], 0.2, 0.005);
  EXPECT_NEAR(p.means[b][1], 0.7, 0.005);
  EXPECT_NEAR(p.scales[b][0], 0.02, 0.003);
  const auto ev = global_gmm_eval_nll(p, recs);
  EXPECT_EQ(ev.points, 1600u);
  // Entropy of the generating mixture: sum_c w_c * (ln(2 pi e sigma_c^2) - ln w_c).
  EXPECT_NEAR(ev.mean_nll, -4.7705, 0.05);
}

TEST(TrainClapp, DeterministicAndValidated) {
  const ToyTextEncoder enc;
  ClappModel<float> a(ClappConfig{kToyTextDim, 32, 16}, 1), b(ClappConfig{kToyTextDim, 32, 16}, 1);
  const auto ra = train_clapp(quick(20, 8), corpus(), a, enc);
  const auto rb = train_clapp(quick(20, 8), corpus(), b, enc);
  for (std::size_t i = 0; i < ra.curve.size(); ++i) EXPECT_EQ(ra.curve[i].loss, rb.curve[i].loss);
  EXPECT_LE(a.logit_scale_value(), static_cast<float>(kMaxLogitScale) + 1e-6f);
  EXPECT_THROW(train_clapp(quick(1, 1), corpus(), a, enc), std::invalid_argument);
  EXPECT_THROW(train_clapp(quick(1, 60), corpus(), a, enc), std::invalid_argument);  // only 52 captions
}

TEST(TrainClapp, DistinctCaptionBatches) {
  Rng rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    const auto idx = sample_distinct_caption_batch(corpus(), 16, rng);
    std::set<std::string> caps;
    for (auto i : idx) caps.insert(corpus()[i].caption);
    EXPECT_EQ(caps.size(), 16u);
  }
}

TEST(TrainClapp, LearnsToRetrieve) {
  const ToyTextEncoder enc;
  ClappModel<float> m(ClappConfig{kToyTextDim, 64, 32}, 2);
  auto cfg = quick(150, 16);
  cfg.learning_rate = 1e-3;
  const auto res = train_clapp(cfg, corpus(), m, enc);
  const auto e = smoothed_ends(res.curve, 10);
  EXPECT_LT(e.final, e.initial);
  const auto eval = generate_corpus(2, 128).records;
  const double acc = clapp_retrieval_accuracy(m, eval, enc, 64, 0);
  EXPECT_GT(acc, 0.1);  // chance is about 1/64 plus same-caption collisions
  EXPECT_THROW(clapp_retrieval_accuracy(m, std::vector<PoseRecord>(eval.begin(), eval.begin() + 10), enc),
               std::invalid_argument);
}

}  // namespace
}  // namespace posegen
