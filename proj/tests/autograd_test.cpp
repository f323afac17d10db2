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

#include "posegen/autograd.hpp"
#include "test_util.hpp"

namespace posegen {
namespace {

using testing::max_grad_rel_error;
using testing::random_tensor;
using Vars = std::vector<Var<double>>;

constexpr double kTol = 1e-6;

TEST(Autograd, ElementwiseBinaryWithBroadcast) {
  Rng rng(1);
  auto a = random_tensor({3, 4}, rng), b = random_tensor({4}, rng);
  for (auto& v : b.data()) v = 1.5 + std::abs(v);  // keep division well conditioned
  EXPECT_LT(max_grad_rel_error(
                [](Graph<double>& g, Vars& v) {
                  auto s = g.add(g.mul(v[0], v[1]), g.div(v[0], v[1]));
                  return g.sum(g.sub(s, g.mul(v[1], v[1])));
                },
                {a, b}),
            kTol);
}

TEST(Autograd, UnaryOps) {
  Rng rng(2);
  auto a = random_tensor({2, 5}, rng);
  auto pos = a;
  for (auto& v : pos.data()) v = 0.5 + std::abs(v);
  EXPECT_LT(max_grad_rel_error(
                [](Graph<double>& g, Vars& v) {
                  auto x = g.add(g.add(g.exp(v[0]), g.sigmoid(v[0])), g.add(g.softplus(v[0]), g.tanh(v[0])));
                  return g.sum(g.add(g.gelu(x), g.scale(g.add_scalar(v[0], 2.0), 0.3)));
                },
                {a}),
            kTol);
  EXPECT_LT(max_grad_rel_error([](Graph<double>& g, Vars& v) { return g.sum(g.add(g.log(v[0]), g.sqrt(v[0]))); },
                               {pos}),
            kTol);
}

TEST(Autograd, MatmulForms) {
  Rng rng(3);
  EXPECT_LT(max_grad_rel_error([](Graph<double>& g, Vars& v) { return g.sum(g.tanh(g.matmul(v[0], v[1]))); },
                               {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)}),
            kTol);
  EXPECT_LT(max_grad_rel_error([](Graph<double>& g, Vars& v) { return g.sum(g.tanh(g.matmul(v[0], v[1]))); },
                               {random_tensor({2, 3, 4}, rng), random_tensor({2, 4, 5}, rng)}),
            kTol);
  EXPECT_LT(max_grad_rel_error([](Graph<double>& g, Vars& v) { return g.sum(g.tanh(g.matmul(v[0], v[1]))); },
                               {random_tensor({2, 3, 4}, rng), random_tensor({4, 5}, rng)}),
            kTol);
  EXPECT_LT(max_grad_rel_error([](Graph<double>& g, Vars& v) { return g.sum(g.tanh(g.transpose(v[0]))); },
                               {random_tensor({2, 3, 4}, rng)}),
            kTol);
}

TEST(Autograd, MatmulShapeErrors) {
  Graph<double> g;
  auto a = make_constant(Tensor<double>(Shape{2, 3})), b = make_constant(Tensor<double>(Shape{2, 3}));
  EXPECT_THROW(g.matmul(a, b), std::invalid_argument);
}

TEST(Autograd, SoftmaxFamily) {
  Rng rng(4);
  auto a = random_tensor({3, 5}, rng), w = random_tensor({3, 5}, rng);
  EXPECT_LT(max_grad_rel_error([](Graph<double>& g, Vars& v) { return g.sum(g.mul(g.softmax(v[0]), v[1])); },
                               {a, w}),
            kTol);
  EXPECT_LT(max_grad_rel_error([](Graph<double>& g, Vars& v) { return g.sum(g.mul(g.log_softmax(v[0]), v[1])); },
                               {a, w}),
            kTol);
  EXPECT_LT(max_grad_rel_error(
                [](Graph<double>& g, Vars& v) {
                  auto l = g.logsumexp(v[0]);
                  return g.sum(g.mul(l, l));
                },
                {random_tensor({4, 3}, rng)}),
            kTol);
}

TEST(Autograd, Reductions) {
  Rng rng(5);
  auto a = random_tensor({3, 4}, rng);
  EXPECT_LT(max_grad_rel_error(
                [](Graph<double>& g, Vars& v) {
                  auto r = g.mul(g.sum_last(v[0]), g.mean_last(v[0]));
                  return g.add(g.sum(r), g.mean(g.mul(v[0], v[0])));
                },
                {a}),
            kTol);
}

TEST(Autograd, LayerNormAndL2Normalize) {
  Rng rng(6);
  auto x = random_tensor({4, 6}, rng), gm = random_tensor({6}, rng), bt = random_tensor({6}, rng),
       w = random_tensor({4, 6}, rng);
  EXPECT_LT(max_grad_rel_error(
                [](Graph<double>& g, Vars& v) { return g.sum(g.mul(g.layer_norm(v[0], v[1], v[2]), v[3])); },
                {x, gm, bt, w}),
            1e-5);
  EXPECT_LT(max_grad_rel_error([](Graph<double>& g, Vars& v) { return g.sum(g.mul(g.l2_normalize(v[0]), v[1])); },
                               {x, w}),
            kTol);
}

TEST(Autograd, IndexingAndMasking) {
  Rng rng(7);
  auto a = random_tensor({3, 4}, rng);
  EXPECT_LT(max_grad_rel_error(
                [](Graph<double>& g, Vars& v) {
                  auto p = g.gather_last(v[0], {3, 0, 0});
                  auto q = g.gather(v[0], {1, 1, 11, 5}, Shape{2, 2});
                  return g.add(g.sum(g.mul(p, p)), g.sum(g.exp(q)));
                },
                {a}),
            kTol);
  EXPECT_LT(max_grad_rel_error(
                [](Graph<double>& g, Vars& v) {
                  auto m = g.masked_fill(v[0], Graph<double>::Mask{0, 1, 0, 1}, Shape{4}, -3.0);
                  return g.sum(g.mul(g.softmax(g.mul(m, m)), v[1]));
                },
                {a, random_tensor({3, 4}, rng)}),
            1e-5);
  Graph<double> g;
  EXPECT_THROW(g.gather_last(make_constant(a), {4}), std::out_of_range);
}

TEST(Autograd, MaskedFillWithNegativeInfinityGivesZeroSoftmaxWeight) {
  Graph<double> g;
  auto a = make_parameter(Tensor<double>(Shape{1, 3}, std::vector<double>{0.1, 0.2, 0.3}));
  auto s = g.softmax(g.masked_fill(a, {0, 0, 1}, Shape{3}, -std::numeric_limits<double>::infinity()));
  EXPECT_EQ(s.value()[2], 0.0);
  g.backward(g.sum(g.mul(s, s)));
  EXPECT_EQ(a.grad()[2], 0.0);
  for (double v : a.grad()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Autograd, HeadSplitMergeRoundTrip) {
  Rng rng(8);
  auto a = random_tensor({6, 4}, rng);
  Graph<double> g;
  auto m = g.merge_heads(g.split_heads(make_constant(a), 2, 2), 2);
  EXPECT_EQ(m.value(), a);
  EXPECT_LT(max_grad_rel_error(
                [](Graph<double>& g2, Vars& v) {
                  auto s = g2.split_heads(v[0], 2, 2);
                  return g2.sum(g2.tanh(g2.merge_heads(g2.mul(s, s), 2)));
                },
                {a}),
            kTol);
}

TEST(Autograd, ReshapeGradient) {
  Rng rng(9);
  EXPECT_LT(max_grad_rel_error(
                [](Graph<double>& g, Vars& v) { return g.sum(g.mul(g.softmax(g.reshape(v[0], Shape{4, 3})), v[1])); },
                {random_tensor({3, 4}, rng), random_tensor({4, 3}, rng)}),
            kTol);
}

TEST(Autograd, NoRecordingModeBuildsNoTape) {
  Graph<double> g(false);
  auto p = make_parameter(Tensor<double>(Shape{2}, std::vector<double>{1, 2}));
  auto y = g.sum(g.mul(p, p));
  EXPECT_EQ(g.tape_size(), 0u);
  EXPECT_DOUBLE_EQ(y.item(), 5.0);
}

TEST(Autograd, ConstantsDoNotRecord) {
  Graph<double> g;
  auto c = make_constant(Tensor<double>(Shape{2}, std::vector<double>{1, 2}));
  g.sum(g.exp(c));
  EXPECT_EQ(g.tape_size(), 0u);
}

TEST(Autograd, SharedSubexpressionAccumulates) {
  Graph<double> g;
  auto x = make_parameter(Tensor<double>::scalar(3.0));
  auto y = g.mul(x, x);
  auto z = g.add(y, y);  // 2 x^2
  g.backward(z);
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(Autograd, BackwardNeedsScalarRoot) {
  Graph<double> g;
  auto x = make_parameter(Tensor<double>(Shape{2}));
  EXPECT_THROW(g.backward(g.exp(x)), std::invalid_argument);
}

}  // namespace
}  // namespace posegen
