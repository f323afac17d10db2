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

#include <vector>

#include "oracles.hpp"
#include "posegen/kernels.hpp"
#include "posegen/rng.hpp"
#include "posegen/tensor.hpp"

namespace posegen {
namespace {

TEST(Tensor, ShapeAndStorage) {
  Tensor<float> t(Shape{2, 3}, 1.5f);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.dim(1), 3u);
  t.at(1, 2) = 4.0f;
  EXPECT_EQ(t[5], 4.0f);
  EXPECT_EQ(shape_str(t.shape()), "[2,3]");
}

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor<double>(Shape{2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  EXPECT_THROW(Tensor<double>(Shape{2, 2}).item(), std::invalid_argument);
  EXPECT_THROW(Tensor<double>(Shape{2, 2}).reshaped(Shape{3}), std::invalid_argument);
}

TEST(Tensor, ReshapeKeepsDataDropsGrad) {
  Tensor<double> t(Shape{2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  t.ensure_grad()[0] = 7.0;
  const auto r = t.reshaped(Shape{3, 2});
  EXPECT_EQ(r.shape(), (Shape{3, 2}));
  EXPECT_EQ(r.storage(), t.storage());
  EXPECT_FALSE(r.has_grad());
}

TEST(Tensor, CastRoundTrip) {
  Tensor<double> t(Shape{3}, std::vector<double>{0.5, -2.25, 8.0});
  EXPECT_EQ(t.cast<float>().cast<double>(), t);
}

TEST(Tensor, TrailingBroadcast) {
  EXPECT_TRUE(trailing_broadcastable({4, 3, 2}, {3, 2}));
  EXPECT_TRUE(trailing_broadcastable({4, 3, 2}, {1}));
  EXPECT_FALSE(trailing_broadcastable({4, 3, 2}, {4, 3}));
  EXPECT_FALSE(trailing_broadcastable({2}, {3, 2}));
}

TEST(Kernels, GemmVariantsAgreeWithNaiveProduct) {
  Rng rng(3);
  const std::size_t m = 5, k = 7, n = 4;
  std::vector<double> a(m * k), b(k * n), bt(n * k), at(k * m);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  kernels::transpose(k, n, b.data(), bt.data());
  kernels::transpose(m, k, a.data(), at.data());
  std::vector<double> ref(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) ref[i * n + j] += a[i * k + p] * b[p * n + j];
  std::vector<double> c1(m * n, 0.0), c2(m * n, 0.0), c3(m * n, 0.0);
  kernels::gemm_nn(m, k, n, a.data(), b.data(), c1.data());
  kernels::gemm_nt(m, k, n, a.data(), bt.data(), c2.data());
  kernels::gemm_tn(k, m, n, at.data(), b.data(), c3.data());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_NEAR(c1[i], ref[i], 1e-12);
    EXPECT_NEAR(c2[i], ref[i], 1e-12);
    EXPECT_NEAR(c3[i], ref[i], 1e-12);
  }
}

TEST(Kernels, GemmAccumulates) {
  const std::vector<double> a{1, 2}, b{3, 4};
  std::vector<double> c{10.0};
  kernels::gemm_nn<double>(1, 2, 1, a.data(), b.data(), c.data());
  EXPECT_DOUBLE_EQ(c[0], 21.0);
}

TEST(Kernels, GeluMatchesOracle) {
  for (std::size_t i = 0; i < oracles::kGeluX.size(); ++i)
    EXPECT_NEAR(kernels::gelu(oracles::kGeluX[i]), oracles::kGeluY[i], 1e-13);
}

TEST(Kernels, LayerNormMatchesOracle) {
  std::vector<double> x(oracles::kLayerNormX.begin(), oracles::kLayerNormX.end()), y(4), gamma(4, 1.0), beta(4, 0.0);
  kernels::layer_norm_row<double>(x, gamma, beta, 1e-5, y);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y[i], oracles::kLayerNormY[i], 1e-12);
}

TEST(Kernels, SoftmaxAndLogsumexpAreStable) {
  std::vector<double> v{1000.0, 1000.0, -1e300};
  EXPECT_NEAR(kernels::logsumexp<double>(v), 1000.0 + std::log(2.0), 1e-12);
  kernels::softmax_row<double>(v);
  EXPECT_NEAR(v[0], 0.5, 1e-15);
  EXPECT_EQ(v[2], 0.0);
}

TEST(Kernels, SigmoidAndSoftplusTails) {
  EXPECT_EQ(kernels::sigmoid(-800.0), 0.0);
  EXPECT_EQ(kernels::sigmoid(800.0), 1.0);
  EXPECT_NEAR(kernels::softplus(-40.0), std::exp(-40.0), 1e-25);
  EXPECT_NEAR(kernels::softplus(40.0), 40.0, 1e-12);
}

TEST(Rng, DerivedStreamsDifferAndRepeat) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  Rng a(derive_seed(5, 9)), b(derive_seed(5, 9));
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, IndexIsUnbiasedOnSmallRange) {
  Rng rng(11);
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 30000; ++i) ++counts[rng.index(3)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
  EXPECT_THROW(rng.index(0), std::invalid_argument);
}

TEST(Rng, NormalMoments) {
  Rng rng(2);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Rng, CategoricalSkipsZeroWeights) {
  Rng rng(4);
  const std::vector<double> w{0.0, 2.0, 0.0, 1.0};
  int seen[4] = {0, 0, 0, 0};
  for (int i = 0; i < 3000; ++i) ++seen[rng.categorical(w)];
  EXPECT_EQ(seen[0], 0);
  EXPECT_EQ(seen[2], 0);
  EXPECT_NEAR(seen[1] / 3000.0, 2.0 / 3.0, 0.03);
  EXPECT_THROW(rng.categorical(std::vector<double>{0.0, 0.0}), std::invalid_argument);
}

}  // namespace
}  // namespace posegen
