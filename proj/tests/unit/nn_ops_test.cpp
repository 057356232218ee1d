#include <gtest/gtest.h>

#include <cmath>

#include "layer_gradient_cases.hpp"
#include "roixai/nn/layers.hpp"
#include "support.hpp"

namespace roixai {
namespace {

using testing::random_tensor;

TEST(Conv2d, PointwiseIdentityKernel) {
  auto x = random_tensor<float>({2, 3, 5, 5}, 1);
  std::vector<float> w(9, 0.0f);
  for (int c = 0; c < 3; ++c) w[c * 3 + c] = 1.0f;
  auto wt = Tensor<float>::from({3, 3, 1, 1}, w);
  auto y = conv2d(x, wt, nullptr, 1, 0);
  EXPECT_EQ(y.vec(), x.vec());
}

TEST(Conv2d, OnesKernelOnOnesImage) {
  auto x = Tensor<float>::full({1, 1, 3, 3}, 1.0f);
  auto w = Tensor<float>::full({1, 1, 3, 3}, 1.0f);
  auto y = conv2d(x, w, nullptr, 1, 0);
  ASSERT_EQ(y.numel(), 1u);
  EXPECT_EQ(y.item(), 9.0f);
}

TEST(Conv2d, MatchesSlidingWindowOracle) {
  for (std::size_t stride : {1u, 2u}) {
    auto x = random_tensor<float>({2, 3, 8, 8}, 10 + stride);
    auto w = random_tensor<float>({4, 3, 3, 3}, 20 + stride);
    auto b = random_tensor<float>({4}, 30 + stride);
    auto y = conv2d(x, w, &b, stride, 1);
    std::size_t Ho = 0, Wo = 0;
    auto ref = testing::naive_conv2d(std::vector<double>(x.vec().begin(), x.vec().end()), 2, 3, 8, 8,
                                     std::vector<double>(w.vec().begin(), w.vec().end()), 4, 3,
                                     std::vector<double>(b.vec().begin(), b.vec().end()), stride, 1, Ho, Wo);
    EXPECT_EQ(y.shape(), (Shape{2, 4, Ho, Wo}));
    EXPECT_LE(testing::max_abs_diff(y.values(), ref), 1e-5);
  }
}

TEST(Conv2d, ExtentFormula) {
  auto y = conv2d(Tensor<float>::zeros({1, 1, 11, 9}), Tensor<float>::zeros({2, 1, 3, 3}), nullptr, 2, 1);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 6, 5}));
}

TEST(Conv2d, ChannelMismatchIsAnError) {
  EXPECT_THROW(conv2d(Tensor<float>::zeros({1, 2, 4, 4}), Tensor<float>::zeros({1, 3, 3, 3}), nullptr, 1, 1),
               std::invalid_argument);
}

TEST(ConvTranspose2d, ExtentFormula) {
  auto y = conv_transpose2d(Tensor<float>::zeros({1, 2, 4, 4}), Tensor<float>::zeros({2, 3, 2, 2}), nullptr, 2, 0);
  EXPECT_EQ(y.shape(), (Shape{1, 3, 8, 8}));
}

TEST(ConvTranspose2d, IsAdjointOfConvolution) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    // conv: 3 -> 4 channels, k3 s2 p1 on 9x9 gives 5x5.
    auto w = random_tensor<float>({4, 3, 3, 3}, 100 + seed);
    auto x = random_tensor<float>({2, 3, 9, 9}, 200 + seed);
    auto y = random_tensor<float>({2, 4, 5, 5}, 300 + seed);
    auto cx = conv2d(x, w, nullptr, 2, 1);
    auto ty = conv_transpose2d(y, w, nullptr, 2, 1);
    ASSERT_EQ(ty.shape(), x.shape());
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < cx.numel(); ++i) lhs += double(cx[i]) * y[i];
    for (std::size_t i = 0; i < x.numel(); ++i) rhs += double(x[i]) * ty[i];
    EXPECT_NEAR(lhs, rhs, 1e-4 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(ConvTranspose2d, ZeroInputGivesZeroOutput) {
  auto w = random_tensor<float>({2, 3, 2, 2}, 4);
  auto y = conv_transpose2d(Tensor<float>::zeros({1, 2, 4, 4}), w, nullptr, 2, 0);
  for (float v : y.vec()) EXPECT_EQ(v, 0.0f);
}

TEST(Upsample, ConstantStaysConstant) {
  auto y = upsample_bilinear(Tensor<float>::full({1, 2, 3, 3}, 0.7f), 3);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 9, 9}));
  for (float v : y.vec()) EXPECT_NEAR(v, 0.7f, 1e-7);
}

TEST(Upsample, FactorOneIsIdentity) {
  auto x = random_tensor<float>({1, 1, 4, 5}, 3);
  EXPECT_EQ(upsample_bilinear(x, 1).vec(), x.vec());
  EXPECT_THROW(upsample_bilinear(x, 0), std::invalid_argument);
}

TEST(Upsample, RampMatchesAlignCornersFormula) {
  // [[a, b], [c, d]] -> 4x4; output (i, j) samples at (i/3, j/3).
  const double a = 0.0, b = 1.0, c = 2.0, d = 3.0;
  auto y = upsample_bilinear(Tensor<double>::from({1, 1, 2, 2}, {a, b, c, d}), 2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double u = i / 3.0, v = j / 3.0;
      const double expect = (1 - u) * ((1 - v) * a + v * b) + u * ((1 - v) * c + v * d);
      EXPECT_NEAR(y[i * 4 + j], expect, 1e-12);
    }
  EXPECT_EQ(y[0], a);
  EXPECT_EQ(y[3], b);
  EXPECT_EQ(y[12], c);
  EXPECT_EQ(y[15], d);
}

TEST(Pool, GlobalAverageOfConstant) {
  auto y = global_avg_pool(Tensor<float>::full({2, 3, 4, 4}, 2.5f));
  EXPECT_EQ(y.shape(), (Shape{2, 3}));
  for (float v : y.vec()) EXPECT_EQ(v, 2.5f);
}

TEST(Pool, MaxOfTwoByTwo) {
  auto y = max_pool2d(Tensor<float>::from({1, 1, 2, 2}, {1, 2, 3, 4}), 2);
  EXPECT_EQ(y.item(), 4.0f);
}

TEST(Pool, MatchesWindowScanOracle) {
  auto x = random_tensor<double>({2, 3, 6, 6}, 9);
  const std::vector<double> xv(x.vec().begin(), x.vec().end());
  EXPECT_EQ(max_pool2d(x, 2).vec(), testing::naive_pool(xv, 6, 6, 6, 2, 2, true));
  EXPECT_LE(testing::max_abs_diff(avg_pool2d(x, 3, 3).values(), testing::naive_pool(xv, 6, 6, 6, 3, 3, false)), 1e-15);
}

TEST(Pool, WindowLargerThanInputIsAnError) {
  EXPECT_THROW(max_pool2d(Tensor<float>::zeros({1, 1, 2, 2}), 3), std::invalid_argument);
  EXPECT_THROW(avg_pool2d(Tensor<float>::zeros({1, 1, 2, 2}), 3), std::invalid_argument);
}

TEST(Pool, GlobalAverageEqualsFullWindowAverage) {
  auto x = random_tensor<float>({2, 3, 5, 5}, 12);
  auto g = global_avg_pool(x);
  auto a = avg_pool2d(x, 5);
  EXPECT_EQ(g.vec(), a.vec());
}

TEST(Pool, MaxTiesResolveToFirstIndex) {
  auto x = Tensor<double>::from({1, 1, 2, 2}, {1, 1, 1, 1}, true);
  backward(sum(max_pool2d(x, 2)));
  EXPECT_EQ(x.grad()[0], 1.0);
  EXPECT_EQ(x.grad()[1] + x.grad()[2] + x.grad()[3], 0.0);
}

TEST(Normalize, ConstantInputGivesZeros) {
  auto x = Tensor<float>::full({2, 3, 4, 4}, 0.8f);
  auto g = Tensor<float>::full({3}, 1.0f), b = Tensor<float>::zeros({3});
  auto rm = Tensor<float>::zeros({3}), rv = Tensor<float>::full({3}, 1.0f);
  const auto lx = Tensor<float>::full({4, 3}, -2.0f);
  for (const auto& y : {instance_norm(x, g, b), batch_norm(x, g, b, rm, rv, true), layer_norm(lx, g, b)})
    for (float v : y.vec()) EXPECT_EQ(v, 0.0f);
}

TEST(Normalize, InstanceGroupsHaveZeroMean) {
  auto x = random_tensor<float>({2, 3, 6, 6}, 14, 0, 5);
  auto y = instance_norm(x, Tensor<float>::full({3}, 1.0f), Tensor<float>::zeros({3}));
  for (std::size_t g = 0; g < 6; ++g) {
    double m = 0;
    for (std::size_t j = 0; j < 36; ++j) m += y[g * 36 + j];
    EXPECT_NEAR(m / 36, 0.0, 1e-5);
  }
}

// Direct per-group mean/variance computation.
std::vector<double> direct_normalize(const std::vector<double>& x, const std::vector<std::vector<std::size_t>>& groups) {
  std::vector<double> out(x.size());
  for (const auto& idx : groups) {
    double m = 0, v = 0;
    for (auto i : idx) m += x[i];
    m /= idx.size();
    for (auto i : idx) v += (x[i] - m) * (x[i] - m);
    v /= idx.size();
    for (auto i : idx) out[i] = (x[i] - m) / std::sqrt(v + 1e-5);
  }
  return out;
}

TEST(Normalize, MatchesDirectStatistics) {
  const std::size_t N = 2, C = 3, HW = 9;
  auto x = random_tensor<float>({N, C, 3, 3}, 15, -2, 3);
  const std::vector<double> xv(x.vec().begin(), x.vec().end());
  auto ones = Tensor<float>::full({C}, 1.0f), zeros = Tensor<float>::zeros({C});

  std::vector<std::vector<std::size_t>> inst, bn;
  for (std::size_t g = 0; g < N * C; ++g) {
    inst.emplace_back();
    for (std::size_t j = 0; j < HW; ++j) inst.back().push_back(g * HW + j);
  }
  for (std::size_t c = 0; c < C; ++c) {
    bn.emplace_back();
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t j = 0; j < HW; ++j) bn.back().push_back((n * C + c) * HW + j);
  }
  EXPECT_LE(testing::max_abs_diff(instance_norm(x, ones, zeros).values(), direct_normalize(xv, inst)), 1e-5);
  auto rm = Tensor<float>::zeros({C}), rv = Tensor<float>::full({C}, 1.0f);
  EXPECT_LE(testing::max_abs_diff(batch_norm(x, ones, zeros, rm, rv, true).values(), direct_normalize(xv, bn)), 1e-5);

  auto lx = random_tensor<float>({4, 3}, 16, -2, 3);
  std::vector<std::vector<std::size_t>> rows;
  for (std::size_t r = 0; r < 4; ++r) rows.push_back({r * 3, r * 3 + 1, r * 3 + 2});
  EXPECT_LE(testing::max_abs_diff(layer_norm(lx, ones, zeros).values(),
                                  direct_normalize(std::vector<double>(lx.vec().begin(), lx.vec().end()), rows)),
            1e-5);
}

TEST(Normalize, BatchNormRunningStatistics) {
  auto x = random_tensor<double>({4, 1, 2, 2}, 17);
  auto g = Tensor<double>::full({1}, 1.0), b = Tensor<double>::zeros({1});
  auto rm = Tensor<double>::zeros({1}), rv = Tensor<double>::full({1}, 1.0);
  batch_norm(x, g, b, rm, rv, true);
  double m = 0, v = 0;
  for (double e : x.vec()) m += e;
  m /= 16;
  for (double e : x.vec()) v += (e - m) * (e - m);
  EXPECT_NEAR(rm[0], 0.1 * m, 1e-12);
  EXPECT_NEAR(rv[0], 0.9 + 0.1 * v / 15, 1e-12);
  auto y = batch_norm(x, g, b, rm, rv, false);
  EXPECT_NEAR(y[0], (x[0] - rm[0]) / std::sqrt(rv[0] + 1e-5), 1e-12);
}

TEST(Attention, SingleTokenReturnsValueProjection) {
  ParameterStore<double> store;
  Rng rng(3);
  MultiHeadAttention<double> mha(store, "a", 8, 2, rng);
  auto x = random_tensor<double>({1, 1, 8}, 4);
  auto y = mha(x);
  auto expect = mha.output_projection()(mha.value_projection()(x));
  EXPECT_LE(testing::max_abs_diff(y.values(), std::vector<double>(expect.vec().begin(), expect.vec().end())), 1e-12);
}

TEST(Attention, RowsSumToOne) {
  auto q = random_tensor<float>({2, 5, 8}, 1), k = random_tensor<float>({2, 5, 8}, 2), v = random_tensor<float>({2, 5, 8}, 3);
  auto r = scaled_dot_product_attention(q, k, v, 4);
  ASSERT_EQ(r.weights.shape(), (Shape{8, 5, 5}));
  for (std::size_t row = 0; row < 40; ++row) {
    double s = 0;
    for (std::size_t j = 0; j < 5; ++j) s += r.weights[row * 5 + j];
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Attention, SingleHeadMatchesMatrixOracle) {
  auto q = random_tensor<double>({1, 3, 4}, 5), k = random_tensor<double>({1, 3, 4}, 6), v = random_tensor<double>({1, 3, 4}, 7);
  auto r = scaled_dot_product_attention(q, k, v, 1);
  const std::vector<double> Q(q.vec().begin(), q.vec().end()), K(k.vec().begin(), k.vec().end()),
      V(v.vec().begin(), v.vec().end());
  auto S = testing::naive_matmul(Q, testing::naive_transpose(K, 3, 4), 3, 4, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    double mx = -1e300, tot = 0;
    for (std::size_t j = 0; j < 3; ++j) mx = std::max(mx, S[i * 3 + j] / 2.0);
    for (std::size_t j = 0; j < 3; ++j) tot += S[i * 3 + j] = std::exp(S[i * 3 + j] / 2.0 - mx);
    for (std::size_t j = 0; j < 3; ++j) S[i * 3 + j] /= tot;
  }
  EXPECT_LE(testing::max_abs_diff(r.output.values(), testing::naive_matmul(S, V, 3, 3, 4)), 1e-5);
}

TEST(Attention, WidthMustDivideHeads) {
  auto q = Tensor<float>::zeros({1, 2, 6});
  EXPECT_THROW(scaled_dot_product_attention(q, q, q, 4), std::invalid_argument);
  ParameterStore<float> store;
  Rng rng(0);
  EXPECT_THROW(MultiHeadAttention<float>(store, "a", 6, 4, rng), std::invalid_argument);
}

TEST(Attention, MaskedKeysGetZeroWeight) {
  auto q = random_tensor<double>({1, 4, 4}, 8);
  const std::vector<std::uint8_t> mask{1, 0, 1, 0};
  auto r = scaled_dot_product_attention(q, q, q, 2, &mask);
  for (std::size_t row = 0; row < 8; ++row) {
    EXPECT_EQ(r.weights[row * 4 + 1], 0.0);
    EXPECT_EQ(r.weights[row * 4 + 3], 0.0);
  }
}

TEST(Dropout, EvaluationIsIdentity) {
  auto x = random_tensor<float>({3, 4}, 1);
  Rng rng(0);
  EXPECT_EQ(dropout(x, 0.5, false, rng).vec(), x.vec());
  EXPECT_THROW(dropout(x, 1.0, true, rng), std::invalid_argument);
}

TEST(Dropout, TrainingPreservesExpectation) {
  const double p = 0.3;
  const auto x = Tensor<double>::from({4}, {0.5, -1.0, 2.0, 3.0});
  Rng rng(42);
  const int draws = 10000;
  std::vector<double> s(4, 0), s2(4, 0);
  for (int d = 0; d < draws; ++d) {
    auto y = dropout(x, p, true, rng);
    for (int i = 0; i < 4; ++i) {
      s[i] += y[i];
      s2[i] += y[i] * y[i];
    }
  }
  for (int i = 0; i < 4; ++i) {
    const double m = s[i] / draws;
    const double se = std::sqrt((s2[i] / draws - m * m) / draws);
    EXPECT_LE(std::abs(m - x[i]), 3 * se) << i;
  }
}

TEST(LayerSpec, Validation) {
  LayerSpec s;
  s.kernel = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = LayerSpec{};
  s.dropout_rate = 1.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = LayerSpec{};
  s.kind = LayerKind::attention;
  s.out_channels = 10;
  s.heads = 3;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(LeakyRelu, NegativeSlope) {
  auto y = leaky_relu(Tensor<float>::from({2}, {-2.0f, 3.0f}));
  EXPECT_FLOAT_EQ(y[0], -0.02f);
  EXPECT_FLOAT_EQ(y[1], 3.0f);
}

class LayerGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(LayerGradient, MatchesFiniteDifferencesOverSeeds) {
  const auto cases = testing::layer_gradient_cases();
  const auto& c = cases.at(GetParam());
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_LE(c.run(seed * 7919 + 1), testing::kGradTolerance) << c.name << " seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(AllLayers, LayerGradient,
                         ::testing::Range<std::size_t>(0, testing::layer_gradient_cases().size()),
                         [](const auto& info) { return testing::layer_gradient_cases()[info.param].name; });

}  // namespace
}  // namespace roixai
