#include <gtest/gtest.h>

#include <cmath>

#include "roixai/core/random.hpp"
#include "roixai/metrics/metrics.hpp"

namespace roixai {
namespace {

double pair_count_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  return wins / pairs;
}

// Per-window double loop with the window weights applied directly.
double naive_ssim(const std::vector<double>& x, const std::vector<double>& y, std::size_t H, std::size_t W) {
  const std::size_t n = 11;
  std::vector<double> w(n * n);
  double total_w = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double di = double(i) - 5.0, dj = double(j) - 5.0;
      w[i * n + j] = std::exp(-(di * di + dj * dj) / (2 * 1.5 * 1.5));
      total_w += w[i * n + j];
    }
  for (auto& v : w) v /= total_w;
  const double c1 = 1e-4, c2 = 9e-4;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t oy = 0; oy + n <= H; ++oy)
    for (std::size_t ox = 0; ox + n <= W; ++ox) {
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          mx += w[i * n + j] * x[(oy + i) * W + ox + j];
          my += w[i * n + j] * y[(oy + i) * W + ox + j];
        }
      double vx = 0, vy = 0, cxy = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double a = x[(oy + i) * W + ox + j] - mx, b = y[(oy + i) * W + ox + j] - my;
          vx += w[i * n + j] * a * a;
          vy += w[i * n + j] * b * b;
          cxy += w[i * n + j] * a * b;
        }
      sum += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return sum / double(count);
}

std::vector<double> random_image(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform();
  return v;
}

TEST(RocAuc, ConstructedCases) {
  EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, std::vector<int>{1, 0, 1, 0}), 0.5);
  EXPECT_EQ(roc_auc(std::vector<double>{0.8, 0.8, 0.3, 0.2}, std::vector<int>{1, 0, 1, 0}), 0.625);
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}), 0.0);
}

TEST(RocAuc, EqualsPairCountingOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(0, 60);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const bool coarse = trial % 2 == 0;  // coarse scores force many ties
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse ? double(rng.uniform_int(0, 4)) / 4.0 : rng.uniform();
      y[i] = rng.uniform() < 0.4;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_EQ(roc_auc(s, y), pair_count_auc(s, y)) << "trial " << trial;
  }
}

TEST(RocAuc, InvariantUnderIncreasingTransform) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(30), t(30);
    std::vector<int> y(30);
    for (std::size_t i = 0; i < 30; ++i) {
      s[i] = double(rng.uniform_int(0, 9)) / 10.0;
      t[i] = std::exp(3.0 * s[i]) - 7.0;
      y[i] = i % 3 == 0;
    }
    EXPECT_EQ(roc_auc(s, y), roc_auc(t, y));
  }
}

TEST(RocAuc, ComplementaryLabelsSumToOne) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(25);
    std::vector<int> y(25), flipped(25);
    for (std::size_t i = 0; i < 25; ++i) {
      s[i] = double(rng.uniform_int(0, 5));
      y[i] = i % 2;
      flipped[i] = 1 - y[i];
    }
    EXPECT_NEAR(roc_auc(s, y) + roc_auc(s, flipped), 1.0, 1e-12);
  }
}

TEST(RocAuc, Errors) {
  EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), std::invalid_argument);
  EXPECT_THROW(roc_auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), std::invalid_argument);
  EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 2}), std::invalid_argument);
  EXPECT_THROW(roc_auc(std::vector<double>{NAN, 0.2}, std::vector<int>{1, 0}), std::invalid_argument);
}

TEST(Accuracy, Examples) {
  EXPECT_EQ(accuracy(std::vector<double>{1, 0, 1}, std::vector<int>{1, 0, 1}), 1.0);
  EXPECT_EQ(accuracy(std::vector<double>{0, 1, 0}, std::vector<int>{1, 0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(accuracy(std::vector<double>{0.6, 0.4, 0.5}, std::vector<int>{1, 1, 0}), 1.0 / 3.0);
  EXPECT_EQ(accuracy(std::vector<double>{0.6, 0.4}, std::vector<int>{1, 1}, 0.3), 1.0);
  EXPECT_THROW(accuracy(std::vector<double>{}, std::vector<int>{}), std::invalid_argument);
}

TEST(Psnr, Examples) {
  std::vector<double> a(100, 0.5), b(100, 0.6);
  EXPECT_NEAR(psnr(a, b, 1.0), 20.0, 1e-9);
  EXPECT_EQ(psnr(a, a, 1.0), std::numeric_limits<double>::infinity());
  EXPECT_EQ(format_metric(psnr(a, a)), "inf");
  EXPECT_THROW(psnr(a, std::vector<double>(99, 0.5)), std::invalid_argument);
  EXPECT_THROW(psnr(a, b, 0.0), std::invalid_argument);
}

TEST(Psnr, MatchesDirectOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto x = random_image(256, seed), y = random_image(256, seed + 100);
    double mse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) mse += (x[i] - y[i]) * (x[i] - y[i]);
    mse /= double(x.size());
    EXPECT_NEAR(psnr(x, y, 2.0), 10.0 * std::log10(4.0 / mse), 1e-9);
  }
}

TEST(Psnr, DecreasesWithNoise) {
  const auto x = random_image(400, 1);
  const auto noise = random_image(400, 2);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 10; ++k) {
    std::vector<double> y(x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += 0.02 * k * (noise[i] - 0.5);
    const double p = psnr(x, y);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Ssim, ConstructedCases) {
  const auto x = random_image(32 * 32, 4);
  EXPECT_NEAR(ssim(x, x, 32, 32), 1.0, 1e-12);
  const std::vector<double> zero(16 * 16, 0.0), one(16 * 16, 1.0);
  EXPECT_NEAR(ssim(zero, one, 16, 16), 1e-4 / 1.0001, 1e-12);
  EXPECT_NEAR(ssim(zero, one, 16, 16), 9.999e-5, 1e-8);
}

TEST(Ssim, MatchesNaiveWindowOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t H = 16 + seed, W = 24 - seed;
    auto x = random_image(H * W, seed), y = random_image(H * W, seed + 50);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.7 * x[i] + 0.3 * y[i];
    EXPECT_NEAR(ssim(x, y, H, W), naive_ssim(x, y, H, W), 1e-6);
  }
}

TEST(Ssim, SymmetricAndBounded) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = random_image(20 * 20, seed), y = random_image(20 * 20, seed + 9);
    const double a = ssim(x, y, 20, 20);
    EXPECT_NEAR(a, ssim(y, x, 20, 20), 1e-9);
    EXPECT_GE(a, -1.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(Ssim, Errors) {
  const std::vector<double> small(10 * 10, 0.5);
  EXPECT_THROW(ssim(small, small, 10, 10), std::invalid_argument);
  SsimParams even;
  even.window = 10;
  EXPECT_THROW(ssim(small, small, 10, 10, even), std::invalid_argument);
  EXPECT_THROW(ssim(small, std::vector<double>(99), 10, 10), std::invalid_argument);
  EXPECT_NEAR(SsimParams{}.c1(), 1e-4, 1e-18);
  EXPECT_NEAR(SsimParams{}.c2(), 9e-4, 1e-18);
}

TEST(Ssim, StackAveragesSlices) {
  const auto x = random_image(2 * 16 * 16, 7);
  auto y = x;
  std::fill(y.begin() + 256, y.end(), 0.0);
  const double expected = (1.0 + ssim(std::span<const double>(x).subspan(256), std::span<const double>(y).subspan(256), 16, 16)) / 2;
  EXPECT_NEAR(ssim_stack(x, y, 2, 16, 16), expected, 1e-12);
}

TEST(MetricsReport, Validation) {
  MetricsReport r;
  r.psnr_db = std::numeric_limits<double>::infinity();
  EXPECT_NO_THROW(r.validate());
  r.auc = 0.7;
  EXPECT_THROW(r.validate(), std::invalid_argument);
  r.n_samples = 5;
  EXPECT_NO_THROW(r.validate());
  r.ssim = NAN;
  EXPECT_THROW(r.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace roixai
