#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "dhal/error.hpp"
#include "dhal/metrics.hpp"
#include "fixtures.hpp"

using namespace dhal;

namespace {

using Vec = std::vector<double>;

Vec random_depth(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(kDepthEpsilon, 1.0);
  Vec v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

std::vector<Vec> gaussian_set(std::mt19937_64& rng, int n, int dim, double mean, double sd) {
  std::normal_distribution<double> g(mean, sd);
  std::vector<Vec> out(n, Vec(dim));
  for (auto& v : out)
    for (auto& x : v) x = g(rng);
  return out;
}

}  // namespace

TEST(MapDepth, RangeAndClamp) {
  EXPECT_DOUBLE_EQ(map_depth(1.0), 1.0);
  EXPECT_DOUBLE_EQ(map_depth(0.0), 0.5);
  EXPECT_DOUBLE_EQ(map_depth(-1.0), kDepthEpsilon);
  EXPECT_DOUBLE_EQ(map_depth(2.0), 1.0);
}

TEST(PixelMetrics, HandFixtures) {
  const Vec gt{0.5, 0.5};
  EXPECT_NEAR(abs_diff(gt, Vec{0.4, 0.6}), 0.1, 1e-12);
  EXPECT_NEAR(rmse(gt, Vec{0.5, 0.7}), std::sqrt(0.02), 1e-12);
  EXPECT_NEAR(abs_rel(gt, Vec{0.4, 0.6}), 0.2, 1e-12);
  EXPECT_NEAR(l1_norm(gt, Vec{0.4, 0.6}), 0.2, 1e-12);
  EXPECT_NEAR(l2_norm(gt, Vec{0.5, 0.7}), 0.2, 1e-12);

  const Vec ones{1, 1, 1, 1};
  const Vec pred{1, 1.3, 1, 1};
  EXPECT_DOUBLE_EQ(threshold_accuracy(ones, pred, 1), 75.0);
  EXPECT_DOUBLE_EQ(threshold_accuracy(ones, pred, 2), 100.0);
  EXPECT_DOUBLE_EQ(threshold_accuracy(ones, pred, 3), 100.0);
}

TEST(PixelMetrics, IdenticalImages) {
  std::mt19937_64 rng(1);
  const auto y = random_depth(rng, 64);
  const auto m = pixel_metrics(y, y);
  EXPECT_EQ(m.abs_diff, 0.0);
  EXPECT_EQ(m.abs_rel, 0.0);
  EXPECT_EQ(m.l1_norm, 0.0);
  EXPECT_EQ(m.l2_norm, 0.0);
  EXPECT_EQ(m.rmse, 0.0);
  for (double d : m.delta) EXPECT_EQ(d, 100.0);
}

TEST(PixelMetrics, Errors) {
  EXPECT_THROW(abs_diff(Vec{}, Vec{}), ValidationError);
  EXPECT_THROW(rmse(Vec{1, 2}, Vec{1}), ValidationError);
  EXPECT_THROW(threshold_accuracy(Vec{0.0}, Vec{0.5}, 1), ValidationError);
  EXPECT_THROW(threshold_accuracy(Vec{0.5}, Vec{0.5}, 0), ValidationError);
}

TEST(PixelMetrics, DeltaMonotoneInK) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_depth(rng, 256);
    const auto b = random_depth(rng, 256);
    const double d1 = threshold_accuracy(a, b, 1);
    const double d2 = threshold_accuracy(a, b, 2);
    const double d3 = threshold_accuracy(a, b, 3);
    EXPECT_LE(d1, d2);
    EXPECT_LE(d2, d3);
    EXPECT_GE(d1, 0.0);
    EXPECT_LE(d3, 100.0);
  }
}

TEST(PixelMetrics, PermutationInvariant) {
  std::mt19937_64 rng(3);
  auto a = random_depth(rng, 100);
  auto b = random_depth(rng, 100);
  const auto before = pixel_metrics(a, b);
  std::vector<std::size_t> idx(100);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  Vec pa, pb;
  for (auto i : idx) {
    pa.push_back(a[i]);
    pb.push_back(b[i]);
  }
  const auto after = pixel_metrics(pa, pb);
  EXPECT_NEAR(before.abs_diff, after.abs_diff, 1e-12);
  EXPECT_NEAR(before.rmse, after.rmse, 1e-12);
  EXPECT_NEAR(before.l2_norm, after.l2_norm, 1e-12);
  EXPECT_EQ(before.delta, after.delta);
}

TEST(PixelMetrics, RmseBoundsAbsDiff) {
  // Jensen: mean|d| <= sqrt(mean d^2).
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_depth(rng, 50);
    const auto b = random_depth(rng, 50);
    EXPECT_LE(abs_diff(a, b), rmse(a, b) + 1e-15);
  }
}

TEST(Frechet, IdenticalSetsGiveZero) {
  std::mt19937_64 rng(5);
  const auto x = gaussian_set(rng, 200, 8, 0.0, 1.0);
  EXPECT_LE(frechet_distance(x, x), 1e-6);
}

TEST(Frechet, OneDimensionalClosedForm) {
  // {-1, 1} vs {0, 2}: means 0 and 1, unbiased variances 2 and 2 -> distance 1.
  const std::vector<Vec> a{{-1.0}, {1.0}};
  const std::vector<Vec> b{{0.0}, {2.0}};
  EXPECT_NEAR(frechet_distance(a, b), 1.0, 1e-6);
}

TEST(Frechet, OneDimensionalGaussianFormula) {
  std::mt19937_64 rng(6);
  const auto a = gaussian_set(rng, 500, 1, 0.0, 1.0);
  const auto b = gaussian_set(rng, 500, 1, 2.0, 3.0);
  auto moments = [](const std::vector<Vec>& s) {
    double m = 0;
    for (const auto& v : s) m += v[0];
    m /= s.size();
    double var = 0;
    for (const auto& v : s) var += (v[0] - m) * (v[0] - m);
    return std::make_pair(m, var / (s.size() - 1));
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double expected = (ma - mb) * (ma - mb) + va + vb - 2 * std::sqrt(va * vb);
  EXPECT_NEAR(frechet_distance(a, b), expected, 1e-6);
}

TEST(Frechet, SymmetricAndNonNegative) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = gaussian_set(rng, 50, 6, 0.0, 1.0);
    const auto b = gaussian_set(rng, 60, 6, 0.3, 1.5);
    const double ab = frechet_distance(a, b);
    EXPECT_GE(ab, 0.0);
    EXPECT_NEAR(ab, frechet_distance(b, a), 1e-6 * std::max(1.0, ab));
  }
}

TEST(Frechet, MeanShiftAddsSquaredNorm) {
  std::mt19937_64 rng(8);
  const auto a = gaussian_set(rng, 100, 4, 0.0, 1.0);
  auto b = a;
  for (auto& v : b) v[2] += 3.0;
  EXPECT_NEAR(frechet_distance(a, b), 9.0, 1e-6);
}

TEST(Frechet, Errors) {
  const std::vector<Vec> one{{1.0, 2.0}};
  const std::vector<Vec> two{{1.0, 2.0}, {0.0, 1.0}};
  const std::vector<Vec> other_dim{{1.0}, {2.0}};
  EXPECT_THROW(frechet_distance(one, two), ValidationError);
  EXPECT_THROW(frechet_distance(two, other_dim), ValidationError);
}

TEST(RandomProjectionExtractor, DeterministicAndSized) {
  RandomProjectionExtractor a, b, c(32, 16, 99);
  ImageTensor img(3, 64, 64, 0.2f);
  img.at(0, 10, 10) = -0.5f;
  EXPECT_EQ(a(img).size(), 32u);
  EXPECT_EQ(a(img), b(img));
  EXPECT_NE(a(img), c(img));
}

TEST(EvaluateSet, PassthroughIsPerfect) {
  const auto samples = dhal::testing::synthetic_pairs(6, 32, 3, 4);
  const auto r = evaluate_set(samples, [&](const ImageTensor& rgb) {
    for (const auto& s : samples)
      if (&s.rgb == &rgb || s.rgb.data == rgb.data) return s.depth;
    return rgb;
  });
  EXPECT_EQ(r.sample_count, 6u);
  EXPECT_EQ(r.abs_diff, 0.0);
  EXPECT_EQ(r.l1_norm, 0.0);
  EXPECT_EQ(r.l2_norm, 0.0);
  EXPECT_EQ(r.rmse, 0.0);
  for (double d : r.delta) EXPECT_EQ(d, 100.0);
  ASSERT_TRUE(r.fid.has_value());
  EXPECT_NEAR(*r.fid, 0.0, 1e-6);
}

TEST(EvaluateSet, SingleImageEqualsPerImageMetrics) {
  const auto samples = dhal::testing::synthetic_pairs(1, 32, 1, 4);
  auto gen = [](const ImageTensor& rgb) { return rgb; };
  const auto r = evaluate_set(samples, gen);
  const auto m = pixel_metrics(mapped_depth(samples[0].depth), mapped_depth(samples[0].rgb));
  EXPECT_DOUBLE_EQ(r.abs_diff, m.abs_diff);
  EXPECT_DOUBLE_EQ(r.rmse, m.rmse);
  EXPECT_DOUBLE_EQ(r.l1_norm, m.l1_norm);
  EXPECT_EQ(r.delta, m.delta);
  EXPECT_FALSE(r.fid.has_value());
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].name, samples[0].name);
}

TEST(EvaluateSet, ReportIsMeanOfRows) {
  const auto samples = dhal::testing::synthetic_pairs(5, 32, 5, 9);
  const auto r = evaluate_set(samples, [](const ImageTensor& rgb) { return rgb; });
  double sum = 0;
  for (const auto& row : r.rows) sum += row.metrics.rmse;
  EXPECT_NEAR(r.rmse, sum / 5.0, 1e-12);
}
