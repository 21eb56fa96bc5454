#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "dhal/error.hpp"
#include "dhal/losses.hpp"
#include "fixtures.hpp"

using namespace dhal;
using dhal::testing::make_tensor;

namespace {

Tensor<double> constant(int c, int h, int w, double v) { return Tensor<double>(c, h, w, v); }

Tensor<double> random_tensor(int c, int h, int w, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  Tensor<double> t(c, h, w);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data) v = u(rng);
  return t;
}

// Central differences of a scalar loss w.r.t. every element of x.
void expect_gradient(Tensor<double> x, const std::function<double(const Tensor<double>&)>& f,
                     const Tensor<double>& analytic) {
  ASSERT_TRUE(x.same_shape(analytic));
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x.data[i];
    x.data[i] = saved + h;
    const double up = f(x);
    x.data[i] = saved - h;
    const double down = f(x);
    x.data[i] = saved;
    EXPECT_NEAR(analytic.data[i], (up - down) / (2 * h), 1e-7) << "element " << i;
  }
}

}  // namespace

TEST(GenAdvLoss, Examples) {
  EXPECT_DOUBLE_EQ(gen_adv_loss(constant(1, 2, 2, 1.0)), 0.0);
  EXPECT_DOUBLE_EQ(gen_adv_loss(constant(1, 2, 2, 0.0)), 0.5);
  EXPECT_DOUBLE_EQ(gen_adv_loss(make_tensor<double>(1, 1, 2, {1.0, 0.0})), 0.25);
}

TEST(DiscLoss, Examples) {
  EXPECT_DOUBLE_EQ(disc_loss(constant(1, 2, 2, 1.0), constant(1, 2, 2, 0.0)), 0.0);
  EXPECT_DOUBLE_EQ(disc_loss(constant(1, 2, 2, 0.0), constant(1, 2, 2, 1.0)), 1.0);
  EXPECT_DOUBLE_EQ(disc_loss(constant(1, 2, 2, 0.5), constant(1, 2, 2, 0.5)), 0.25);
}

TEST(DiscLoss, ShapeMismatchThrows) {
  EXPECT_THROW(disc_loss(constant(1, 2, 2, 0.0), constant(1, 4, 4, 0.0)), ValidationError);
}

TEST(PixelLoss, Examples) {
  const auto a = make_tensor<double>(1, 1, 2, {0.3, -0.7});
  EXPECT_DOUBLE_EQ(pixel_loss(a, a), 0.0);
  EXPECT_DOUBLE_EQ(pixel_loss(constant(3, 2, 2, -1.0), constant(3, 2, 2, 1.0)), 2.0);
  EXPECT_DOUBLE_EQ(pixel_loss(make_tensor<double>(1, 1, 2, {0.0, 0.5}),
                              make_tensor<double>(1, 1, 2, {0.5, 0.5})),
                   0.25);
  EXPECT_THROW(pixel_loss(constant(3, 2, 2, 0), constant(1, 2, 2, 0)), ValidationError);
}

TEST(CycleLoss, Examples) {
  std::mt19937_64 rng(3);
  const auto x = random_tensor(3, 4, 4, rng);
  EXPECT_DOUBLE_EQ(cycle_loss(x, x), 0.0);
  auto shifted = x;
  for (auto& v : shifted.data) v += 0.1;
  EXPECT_NEAR(cycle_loss(x, shifted), 0.1, 1e-12);
  EXPECT_DOUBLE_EQ(cycle_loss(make_tensor<double>(1, 2, 2, {0, 1, -1, 0}), constant(1, 2, 2, 0.0)), 0.5);
  EXPECT_THROW(cycle_loss(constant(3, 2, 2, 0), constant(3, 2, 3, 0)), ValidationError);
}

TEST(TeacherTotal, Examples) {
  LossWeights w;
  const auto ones = constant(1, 2, 2, 1.0);
  const auto depth = constant(3, 2, 2, 0.2);
  EXPECT_DOUBLE_EQ(teacher_total(ones, depth, depth, w), 0.0);

  // adv = 0.25 from scores [1, 0]; pixel = 0.1 from a constant offset.
  const auto scores = make_tensor<double>(1, 1, 2, {1.0, 0.0});
  auto pred = depth;
  for (auto& v : pred.data) v += 0.1;
  EXPECT_NEAR(teacher_total(scores, depth, pred, w), 1.25, 1e-12);

  w.lambda_pixel = 0.0;
  EXPECT_DOUBLE_EQ(teacher_total(scores, depth, pred, w), gen_adv_loss(scores));
}

TEST(StudentTotal, Examples) {
  LossWeights w;
  const auto ones = constant(1, 2, 2, 1.0);
  const auto rgb = constant(3, 2, 2, 0.4);
  EXPECT_DOUBLE_EQ(student_total(ones, ones, rgb, rgb, w), 0.0);

  const auto zeros = constant(1, 2, 2, 0.0);  // adv = 0.5 per branch
  auto rec = rgb;
  for (auto& v : rec.data) v += 0.2;
  EXPECT_NEAR(student_total(zeros, zeros, rgb, rec, w), 2.0, 1e-12);

  w.lambda_cyc = 0.0;
  EXPECT_DOUBLE_EQ(student_total(zeros, ones, rgb, rec, w), gen_adv_loss(zeros) + gen_adv_loss(ones));
}

TEST(LossWeights, NegativeWeightRejected) {
  EXPECT_THROW((LossWeights{-1.0, 5.0}.validate()), ValidationError);
  EXPECT_THROW((LossWeights{10.0, -0.5}.validate()), ValidationError);
  EXPECT_NO_THROW((LossWeights{0.0, 0.0}.validate()));
}

TEST(LossProperties, NonNegativeAndZeroAtOptimum) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_tensor(1, 2, 2, rng, -3, 3);
    const auto b = random_tensor(1, 2, 2, rng, -3, 3);
    EXPECT_GE(gen_adv_loss(a), 0.0);
    EXPECT_GE(disc_loss(a, b), 0.0);
    EXPECT_GE(pixel_loss(a, b), 0.0);
    EXPECT_GE(cycle_loss(a, b), 0.0);
    EXPECT_DOUBLE_EQ(pixel_loss(a, a), 0.0);
  }
}

TEST(LossProperties, TotalsAreLinearInWeights) {
  std::mt19937_64 rng(5);
  const auto scores = random_tensor(1, 2, 2, rng);
  const auto scores_rgb = random_tensor(1, 2, 2, rng);
  const auto a = random_tensor(3, 4, 4, rng);
  const auto b = random_tensor(3, 4, 4, rng);
  for (double lambda : {0.0, 1.0, 2.5, 10.0, 40.0}) {
    LossWeights w{lambda, lambda};
    EXPECT_NEAR(teacher_total(scores, a, b, w), gen_adv_loss(scores) + lambda * pixel_loss(a, b), 1e-12);
    EXPECT_NEAR(student_total(scores, scores_rgb, a, b, w),
                gen_adv_loss(scores) + gen_adv_loss(scores_rgb) + lambda * cycle_loss(a, b), 1e-12);
  }
}

TEST(LossGradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = random_tensor(1, 2, 2, rng, -2, 2);
    const auto r = random_tensor(1, 2, 2, rng, -2, 2);
    expect_gradient(s, [](const Tensor<double>& x) { return gen_adv_loss(x); }, gen_adv_loss_grad(s));
    const auto [g_real, g_fake] = disc_loss_grad(r, s);
    expect_gradient(r, [&](const Tensor<double>& x) { return disc_loss(x, s); }, g_real);
    expect_gradient(s, [&](const Tensor<double>& x) { return disc_loss(r, x); }, g_fake);

    // Away from the |x| kink at pred == gt.
    const auto gt = random_tensor(3, 2, 2, rng);
    const auto pred = random_tensor(3, 2, 2, rng);
    expect_gradient(pred, [&](const Tensor<double>& x) { return pixel_loss(gt, x); },
                    pixel_loss_grad(gt, pred));
    expect_gradient(pred, [&](const Tensor<double>& x) { return cycle_loss(gt, x); },
                    cycle_loss_grad(gt, pred));
  }
}

TEST(LossGradients, ZeroAtCoincidentPixels) {
  const auto a = make_tensor<double>(1, 1, 2, {0.3, 0.5});
  const auto b = make_tensor<double>(1, 1, 2, {0.3, 0.7});
  const auto g = pixel_loss_grad(a, b);
  EXPECT_EQ(g.data[0], 0.0);
  EXPECT_DOUBLE_EQ(g.data[1], 0.5);
}
