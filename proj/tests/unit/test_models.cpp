#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dhal/error.hpp"
#include "dhal/models.hpp"
#include "gradcheck.hpp"

using namespace dhal;

namespace {

template <typename Model>
void zero_all(Model& m) {
  for (auto* p : m.parameters()) std::fill(p->value.begin(), p->value.end(), 0);
}

template <typename Model>
bool same_parameters(Model& a, Model& b) {
  auto pa = a.parameters();
  auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->value != pb[i]->value) return false;
  }
  return true;
}

ImageTensor random_rgb(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  ImageTensor t(3, size, size);
  for (auto& v : t.data) v = u(rng);
  return t;
}

}  // namespace

TEST(ParameterCount, FullSizeModelsMatchLayerTable) {
  EXPECT_EQ(generator_parameter_count(GeneratorShape{}), 7837699u);
  EXPECT_EQ(discriminator_parameter_count(DiscriminatorShape{}), 1711809u);
  Generator<float> g;
  Discriminator<float> d;
  EXPECT_EQ(nn::parameter_count(g.parameters()), 7837699u);
  EXPECT_EQ(nn::parameter_count(d.parameters()), 1711809u);
}

TEST(ParameterCount, ClosedFormMatchesInstantiatedModels) {
  for (int base : {2, 4, 8}) {
    for (int blocks : {0, 1, 3}) {
      const auto shape = GeneratorShape::with_base(base, blocks);
      Generator<float> g(shape);
      EXPECT_EQ(nn::parameter_count(g.parameters()), generator_parameter_count(shape));
    }
    const auto dshape = DiscriminatorShape::with_base(base);
    Discriminator<float> d(dshape);
    EXPECT_EQ(nn::parameter_count(d.parameters()), discriminator_parameter_count(dshape));
  }
}

TEST(Generator, ShapeAndRange) {
  auto g = init_generator<float>(GeneratorShape::with_base(8, 2), 1);
  for (int size : {128, 64}) {
    const auto y = g.forward(random_rgb(size, 2));
    EXPECT_EQ(y.channels, 3);
    EXPECT_EQ(y.height, size);
    EXPECT_EQ(y.width, size);
    for (float v : y.data) {
      EXPECT_GT(v, -1.f);
      EXPECT_LT(v, 1.f);
    }
  }
}

TEST(Generator, FullSizeRangeOn128) {
  auto g = init_generator<float>(GeneratorShape{}, 4);
  const auto y = g.forward(random_rgb(128, 5));
  ASSERT_EQ(y.height, 128);
  for (float v : y.data) ASSERT_TRUE(v > -1.f && v < 1.f);
}

TEST(Generator, ZeroWeightsGiveZeroOutput) {
  Generator<float> g(GeneratorShape::with_base(4, 1));
  zero_all(g);
  const auto y = g.forward(random_rgb(32, 9));
  for (float v : y.data) EXPECT_EQ(v, 0.f);
}

TEST(Generator, RejectsBadInput) {
  auto g = init_generator<float>(GeneratorShape::with_base(4, 1), 1);
  EXPECT_THROW(g.forward(ImageTensor(1, 32, 32)), ValidationError);
  EXPECT_THROW(g.forward(ImageTensor(3, 30, 30)), ValidationError);
}

TEST(Discriminator, PatchGridSize) {
  auto d = init_discriminator<float>(DiscriminatorShape::with_base(8), 1);
  EXPECT_EQ(DiscriminatorShape{}.downsample_factor(), 32);
  const auto s128 = d.forward(random_rgb(128, 1));
  EXPECT_EQ(s128.channels, 1);
  EXPECT_EQ(s128.height, 4);
  EXPECT_EQ(s128.width, 4);
  const auto s64 = d.forward(random_rgb(64, 1));
  EXPECT_EQ(s64.height, 2);
  EXPECT_EQ(s64.width, 2);
}

TEST(Discriminator, ZeroWeightsGiveZeroScores) {
  Discriminator<float> d(DiscriminatorShape::with_base(4));
  zero_all(d);
  for (float v : d.forward(random_rgb(64, 3)).data) EXPECT_EQ(v, 0.f);
}

TEST(Discriminator, RejectsBadInput) {
  auto d = init_discriminator<float>(DiscriminatorShape::with_base(4), 1);
  EXPECT_THROW(d.forward(ImageTensor(3, 48, 48)), ValidationError);
  EXPECT_THROW(d.forward(ImageTensor(2, 64, 64)), ValidationError);
}

TEST(Init, SeedDeterminism) {
  const auto shape = GeneratorShape::with_base(4, 2);
  auto a = init_generator<float>(shape, 42);
  auto b = init_generator<float>(shape, 42);
  auto c = init_generator<float>(shape, 43);
  EXPECT_TRUE(same_parameters(a, b));
  EXPECT_FALSE(same_parameters(a, c));
  auto da = init_discriminator<float>(DiscriminatorShape::with_base(4), 42);
  auto db = init_discriminator<float>(DiscriminatorShape::with_base(4), 42);
  auto dc = init_discriminator<float>(DiscriminatorShape::with_base(4), 7);
  EXPECT_TRUE(same_parameters(da, db));
  EXPECT_FALSE(same_parameters(da, dc));
}

TEST(Init, WeightStatistics) {
  auto g = init_generator<float>(GeneratorShape{}, 3);
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (auto* p : g.parameters()) {
    if (p->shape.size() == 1) {
      for (float v : p->value) EXPECT_EQ(v, 0.f);
      continue;
    }
    for (float v : p->value) {
      sum += v;
      sq += static_cast<double>(v) * v;
      ++n;
    }
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.0, 1e-4);
  EXPECT_NEAR(std::sqrt(sq / n - mean * mean), kInitStd, 1e-4);
}

TEST(Forward, Deterministic) {
  auto g = init_generator<float>(GeneratorShape::with_base(4, 1), 8);
  const auto x = random_rgb(32, 1);
  EXPECT_EQ(g.forward(x).data, g.forward(x).data);
  auto d = init_discriminator<float>(DiscriminatorShape::with_base(4), 8);
  EXPECT_EQ(d.forward(x).data, d.forward(x).data);
}

TEST(ReflectionPad, BackwardIsAdjoint) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  Tensor<double> x(2, 5, 6);
  for (auto& v : x.data) v = n(rng);
  const auto px = nn::reflection_pad(x, 3);
  ASSERT_EQ(px.height, 11);
  ASSERT_EQ(px.width, 12);
  Tensor<double> g(px.channels, px.height, px.width);
  for (auto& v : g.data) v = n(rng);
  const auto bg = nn::reflection_pad_backward(g, 3);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < px.size(); ++i) lhs += px.data[i] * g.data[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x.data[i] * bg.data[i];
  EXPECT_NEAR(lhs, rhs, 1e-9);
  // No edge repetition: column -1 mirrors column 1.
  EXPECT_EQ(px.at(0, 3, 2), x.at(0, 0, 1));
}

TEST(Backward, InputGradientMatchesFiniteDifferences) {
  // <w, G(x)> probed along random directions.
  std::mt19937_64 rng(6);
  auto state = dhal::testing::tiny_state(6);
  auto x = dhal::testing::random_image(8, rng);
  Tensor<double> w(3, 8, 8);
  std::normal_distribution<double> n;
  for (auto& v : w.data) v = n(rng);
  auto objective = [&](const Tensor<double>& in) {
    const auto y = state.g_a2b.forward(in);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += w.data[i] * y.data[i];
    return s;
  };
  objective(x);
  nn::zero_grad(state.g_a2b.parameters());
  const auto gx = state.g_a2b.backward(w);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor<double> dir(3, 8, 8);
    for (auto& v : dir.data) v = n(rng);
    double analytic = 0;
    for (std::size_t i = 0; i < dir.size(); ++i) analytic += gx.data[i] * dir.data[i];
    const double h = 1e-6;
    auto up = x, down = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      up.data[i] += h * dir.data[i];
      down.data[i] -= h * dir.data[i];
    }
    const double fd = (objective(up) - objective(down)) / (2 * h);
    EXPECT_NEAR(analytic, fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}
