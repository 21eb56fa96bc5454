#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dhal/nn/layers.hpp"
#include "dhal/tensor.hpp"

namespace dhal {

/// Standard deviation of the zero-mean gaussian used for every conv weight.
inline constexpr double kInitStd = 0.02;

struct GeneratorShape {
  /// Feature maps of the three encoder convolutions; the decoder mirrors the first two.
  std::array<int, 3> encoder_maps{64, 128, 256};
  int residual_blocks = 6;

  static GeneratorShape with_base(int base_maps, int residual_blocks) {
    return {{base_maps, 2 * base_maps, 4 * base_maps}, residual_blocks};
  }
  bool operator==(const GeneratorShape&) const = default;
};

struct DiscriminatorShape {
  /// Feature maps of the stride-2 layers preceding the single-map output layer.
  std::vector<int> maps{64, 128, 256, 256};

  static DiscriminatorShape with_base(int base_maps) {
    return {{base_maps, 2 * base_maps, 4 * base_maps, 4 * base_maps}};
  }
  /// Input spatial size divided by output patch-grid size.
  int downsample_factor() const { return 1 << (maps.size() + 1); }
  bool operator==(const DiscriminatorShape&) const = default;
};

/// Closed-form parameter counts from the layer table (weights plus biases).
std::size_t generator_parameter_count(const GeneratorShape& shape);
std::size_t discriminator_parameter_count(const DiscriminatorShape& shape);

/// Encoder (7x7 s1, 3x3 s2, 3x3 s2) -> residual blocks -> two 3x3 s2 transposed
/// convolutions -> 7x7 s1 projection to three channels with tanh.
/// Instance norm and ReLU follow every conv except the output projection.
template <typename T>
class Generator {
 public:
  explicit Generator(GeneratorShape shape = {});

  /// Caches activations for a following backward().
  Tensor<T> forward(const Tensor<T>& x);
  /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
  Tensor<T> backward(const Tensor<T>& grad_out);

  nn::ParameterList<T> parameters();
  const GeneratorShape& shape() const { return shape_; }

 private:
  struct ConvUnit {
    nn::Conv2d<T> conv;
    nn::InstanceNorm<T> norm;
    nn::ReLU<T> relu;
  };
  struct UpUnit {
    nn::ConvTranspose2d<T> conv;
    nn::InstanceNorm<T> norm;
    nn::ReLU<T> relu;
  };
  struct ResidualBlock {
    nn::Conv2d<T> conv1;
    nn::InstanceNorm<T> norm1;
    nn::ReLU<T> relu;
    nn::Conv2d<T> conv2;
    nn::InstanceNorm<T> norm2;
  };

  GeneratorShape shape_;
  std::array<ConvUnit, 3> encoder_;
  std::vector<ResidualBlock> blocks_;
  std::array<UpUnit, 2> decoder_;
  nn::Conv2d<T> output_;
  nn::Tanh<T> tanh_;
};

/// Patch discriminator: stride-2 4x4 convolutions with leaky ReLU (slope 0.2),
/// instance norm on all but the first, then a 4x4 stride-2 conv to one map.
/// Scores are raw reals (least-squares objective).
template <typename T>
class Discriminator {
 public:
  explicit Discriminator(DiscriminatorShape shape = {});

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);

  nn::ParameterList<T> parameters();
  const DiscriminatorShape& shape() const { return shape_; }

 private:
  struct Layer {
    nn::Conv2d<T> conv;
    nn::InstanceNorm<T> norm;
    nn::LeakyReLU<T> act;
    bool normalized = false;
  };

  DiscriminatorShape shape_;
  std::vector<Layer> layers_;
  nn::Conv2d<T> output_;
};

/// Seeded gaussian initialization of weights (std kInitStd), zero biases.
template <typename T>
Generator<T> init_generator(const GeneratorShape& shape, std::uint64_t seed);
template <typename T>
Discriminator<T> init_discriminator(const DiscriminatorShape& shape, std::uint64_t seed);

/// Copies parameter values between two models of identical shape.
template <typename Model>
void copy_parameters(Model& dst, Model& src) {
  auto d = dst.parameters();
  auto s = src.parameters();
  for (std::size_t i = 0; i < d.size(); ++i) d[i]->value = s[i]->value;
}

}  // namespace dhal
