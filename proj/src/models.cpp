#include "dhal/models.hpp"

#include <random>
#include <string>

#include "dhal/error.hpp"

namespace dhal {

namespace {

constexpr int kOutputPad = 3;  // reflection padding around the 7x7 layers

std::size_t conv_count(int in, int out, int k) {
  return static_cast<std::size_t>(in) * out * k * k + static_cast<std::size_t>(out);
}

template <typename T>
void init_parameters(nn::ParameterList<T> params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, kInitStd);
  for (auto* p : params) {
    const bool is_bias = p->shape.size() == 1;
    for (auto& v : p->value) v = is_bias ? T{0} : static_cast<T>(normal(rng));
  }
}

}  // namespace

std::size_t generator_parameter_count(const GeneratorShape& s) {
  const auto [m0, m1, m2] = s.encoder_maps;
  return conv_count(3, m0, 7) + conv_count(m0, m1, 3) + conv_count(m1, m2, 3) +
         2 * static_cast<std::size_t>(s.residual_blocks) * conv_count(m2, m2, 3) +
         conv_count(m2, m1, 3) + conv_count(m1, m0, 3) + conv_count(m0, 3, 7);
}

std::size_t discriminator_parameter_count(const DiscriminatorShape& s) {
  std::size_t n = 0;
  int in = 3;
  for (int m : s.maps) {
    n += conv_count(in, m, 4);
    in = m;
  }
  return n + conv_count(in, 1, 4);
}

// ---------------------------------------------------------------------------
// Generator

template <typename T>
Generator<T>::Generator(GeneratorShape shape) : shape_(shape) {
  const auto [m0, m1, m2] = shape.encoder_maps;
  if (m0 <= 0 || m1 <= 0 || m2 <= 0 || shape.residual_blocks < 0) {
    throw ValidationError("generator: feature maps must be positive");
  }
  encoder_[0].conv = nn::Conv2d<T>("enc0", 3, m0, 7, 1, 0);
  encoder_[1].conv = nn::Conv2d<T>("enc1", m0, m1, 3, 2, 1);
  encoder_[2].conv = nn::Conv2d<T>("enc2", m1, m2, 3, 2, 1);
  blocks_.resize(shape.residual_blocks);
  for (int i = 0; i < shape.residual_blocks; ++i) {
    const std::string name = "res" + std::to_string(i);
    blocks_[i].conv1 = nn::Conv2d<T>(name + ".conv1", m2, m2, 3, 1, 1);
    blocks_[i].conv2 = nn::Conv2d<T>(name + ".conv2", m2, m2, 3, 1, 1);
  }
  decoder_[0].conv = nn::ConvTranspose2d<T>("dec0", m2, m1, 3, 2, 1);
  decoder_[1].conv = nn::ConvTranspose2d<T>("dec1", m1, m0, 3, 2, 1);
  output_ = nn::Conv2d<T>("out", m0, 3, 7, 1, 0);
}

template <typename T>
Tensor<T> Generator<T>::forward(const Tensor<T>& x) {
  if (x.channels != 3) {
    throw ValidationError("generator: expected 3 channels, got " + shape_string(x));
  }
  if (x.height % 4 != 0 || x.width % 4 != 0 || x.height < 4 || x.width < 4) {
    throw ValidationError("generator: spatial size must be a positive multiple of 4, got " +
                          shape_string(x));
  }
  Tensor<T> h = nn::reflection_pad(x, kOutputPad);
  for (auto& unit : encoder_) {
    h = unit.relu.forward(unit.norm.forward(unit.conv.forward(h)));
  }
  for (auto& b : blocks_) {
    Tensor<T> r = b.relu.forward(b.norm1.forward(b.conv1.forward(h)));
    r = b.norm2.forward(b.conv2.forward(r));
    h += r;
  }
  for (auto& unit : decoder_) {
    h = unit.relu.forward(unit.norm.forward(unit.conv.forward(h)));
  }
  return tanh_.forward(output_.forward(nn::reflection_pad(h, kOutputPad)));
}

template <typename T>
Tensor<T> Generator<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g = nn::reflection_pad_backward(output_.backward(tanh_.backward(grad_out)), kOutputPad);
  for (auto it = decoder_.rbegin(); it != decoder_.rend(); ++it) {
    g = it->conv.backward(it->norm.backward(it->relu.backward(g)));
  }
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    Tensor<T> r = it->conv2.backward(it->norm2.backward(g));
    r = it->conv1.backward(it->norm1.backward(it->relu.backward(r)));
    g += r;
  }
  for (auto it = encoder_.rbegin(); it != encoder_.rend(); ++it) {
    g = it->conv.backward(it->norm.backward(it->relu.backward(g)));
  }
  return nn::reflection_pad_backward(g, kOutputPad);
}

template <typename T>
nn::ParameterList<T> Generator<T>::parameters() {
  nn::ParameterList<T> out;
  for (auto& unit : encoder_) unit.conv.collect(out);
  for (auto& b : blocks_) {
    b.conv1.collect(out);
    b.conv2.collect(out);
  }
  for (auto& unit : decoder_) unit.conv.collect(out);
  output_.collect(out);
  return out;
}

// ---------------------------------------------------------------------------
// Discriminator

template <typename T>
Discriminator<T>::Discriminator(DiscriminatorShape shape) : shape_(std::move(shape)) {
  if (shape_.maps.empty()) throw ValidationError("discriminator: needs at least one layer");
  int in = 3;
  for (std::size_t i = 0; i < shape_.maps.size(); ++i) {
    Layer layer;
    layer.conv = nn::Conv2d<T>("conv" + std::to_string(i), in, shape_.maps[i], 4, 2, 1);
    layer.normalized = i > 0;
    layers_.push_back(std::move(layer));
    in = shape_.maps[i];
  }
  output_ = nn::Conv2d<T>("out", in, 1, 4, 2, 1);
}

template <typename T>
Tensor<T> Discriminator<T>::forward(const Tensor<T>& x) {
  const int factor = shape_.downsample_factor();
  if (x.channels != 3 || x.height % factor != 0 || x.width % factor != 0 || x.height == 0 ||
      x.width == 0) {
    throw ValidationError("discriminator: expected 3 channels and spatial size divisible by " +
                          std::to_string(factor) + ", got " + shape_string(x));
  }
  Tensor<T> h = x;
  for (auto& layer : layers_) {
    h = layer.conv.forward(h);
    if (layer.normalized) h = layer.norm.forward(h);
    h = layer.act.forward(h);
  }
  return output_.forward(h);
}

template <typename T>
Tensor<T> Discriminator<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g = output_.backward(grad_out);
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    g = it->act.backward(g);
    if (it->normalized) g = it->norm.backward(g);
    g = it->conv.backward(g);
  }
  return g;
}

template <typename T>
nn::ParameterList<T> Discriminator<T>::parameters() {
  nn::ParameterList<T> out;
  for (auto& layer : layers_) layer.conv.collect(out);
  output_.collect(out);
  return out;
}

template <typename T>
Generator<T> init_generator(const GeneratorShape& shape, std::uint64_t seed) {
  Generator<T> g(shape);
  init_parameters(g.parameters(), seed);
  return g;
}

template <typename T>
Discriminator<T> init_discriminator(const DiscriminatorShape& shape, std::uint64_t seed) {
  Discriminator<T> d(shape);
  init_parameters(d.parameters(), seed);
  return d;
}

template class Generator<float>;
template class Generator<double>;
template class Discriminator<float>;
template class Discriminator<double>;
template Generator<float> init_generator(const GeneratorShape&, std::uint64_t);
template Generator<double> init_generator(const GeneratorShape&, std::uint64_t);
template Discriminator<float> init_discriminator(const DiscriminatorShape&, std::uint64_t);
template Discriminator<double> init_discriminator(const DiscriminatorShape&, std::uint64_t);

}  // namespace dhal
