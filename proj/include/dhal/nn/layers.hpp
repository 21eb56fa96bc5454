#pragma once

// Minimal reverse-mode building blocks for batch-size-one convolutional nets.
//
// Every layer caches what it needs during forward() and accumulates parameter
// gradients during backward(). A forward/backward pair must not be interleaved
// with another forward on the same layer instance.

#include <string>
#include <vector>

#include "dhal/tensor.hpp"

namespace dhal::nn {

template <typename T>
struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  Parameter() = default;
  Parameter(std::string n, std::vector<int> s);

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T{0}); }
};

template <typename T>
using ParameterList = std::vector<Parameter<T>*>;

template <typename T>
void zero_grad(const ParameterList<T>& params) {
  for (auto* p : params) p->zero_grad();
}

/// Total scalar count over a parameter list.
template <typename T>
std::size_t parameter_count(const ParameterList<T>& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->size();
  return n;
}

/// 2-D convolution with zero padding.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride,
         int padding);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);
  void collect(ParameterList<T>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  int out_size(int in) const { return (in + 2 * padding_ - kernel_) / stride_ + 1; }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  int in_ = 0, out_ = 0, kernel_ = 0, stride_ = 1, padding_ = 0;
  Parameter<T> weight_;  // [out, in, k, k]
  Parameter<T> bias_;    // [out]
  Tensor<T> input_;
};

/// Transposed convolution whose output is `stride` times the input size
/// (padding and output padding chosen so that a 3x3/stride-2 layer exactly doubles).
template <typename T>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(const std::string& name, int in_channels, int out_channels, int kernel,
                  int stride, int padding);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);
  void collect(ParameterList<T>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  int in_ = 0, out_ = 0, kernel_ = 0, stride_ = 1, padding_ = 0;
  Parameter<T> weight_;  // [in, out, k, k]
  Parameter<T> bias_;    // [out]
  Tensor<T> input_;
};

/// Linear map on a flattened tensor; output is out x 1 x 1.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in_features, int out_features);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);
  void collect(ParameterList<T>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  int in_ = 0, out_ = 0;
  Parameter<T> weight_;  // [out, in]
  Parameter<T> bias_;
  Tensor<T> input_;
};

/// Per-channel normalization over the spatial plane, no affine parameters.
template <typename T>
class InstanceNorm {
 public:
  static constexpr double kEpsilon = 1e-5;

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);

 private:
  Tensor<T> output_;
  std::vector<T> inv_std_;
};

template <typename T>
class ReLU {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out) const;

 private:
  Tensor<T> output_;
};

template <typename T>
class LeakyReLU {
 public:
  explicit LeakyReLU(T slope = T(0.2)) : slope_(slope) {}
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out) const;

 private:
  T slope_;
  Tensor<T> input_;
};

template <typename T>
class Tanh {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out) const;

 private:
  Tensor<T> output_;
};

/// Mean over the spatial plane: C x H x W -> C x 1 x 1.
template <typename T>
class GlobalAvgPool {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out) const;

 private:
  int height_ = 0, width_ = 0;
};

/// Mirror padding without repeating the edge pixel.
template <typename T>
Tensor<T> reflection_pad(const Tensor<T>& x, int pad);

/// Adjoint of reflection_pad: folds the padded gradient back onto the source pixels.
template <typename T>
Tensor<T> reflection_pad_backward(const Tensor<T>& grad, int pad);

}  // namespace dhal::nn
