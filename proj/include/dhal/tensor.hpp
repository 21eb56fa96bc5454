#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dhal {

/// Dense planar (channel, row, column) tensor. Batch size is always one.
template <typename T>
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c, int h, int w, T fill = T{0})
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  bool empty() const { return data.empty(); }

  T& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  T at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }

  std::span<T> channel(int c) { return {data.data() + c * plane(), plane()}; }
  std::span<const T> channel(int c) const { return {data.data() + c * plane(), plane()}; }

  bool same_shape(const Tensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  Tensor& operator+=(const Tensor& o);
  Tensor& operator*=(T s);
};

/// Model-space image: values in [-1, 1], three channels.
using ImageTensor = Tensor<float>;

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  Tensor<To> out(t.channels, t.height, t.width);
  for (std::size_t i = 0; i < t.size(); ++i) out.data[i] = static_cast<To>(t.data[i]);
  return out;
}

/// "CxHxW" for diagnostics.
template <typename T>
std::string shape_string(const Tensor<T>& t) {
  return std::to_string(t.channels) + "x" + std::to_string(t.height) + "x" + std::to_string(t.width);
}

/// Throws ValidationError naming `what` when shapes differ.
template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what);

}  // namespace dhal
