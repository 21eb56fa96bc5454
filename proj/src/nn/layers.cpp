#include "dhal/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "dhal/error.hpp"

namespace dhal::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// cols is [channels * k * k, out_h * out_w], row-major.
template <typename T>
void im2col(const T* image, int channels, int height, int width, int kernel, int stride, int pad,
            int out_h, int out_w, T* cols) {
  const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    const T* src = image + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        T* row = cols + ((static_cast<std::size_t>(c) * kernel + ky) * kernel + kx) * plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* dst = row + static_cast<std::size_t>(oy) * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + out_w, T{0});
            continue;
          }
          const T* line = src + static_cast<std::size_t>(iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < width) ? line[ix] : T{0};
          }
        }
      }
    }
  }
}

// Adjoint of im2col; accumulates into image (caller zeroes it).
template <typename T>
void col2im(const T* cols, int channels, int height, int width, int kernel, int stride, int pad,
            int out_h, int out_w, T* image) {
  const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    T* dst = image + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const T* row = cols + ((static_cast<std::size_t>(c) * kernel + ky) * kernel + kx) * plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          const T* src = row + static_cast<std::size_t>(oy) * out_w;
          T* line = dst + static_cast<std::size_t>(iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) line[ix] += src[ox];
          }
        }
      }
    }
  }
}

int reflect_index(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

}  // namespace

template <typename T>
Parameter<T>::Parameter(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
  std::size_t count = 1;
  for (int d : shape) count *= static_cast<std::size_t>(d);
  value.assign(count, T{0});
  grad.assign(count, T{0});
}

// ---------------------------------------------------------------------------
// Conv2d

template <typename T>
Conv2d<T>::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel,
                  int stride, int padding)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      weight_(name + ".weight", {out_channels, in_channels, kernel, kernel}),
      bias_(name + ".bias", {out_channels}) {}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  if (x.channels != in_) {
    throw ValidationError(weight_.name + ": expected " + std::to_string(in_) +
                          " input channels, got " + std::to_string(x.channels));
  }
  const int oh = out_size(x.height);
  const int ow = out_size(x.width);
  if (oh <= 0 || ow <= 0) {
    throw ValidationError(weight_.name + ": input " + shape_string(x) + " too small");
  }
  input_ = x;
  const int rows = in_ * kernel_ * kernel_;
  const int cols_n = oh * ow;
  std::vector<T> cols(static_cast<std::size_t>(rows) * cols_n);
  im2col(x.data.data(), in_, x.height, x.width, kernel_, stride_, padding_, oh, ow, cols.data());

  Tensor<T> y(out_, oh, ow);
  MatMap<T> ym(y.data.data(), out_, cols_n);
  ConstMatMap<T> wm(weight_.value.data(), out_, rows);
  ConstMatMap<T> cm(cols.data(), rows, cols_n);
  ym.noalias() = wm * cm;
  for (int o = 0; o < out_; ++o) ym.row(o).array() += bias_.value[o];
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out) {
  const Tensor<T>& x = input_;
  const int oh = grad_out.height;
  const int ow = grad_out.width;
  const int rows = in_ * kernel_ * kernel_;
  const int cols_n = oh * ow;
  std::vector<T> cols(static_cast<std::size_t>(rows) * cols_n);
  im2col(x.data.data(), in_, x.height, x.width, kernel_, stride_, padding_, oh, ow, cols.data());

  ConstMatMap<T> gm(grad_out.data.data(), out_, cols_n);
  ConstMatMap<T> cm(cols.data(), rows, cols_n);
  MatMap<T> dw(weight_.grad.data(), out_, rows);
  dw.noalias() += gm * cm.transpose();
  // Plain loop: Eigen's vectorized sum peels by address, so its rounding would
  // depend on where the buffer was allocated.
  for (int o = 0; o < out_; ++o) {
    T s{0};
    for (int j = 0; j < cols_n; ++j) s += gm(o, j);
    bias_.grad[o] += s;
  }

  ConstMatMap<T> wm(weight_.value.data(), out_, rows);
  MatMap<T> dcols(cols.data(), rows, cols_n);
  dcols.noalias() = wm.transpose() * gm;
  Tensor<T> dx(in_, x.height, x.width);
  col2im(cols.data(), in_, x.height, x.width, kernel_, stride_, padding_, oh, ow, dx.data.data());
  return dx;
}

// ---------------------------------------------------------------------------
// ConvTranspose2d

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(const std::string& name, int in_channels, int out_channels,
                                    int kernel, int stride, int padding)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      weight_(name + ".weight", {in_channels, out_channels, kernel, kernel}),
      bias_(name + ".bias", {out_channels}) {}

template <typename T>
Tensor<T> ConvTranspose2d<T>::forward(const Tensor<T>& x) {
  if (x.channels != in_) {
    throw ValidationError(weight_.name + ": expected " + std::to_string(in_) +
                          " input channels, got " + std::to_string(x.channels));
  }
  input_ = x;
  const int oh = x.height * stride_;
  const int ow = x.width * stride_;
  const int rows = out_ * kernel_ * kernel_;
  const int cols_n = x.height * x.width;
  std::vector<T> cols(static_cast<std::size_t>(rows) * cols_n);
  ConstMatMap<T> wm(weight_.value.data(), in_, rows);
  ConstMatMap<T> xm(x.data.data(), in_, cols_n);
  MatMap<T> cm(cols.data(), rows, cols_n);
  cm.noalias() = wm.transpose() * xm;

  Tensor<T> y(out_, oh, ow);
  col2im(cols.data(), out_, oh, ow, kernel_, stride_, padding_, x.height, x.width, y.data.data());
  for (int o = 0; o < out_; ++o) {
    for (auto& v : y.channel(o)) v += bias_.value[o];
  }
  return y;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::backward(const Tensor<T>& grad_out) {
  const Tensor<T>& x = input_;
  const int rows = out_ * kernel_ * kernel_;
  const int cols_n = x.height * x.width;
  std::vector<T> cols(static_cast<std::size_t>(rows) * cols_n);
  im2col(grad_out.data.data(), out_, grad_out.height, grad_out.width, kernel_, stride_, padding_,
         x.height, x.width, cols.data());

  ConstMatMap<T> cm(cols.data(), rows, cols_n);
  ConstMatMap<T> xm(x.data.data(), in_, cols_n);
  MatMap<T> dw(weight_.grad.data(), in_, rows);
  dw.noalias() += xm * cm.transpose();
  for (int o = 0; o < out_; ++o) {
    T s{0};
    for (T v : grad_out.channel(o)) s += v;
    bias_.grad[o] += s;
  }

  ConstMatMap<T> wm(weight_.value.data(), in_, rows);
  Tensor<T> dx(in_, x.height, x.width);
  MatMap<T> dxm(dx.data.data(), in_, cols_n);
  dxm.noalias() = wm * cm;
  return dx;
}

// ---------------------------------------------------------------------------
// Linear

template <typename T>
Linear<T>::Linear(const std::string& name, int in_features, int out_features)
    : in_(in_features),
      out_(out_features),
      weight_(name + ".weight", {out_features, in_features}),
      bias_(name + ".bias", {out_features}) {}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) {
  if (static_cast<int>(x.size()) != in_) {
    throw ValidationError(weight_.name + ": expected " + std::to_string(in_) + " features, got " +
                          std::to_string(x.size()));
  }
  input_ = x;
  Tensor<T> y(out_, 1, 1);
  ConstMatMap<T> wm(weight_.value.data(), out_, in_);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> xv(x.data.data(), in_);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> yv(y.data.data(), out_);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bv(bias_.value.data(), out_);
  yv.noalias() = wm * xv + bv;
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& grad_out) {
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> gv(grad_out.data.data(), out_);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> xv(input_.data.data(), in_);
  MatMap<T> dw(weight_.grad.data(), out_, in_);
  dw.noalias() += gv * xv.transpose();
  for (int o = 0; o < out_; ++o) bias_.grad[o] += grad_out.data[o];
  Tensor<T> dx(input_.channels, input_.height, input_.width);
  ConstMatMap<T> wm(weight_.value.data(), out_, in_);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dxv(dx.data.data(), in_);
  dxv.noalias() = wm.transpose() * gv;
  return dx;
}

// ---------------------------------------------------------------------------
// InstanceNorm

template <typename T>
Tensor<T> InstanceNorm<T>::forward(const Tensor<T>& x) {
  Tensor<T> y(x.channels, x.height, x.width);
  inv_std_.assign(x.channels, T{0});
  const auto n = static_cast<double>(x.plane());
  for (int c = 0; c < x.channels; ++c) {
    auto src = x.channel(c);
    double mean = 0.0;
    for (T v : src) mean += v;
    mean /= n;
    double var = 0.0;
    for (T v : src) var += (v - mean) * (v - mean);
    var /= n;
    const T inv = static_cast<T>(1.0 / std::sqrt(var + kEpsilon));
    inv_std_[c] = inv;
    auto dst = y.channel(c);
    const T m = static_cast<T>(mean);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] - m) * inv;
  }
  output_ = y;
  return y;
}

template <typename T>
Tensor<T> InstanceNorm<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> dx(grad_out.channels, grad_out.height, grad_out.width);
  const auto n = static_cast<double>(grad_out.plane());
  for (int c = 0; c < grad_out.channels; ++c) {
    auto g = grad_out.channel(c);
    auto y = output_.channel(c);
    double mean_g = 0.0, mean_gy = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      mean_g += g[i];
      mean_gy += static_cast<double>(g[i]) * y[i];
    }
    mean_g /= n;
    mean_gy /= n;
    auto d = dx.channel(c);
    const T inv = inv_std_[c];
    for (std::size_t i = 0; i < g.size(); ++i) {
      d[i] = inv * static_cast<T>(g[i] - mean_g - y[i] * mean_gy);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x) {
  output_ = x;
  for (auto& v : output_.data) v = v > T{0} ? v : T{0};
  return output_;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& grad_out) const {
  Tensor<T> dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(output_.data[i] > T{0})) dx.data[i] = T{0};
  }
  return dx;
}

template <typename T>
Tensor<T> LeakyReLU<T>::forward(const Tensor<T>& x) {
  input_ = x;
  Tensor<T> y = x;
  for (auto& v : y.data) v = v > T{0} ? v : slope_ * v;
  return y;
}

template <typename T>
Tensor<T> LeakyReLU<T>::backward(const Tensor<T>& grad_out) const {
  Tensor<T> dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(input_.data[i] > T{0})) dx.data[i] *= slope_;
  }
  return dx;
}

template <typename T>
Tensor<T> Tanh<T>::forward(const Tensor<T>& x) {
  output_ = x;
  for (auto& v : output_.data) v = std::tanh(v);
  return output_;
}

template <typename T>
Tensor<T> Tanh<T>::backward(const Tensor<T>& grad_out) const {
  Tensor<T> dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const T y = output_.data[i];
    dx.data[i] *= T{1} - y * y;
  }
  return dx;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x) {
  height_ = x.height;
  width_ = x.width;
  Tensor<T> y(x.channels, 1, 1);
  const T inv = T{1} / static_cast<T>(x.plane());
  for (int c = 0; c < x.channels; ++c) {
    T s{0};
    for (T v : x.channel(c)) s += v;
    y.data[c] = s * inv;
  }
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& grad_out) const {
  Tensor<T> dx(grad_out.channels, height_, width_);
  const T inv = T{1} / static_cast<T>(dx.plane());
  for (int c = 0; c < dx.channels; ++c) {
    for (auto& v : dx.channel(c)) v = grad_out.data[c] * inv;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Reflection padding

template <typename T>
Tensor<T> reflection_pad(const Tensor<T>& x, int pad) {
  if (pad >= x.height || pad >= x.width) {
    throw ValidationError("reflection_pad: pad " + std::to_string(pad) + " too large for " +
                          shape_string(x));
  }
  Tensor<T> y(x.channels, x.height + 2 * pad, x.width + 2 * pad);
  for (int c = 0; c < x.channels; ++c) {
    for (int yy = 0; yy < y.height; ++yy) {
      const int sy = reflect_index(yy - pad, x.height);
      for (int xx = 0; xx < y.width; ++xx) {
        y.at(c, yy, xx) = x.at(c, sy, reflect_index(xx - pad, x.width));
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> reflection_pad_backward(const Tensor<T>& grad, int pad) {
  Tensor<T> dx(grad.channels, grad.height - 2 * pad, grad.width - 2 * pad);
  for (int c = 0; c < grad.channels; ++c) {
    for (int yy = 0; yy < grad.height; ++yy) {
      const int sy = reflect_index(yy - pad, dx.height);
      for (int xx = 0; xx < grad.width; ++xx) {
        dx.at(c, sy, reflect_index(xx - pad, dx.width)) += grad.at(c, yy, xx);
      }
    }
  }
  return dx;
}

#define DHAL_INSTANTIATE(T)                                             \
  template struct Parameter<T>;                                         \
  template class Conv2d<T>;                                             \
  template class ConvTranspose2d<T>;                                    \
  template class Linear<T>;                                             \
  template class InstanceNorm<T>;                                       \
  template class ReLU<T>;                                               \
  template class LeakyReLU<T>;                                          \
  template class Tanh<T>;                                               \
  template class GlobalAvgPool<T>;                                      \
  template Tensor<T> reflection_pad(const Tensor<T>&, int);             \
  template Tensor<T> reflection_pad_backward(const Tensor<T>&, int);

DHAL_INSTANTIATE(float)
DHAL_INSTANTIATE(double)

#undef DHAL_INSTANTIATE

}  // namespace dhal::nn
