#include "dhal/losses.hpp"

#include <cmath>

#include "dhal/error.hpp"

namespace dhal {

void LossWeights::validate() const {
  if (!(lambda_pixel >= 0.0) || !(lambda_cyc >= 0.0)) {
    throw ValidationError("loss weights must be nonnegative");
  }
}

namespace {

template <typename T>
void require_nonempty(const Tensor<T>& t, const char* what) {
  if (t.empty()) throw ValidationError(std::string(what) + ": empty tensor");
}

// 1/2 * mean((s - target)^2)
template <typename T>
T half_mse(const Tensor<T>& s, T target) {
  T sum{0};
  for (T v : s.data) sum += (v - target) * (v - target);
  return T(0.5) * sum / static_cast<T>(s.size());
}

template <typename T>
Tensor<T> half_mse_grad(const Tensor<T>& s, T target) {
  Tensor<T> g(s.channels, s.height, s.width);
  const T inv = T{1} / static_cast<T>(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) g.data[i] = (s.data[i] - target) * inv;
  return g;
}

template <typename T>
T mae(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  require_same_shape(a, b, what);
  require_nonempty(a, what);
  T sum{0};
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a.data[i] - b.data[i]);
  return sum / static_cast<T>(a.size());
}

template <typename T>
Tensor<T> mae_grad(const Tensor<T>& target, const Tensor<T>& pred, const char* what) {
  require_same_shape(target, pred, what);
  Tensor<T> g(pred.channels, pred.height, pred.width);
  const T inv = T{1} / static_cast<T>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred.data[i] - target.data[i];
    g.data[i] = d > T{0} ? inv : (d < T{0} ? -inv : T{0});
  }
  return g;
}

}  // namespace

template <typename T>
T gen_adv_loss(const Tensor<T>& fake_scores) {
  require_nonempty(fake_scores, "gen_adv_loss");
  return half_mse(fake_scores, T{1});
}

template <typename T>
Tensor<T> gen_adv_loss_grad(const Tensor<T>& fake_scores) {
  return half_mse_grad(fake_scores, T{1});
}

template <typename T>
T disc_loss(const Tensor<T>& real_scores, const Tensor<T>& fake_scores) {
  require_same_shape(real_scores, fake_scores, "disc_loss");
  require_nonempty(real_scores, "disc_loss");
  return half_mse(real_scores, T{1}) + half_mse(fake_scores, T{0});
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> disc_loss_grad(const Tensor<T>& real_scores,
                                               const Tensor<T>& fake_scores) {
  require_same_shape(real_scores, fake_scores, "disc_loss");
  return {half_mse_grad(real_scores, T{1}), half_mse_grad(fake_scores, T{0})};
}

template <typename T>
T pixel_loss(const Tensor<T>& gt, const Tensor<T>& pred) {
  return mae(gt, pred, "pixel_loss");
}

template <typename T>
Tensor<T> pixel_loss_grad(const Tensor<T>& gt, const Tensor<T>& pred) {
  return mae_grad(gt, pred, "pixel_loss");
}

template <typename T>
T cycle_loss(const Tensor<T>& original_rgb, const Tensor<T>& reconstructed_rgb) {
  return mae(original_rgb, reconstructed_rgb, "cycle_loss");
}

template <typename T>
Tensor<T> cycle_loss_grad(const Tensor<T>& original_rgb, const Tensor<T>& reconstructed_rgb) {
  return mae_grad(original_rgb, reconstructed_rgb, "cycle_loss");
}

template <typename T>
T teacher_total(const Tensor<T>& fake_depth_scores, const Tensor<T>& gt_depth,
                const Tensor<T>& pred_depth, const LossWeights& weights) {
  weights.validate();
  return gen_adv_loss(fake_depth_scores) +
         static_cast<T>(weights.lambda_pixel) * pixel_loss(gt_depth, pred_depth);
}

template <typename T>
T student_total(const Tensor<T>& fake_depth_scores, const Tensor<T>& fake_rgb_scores,
                const Tensor<T>& original_rgb, const Tensor<T>& reconstructed_rgb,
                const LossWeights& weights) {
  weights.validate();
  return gen_adv_loss(fake_depth_scores) + gen_adv_loss(fake_rgb_scores) +
         static_cast<T>(weights.lambda_cyc) * cycle_loss(original_rgb, reconstructed_rgb);
}

#define DHAL_INSTANTIATE(T)                                                                    \
  template T gen_adv_loss(const Tensor<T>&);                                                   \
  template Tensor<T> gen_adv_loss_grad(const Tensor<T>&);                                      \
  template T disc_loss(const Tensor<T>&, const Tensor<T>&);                                    \
  template std::pair<Tensor<T>, Tensor<T>> disc_loss_grad(const Tensor<T>&, const Tensor<T>&); \
  template T pixel_loss(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> pixel_loss_grad(const Tensor<T>&, const Tensor<T>&);                      \
  template T cycle_loss(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> cycle_loss_grad(const Tensor<T>&, const Tensor<T>&);                      \
  template T teacher_total(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,               \
                           const LossWeights&);                                                \
  template T student_total(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,               \
                           const Tensor<T>&, const LossWeights&);

DHAL_INSTANTIATE(float)
DHAL_INSTANTIATE(double)

#undef DHAL_INSTANTIATE

}  // namespace dhal
