#pragma once

// Least-squares adversarial objectives and L1 reconstruction terms.
// Expectations over a patch discriminator's output are taken as the mean over
// the score grid. Each loss has a companion *_grad returning the derivative
// with respect to the tensor the generator (or discriminator) produced.

#include <utility>

#include "dhal/tensor.hpp"

namespace dhal {

struct LossWeights {
  double lambda_pixel = 10.0;
  double lambda_cyc = 5.0;

  void validate() const;
};

/// 1/2 * mean((D(fake) - 1)^2).
template <typename T>
T gen_adv_loss(const Tensor<T>& fake_scores);
template <typename T>
Tensor<T> gen_adv_loss_grad(const Tensor<T>& fake_scores);

/// 1/2 * mean((D(real) - 1)^2) + 1/2 * mean(D(fake)^2).
template <typename T>
T disc_loss(const Tensor<T>& real_scores, const Tensor<T>& fake_scores);
/// Gradients w.r.t. (real_scores, fake_scores).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> disc_loss_grad(const Tensor<T>& real_scores,
                                               const Tensor<T>& fake_scores);

/// Mean absolute error between ground-truth depth and prediction.
template <typename T>
T pixel_loss(const Tensor<T>& gt, const Tensor<T>& pred);
/// Gradient w.r.t. pred (sign(pred - gt) / n; zero where they coincide).
template <typename T>
Tensor<T> pixel_loss_grad(const Tensor<T>& gt, const Tensor<T>& pred);

/// Mean absolute error between an RGB image and its depth round trip.
template <typename T>
T cycle_loss(const Tensor<T>& original_rgb, const Tensor<T>& reconstructed_rgb);
template <typename T>
Tensor<T> cycle_loss_grad(const Tensor<T>& original_rgb, const Tensor<T>& reconstructed_rgb);

/// gen_adv_loss(fake_depth_scores) + lambda_pixel * pixel_loss(gt, pred).
template <typename T>
T teacher_total(const Tensor<T>& fake_depth_scores, const Tensor<T>& gt_depth,
                const Tensor<T>& pred_depth, const LossWeights& weights);

/// gen_adv_loss(depth branch) + gen_adv_loss(rgb branch) + lambda_cyc * cycle_loss.
template <typename T>
T student_total(const Tensor<T>& fake_depth_scores, const Tensor<T>& fake_rgb_scores,
                const Tensor<T>& original_rgb, const Tensor<T>& reconstructed_rgb,
                const LossWeights& weights);

}  // namespace dhal
