#pragma once

#include <cstdint>
#include <vector>

#include "dhal/nn/layers.hpp"

namespace dhal {

struct AdamOptions {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment estimates, one vector per parameter tensor.
template <typename T>
struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<T>> first;
  std::vector<std::vector<T>> second;
};

/// Adaptive-moment optimizer with bias correction. Moments are bound to the
/// parameter list by position and allocated on the first step.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(const nn::ParameterList<T>& params, double learning_rate);

  const AdamState<T>& state() const { return state_; }
  void set_state(AdamState<T> state) { state_ = std::move(state); }
  const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  AdamState<T> state_;
};

}  // namespace dhal
