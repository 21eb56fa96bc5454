#include "dhal/optim.hpp"

#include <cmath>

#include "dhal/error.hpp"

namespace dhal {

template <typename T>
void Adam<T>::step(const nn::ParameterList<T>& params, double learning_rate) {
  if (state_.first.empty()) {
    for (const auto* p : params) {
      state_.first.emplace_back(p->size(), T{0});
      state_.second.emplace_back(p->size(), T{0});
    }
  }
  if (state_.first.size() != params.size()) {
    throw ValidationError("adam: parameter list changed between steps");
  }
  ++state_.step;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state_.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state_.step));
  const T step_size = static_cast<T>(learning_rate / correction1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(correction2));
  const T eps = static_cast<T>(options_.epsilon);
  const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    auto& m = state_.first[k];
    auto& v = state_.second[k];
    if (m.size() != p.size()) throw ValidationError("adam: moment size mismatch for " + p.name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const T g = p.grad[i];
      m[i] = tb1 * m[i] + (T{1} - tb1) * g;
      v[i] = tb2 * v[i] + (T{1} - tb2) * g * g;
      p.value[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + eps);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace dhal
