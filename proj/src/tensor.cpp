#include "dhal/tensor.hpp"

#include "dhal/error.hpp"

namespace dhal {

template <typename T>
Tensor<T>& Tensor<T>::operator+=(const Tensor& o) {
  require_same_shape(*this, o, "tensor add");
  for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
  return *this;
}

template <typename T>
Tensor<T>& Tensor<T>::operator*=(T s) {
  for (auto& v : data) v *= s;
  return *this;
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ValidationError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " +
                          shape_string(b));
  }
}

template struct Tensor<float>;
template struct Tensor<double>;
template void require_same_shape(const Tensor<float>&, const Tensor<float>&, const char*);
template void require_same_shape(const Tensor<double>&, const Tensor<double>&, const char*);

}  // namespace dhal
