#ifndef KEYVEC_NN_SGD_HPP
#define KEYVEC_NN_SGD_HPP

#include <cmath>
#include <limits>

#include "keyvec/nn/param_store.hpp"

namespace keyvec::nn {

/// Plain SGD with global-norm clipping. If the gradient norm g exceeds
/// clip_norm every gradient is scaled by clip_norm / g before the update.
/// Gradients are zeroed afterwards. Returns the pre-clipping norm.
template <typename T>
double sgd_step(ParamStore<T>& store, double lr, double clip_norm = std::numeric_limits<double>::infinity()) {
  if (!(lr > 0.0)) throw InvalidConfig("learning rate must be positive");
  const double norm = store.grad_norm();
  const double factor = norm > clip_norm ? clip_norm / norm : 1.0;
  const T step = static_cast<T>(lr * factor);
  for (auto& [_, p] : store) {
    auto v = p.value.data();
    auto g = p.grad.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= step * g[i];
  }
  store.zero_grad();
  return norm;
}

}  // namespace keyvec::nn

#endif  // KEYVEC_NN_SGD_HPP
