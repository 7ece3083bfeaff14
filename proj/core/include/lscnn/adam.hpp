#pragma once

#include <cmath>
#include <cstdint>

#include "lscnn/tensor.hpp"

namespace lscnn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One state per parameter tensor; steps on distinct tensors share nothing.
template <typename T>
struct AdamState {
  Tensor<T> m;  // first moment
  Tensor<T> v;  // second moment
  std::int64_t t = 0;

  explicit AdamState(const Shape& shape) : m(shape), v(shape) {}
  AdamState() = default;
};

template <typename T>
void adam_step(Tensor<T>& param, const Tensor<T>& grad, AdamState<T>& state,
               const AdamConfig& cfg) {
  if (!param.same_shape(grad) || !param.same_shape(state.m))
    throw ShapeError("adam_step: parameter/gradient/state shape mismatch");
  state.t += 1;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double m = b1 * state.m[i] + (1.0 - b1) * g;
    const double v = b2 * state.v[i] + (1.0 - b2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    const double m_hat = m / corr1;
    const double v_hat = v / corr2;
    param[i] = static_cast<T>(param[i] -
                              cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
  }
}

}  // namespace lscnn
