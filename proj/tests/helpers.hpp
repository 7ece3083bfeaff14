#pragma once

#include <cmath>
#include <functional>

#include "lscnn/layers.hpp"

namespace lscnn::testing {

// Reference convolution written as bare loops, independent of the im2col
// path it checks.
template <typename T>
Tensor<T> conv2d_reference(const Tensor<T>& x, const ConvParams<T>& p) {
  const std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t co = p.weight.dim(0), k = p.weight.dim(2), s = p.stride;
  const std::size_t ho = (h - k) / s + 1, wo = (w - k) / s + 1;
  Tensor<T> y({n, co, ho, wo});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t i = 0; i < ho; ++i)
        for (std::size_t j = 0; j < wo; ++j) {
          double acc = p.bias[o];
          for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t u = 0; u < k; ++u)
              for (std::size_t v = 0; v < k; ++v)
                acc += static_cast<double>(
                           p.weight[((o * ci + c) * k + u) * k + v]) *
                       x.at(b, c, i * s + u, j * s + v);
          y.at(b, o, i, j) = static_cast<T>(acc);
        }
  return y;
}

// Central finite difference of a scalar-valued function with respect to one
// tensor entry.
inline double central_diff(const std::function<double()>& f, double& x,
                           double h) {
  const double saved = x;
  x = saved + h;
  const double fp = f();
  x = saved - h;
  const double fm = f();
  x = saved;
  return (fp - fm) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / scale;
}

// Checks every entry of `param` against finite differences of `loss`.
// Returns the worst relative error.
inline double check_grad(const std::function<double()>& loss,
                         Tensor<double>& param, const Tensor<double>& analytic,
                         double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double fd = central_diff(loss, param[i], h);
    worst = std::max(worst, rel_err(fd, analytic[i]));
  }
  return worst;
}

}  // namespace lscnn::testing
