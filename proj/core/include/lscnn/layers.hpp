#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <vector>

#include "lscnn/rng.hpp"
#include "lscnn/tensor.hpp"

namespace lscnn {

enum class Mode { kTrain, kInfer };

template <typename T>
using EigenMat =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<EigenMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const EigenMat<T>>;

template <typename T>
struct ConvParams {
  Tensor<T> weight;  // Cout x Cin x k x k
  Tensor<T> bias;    // Cout
  std::size_t stride = 1;
};

template <typename T>
struct BnScaleParams {
  Tensor<T> running_mean;  // C
  Tensor<T> running_var;   // C
  Tensor<T> gamma;         // C
  Tensor<T> beta;          // C
  T ema_factor = T(0.99);
  T epsilon = T(1e-5);
};

template <typename T>
struct FcParams {
  Tensor<T> weight;  // Nout x Nin
  Tensor<T> bias;    // Nout
};

namespace detail {

// Output extent of a valid (no padding) convolution.
inline std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t s) {
  if (in < k) throw ShapeError("conv: input smaller than kernel");
  return (in - k) / s + 1;
}

// Ceil-mode pooling extent; edge windows are truncated to in-bounds elements.
inline std::size_t pool_out_dim(std::size_t in, std::size_t k, std::size_t s) {
  // ceil((in - k) / s) + 1 with in >= 1; in - k may be negative (down to
  // -(k-1)), where the single truncated window remains.
  const long long d = static_cast<long long>(in) - static_cast<long long>(k);
  const long long q = (d + static_cast<long long>(s) - 1) /
                      static_cast<long long>(s);  // exact for d >= -(s-1)
  return static_cast<std::size_t>((d <= 0 ? 0 : q) + 1);
}

// Unrolls conv input patches into a (Cin*k*k) x (Ho*Wo) matrix, one column
// per output position.
template <typename T>
void im2col(const T* x, std::size_t c_in, std::size_t h, std::size_t w,
            std::size_t k, std::size_t s, std::size_t ho, std::size_t wo,
            T* cols) {
  for (std::size_t c = 0; c < c_in; ++c) {
    const T* plane = x + c * h * w;
    for (std::size_t u = 0; u < k; ++u) {
      for (std::size_t v = 0; v < k; ++v) {
        T* row = cols + ((c * k + u) * k + v) * (ho * wo);
        for (std::size_t i = 0; i < ho; ++i) {
          const T* src = plane + (i * s + u) * w + v;
          T* dst = row + i * wo;
          if (s == 1) {
            std::copy(src, src + wo, dst);
          } else {
            for (std::size_t j = 0; j < wo; ++j) dst[j] = src[j * s];
          }
        }
      }
    }
  }
}

// Scatter-add adjoint of im2col.
template <typename T>
void col2im(const T* cols, std::size_t c_in, std::size_t h, std::size_t w,
            std::size_t k, std::size_t s, std::size_t ho, std::size_t wo,
            T* x) {
  for (std::size_t c = 0; c < c_in; ++c) {
    T* plane = x + c * h * w;
    for (std::size_t u = 0; u < k; ++u) {
      for (std::size_t v = 0; v < k; ++v) {
        const T* row = cols + ((c * k + u) * k + v) * (ho * wo);
        for (std::size_t i = 0; i < ho; ++i) {
          T* dst = plane + (i * s + u) * w + v;
          const T* src = row + i * wo;
          for (std::size_t j = 0; j < wo; ++j) dst[j * s] += src[j];
        }
      }
    }
  }
}

inline void check_4d(const Shape& s, const char* who) {
  if (s.size() != 4)
    throw ShapeError(std::string(who) + ": expects N x C x H x W, got " +
                     shape_str(s));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution (valid cross-correlation, square kernel)

template <typename T>
void conv2d_check(const Tensor<T>& x, const ConvParams<T>& p) {
  detail::check_4d(x.shape(), "conv2d");
  if (p.weight.rank() != 4 || p.weight.dim(2) != p.weight.dim(3))
    throw ShapeError("conv2d: weight must be Cout x Cin x k x k");
  if (p.bias.rank() != 1 || p.bias.dim(0) != p.weight.dim(0))
    throw ShapeError("conv2d: bias length must equal Cout");
  if (x.dim(1) != p.weight.dim(1))
    throw ShapeError("conv2d: input channels " + std::to_string(x.dim(1)) +
                     " != weight Cin " + std::to_string(p.weight.dim(1)));
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const ConvParams<T>& p) {
  conv2d_check(x, p);
  const std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t co = p.weight.dim(0), k = p.weight.dim(2), s = p.stride;
  const std::size_t ho = detail::conv_out_dim(h, k, s);
  const std::size_t wo = detail::conv_out_dim(w, k, s);
  const std::size_t kk = ci * k * k, pos = ho * wo;

  Tensor<T> y({n, co, ho, wo});
  std::vector<T> cols(kk * pos);
  ConstMatMap<T> wm(p.weight.data(), co, kk);
  for (std::size_t b = 0; b < n; ++b) {
    detail::im2col(x.data() + b * ci * h * w, ci, h, w, k, s, ho, wo,
                   cols.data());
    ConstMatMap<T> cm(cols.data(), kk, pos);
    MatMap<T> ym(y.data() + b * co * pos, co, pos);
    ym.noalias() = wm * cm;
    for (std::size_t o = 0; o < co; ++o)
      ym.row(o).array() += p.bias[o];
  }
  return y;
}

// Single-image convenience overload (C x H x W).
template <typename T>
Tensor<T> conv2d_forward_3d(const Tensor<T>& x, const ConvParams<T>& p) {
  if (x.rank() != 3) throw ShapeError("conv2d_forward_3d: expects C x H x W");
  Shape s4 = {1, x.dim(0), x.dim(1), x.dim(2)};
  Tensor<T> y = conv2d_forward(x.reshaped(s4), p);
  return y.reshaped({y.dim(1), y.dim(2), y.dim(3)});
}

template <typename T>
struct ConvGrads {
  Tensor<T> weight;
  Tensor<T> bias;
  Tensor<T> input;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const ConvParams<T>& p,
                             const Tensor<T>& grad_out) {
  conv2d_check(x, p);
  const std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t co = p.weight.dim(0), k = p.weight.dim(2), s = p.stride;
  const std::size_t ho = detail::conv_out_dim(h, k, s);
  const std::size_t wo = detail::conv_out_dim(w, k, s);
  if (grad_out.shape() != Shape{n, co, ho, wo})
    throw ShapeError("conv2d_backward: upstream gradient shape mismatch");
  const std::size_t kk = ci * k * k, pos = ho * wo;

  ConvGrads<T> g{Tensor<T>(p.weight.shape()), Tensor<T>(p.bias.shape()),
                 Tensor<T>(x.shape())};
  std::vector<T> cols(kk * pos), gcols(kk * pos);
  ConstMatMap<T> wm(p.weight.data(), co, kk);
  MatMap<T> gwm(g.weight.data(), co, kk);
  for (std::size_t b = 0; b < n; ++b) {
    detail::im2col(x.data() + b * ci * h * w, ci, h, w, k, s, ho, wo,
                   cols.data());
    ConstMatMap<T> cm(cols.data(), kk, pos);
    ConstMatMap<T> gym(grad_out.data() + b * co * pos, co, pos);
    gwm.noalias() += gym * cm.transpose();
    for (std::size_t o = 0; o < co; ++o) g.bias[o] += gym.row(o).sum();
    MatMap<T> gcm(gcols.data(), kk, pos);
    gcm.noalias() = wm.transpose() * gym;
    detail::col2im(gcols.data(), ci, h, w, k, s, ho, wo,
                   g.input.data() + b * ci * h * w);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Max pooling, ceil mode, edge windows truncated to in-bounds elements

template <typename T>
struct PoolResult {
  Tensor<T> output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

template <typename T>
PoolResult<T> maxpool_forward(const Tensor<T>& x, std::size_t k = 2,
                              std::size_t s = 2) {
  detail::check_4d(x.shape(), "maxpool");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t ho = detail::pool_out_dim(h, k, s);
  const std::size_t wo = detail::pool_out_dim(w, k, s);
  PoolResult<T> r{Tensor<T>({n, c, ho, wo}), {}};
  r.argmax.resize(n * c * ho * wo);
  std::size_t out = 0;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* plane = x.data() + (b * c + ch) * h * w;
      const std::size_t base = (b * c + ch) * h * w;
      for (std::size_t i = 0; i < ho; ++i) {
        const std::size_t h_end = std::min(i * s + k, h);
        for (std::size_t j = 0; j < wo; ++j) {
          const std::size_t w_end = std::min(j * s + k, w);
          T best = plane[i * s * w + j * s];
          std::size_t best_idx = i * s * w + j * s;
          for (std::size_t y = i * s; y < h_end; ++y) {
            for (std::size_t z = j * s; z < w_end; ++z) {
              const T v = plane[y * w + z];
              if (v > best) {  // strict: ties go to the first in scan order
                best = v;
                best_idx = y * w + z;
              }
            }
          }
          r.output[out] = best;
          r.argmax[out] = static_cast<std::uint32_t>(base + best_idx);
          ++out;
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool_backward(const std::vector<std::uint32_t>& argmax,
                           const Shape& input_shape,
                           const Tensor<T>& grad_out) {
  if (argmax.size() != grad_out.size())
    throw StateError("maxpool_backward: cache does not match gradient");
  Tensor<T> gx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i)
    gx[argmax[i]] += grad_out[i];
  return gx;
}

// ---------------------------------------------------------------------------
// Batch normalization fused with the scale layer (gamma, beta)

template <typename T>
struct BnCache {
  Tensor<T> x_hat;             // normalized input
  std::vector<T> inv_std;      // per channel
  std::size_t count = 0;       // N*H*W per channel
};

// Train mode normalizes by batch statistics and updates the running ones by
// exponential moving average; infer mode uses the running statistics only.
template <typename T>
Tensor<T> batchnorm_scale_forward(const Tensor<T>& x, BnScaleParams<T>& p,
                                  Mode mode, BnCache<T>* cache = nullptr) {
  detail::check_4d(x.shape(), "batchnorm");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (p.gamma.dim(0) != c)
    throw ShapeError("batchnorm: channel count mismatch");
  const std::size_t plane = h * w, m = n * plane;
  Tensor<T> y(x.shape());

  if (mode == Mode::kInfer) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T inv = T(1) / std::sqrt(p.running_var[ch] + p.epsilon);
      const T g = p.gamma[ch], b = p.beta[ch], mu = p.running_mean[ch];
      for (std::size_t bn = 0; bn < n; ++bn) {
        const T* src = x.data() + (bn * c + ch) * plane;
        T* dst = y.data() + (bn * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i)
          dst[i] = g * ((src[i] - mu) * inv) + b;
      }
    }
    return y;
  }

  if (m < 2)
    throw NumericError(
        "batchnorm: train mode needs at least 2 elements per channel "
        "(degenerate variance)");
  if (cache) {
    cache->x_hat = Tensor<T>(x.shape());
    cache->inv_std.assign(c, T(0));
    cache->count = m;
  }
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t bn = 0; bn < n; ++bn) {
      const T* src = x.data() + (bn * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum += src[i];
        sq += static_cast<double>(src[i]) * src[i];
      }
    }
    const double mean = sum / static_cast<double>(m);
    double var = sq / static_cast<double>(m) - mean * mean;
    if (var < 0.0) var = 0.0;  // guard rounding
    const T mu = static_cast<T>(mean), v = static_cast<T>(var);
    const T inv = T(1) / std::sqrt(v + p.epsilon);
    const T g = p.gamma[ch], b = p.beta[ch];
    for (std::size_t bn = 0; bn < n; ++bn) {
      const T* src = x.data() + (bn * c + ch) * plane;
      T* dst = y.data() + (bn * c + ch) * plane;
      T* xh = cache ? cache->x_hat.data() + (bn * c + ch) * plane : nullptr;
      for (std::size_t i = 0; i < plane; ++i) {
        const T norm = (src[i] - mu) * inv;
        if (xh) xh[i] = norm;
        dst[i] = g * norm + b;
      }
    }
    if (cache) cache->inv_std[ch] = inv;
    p.running_mean[ch] = p.ema_factor * p.running_mean[ch] +
                         (T(1) - p.ema_factor) * mu;
    p.running_var[ch] =
        p.ema_factor * p.running_var[ch] + (T(1) - p.ema_factor) * v;
  }
  return y;
}

template <typename T>
struct BnGrads {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> input;
};

// Backward through train-mode normalization (batch statistics included).
template <typename T>
BnGrads<T> batchnorm_scale_backward(const BnCache<T>& cache,
                                    const BnScaleParams<T>& p,
                                    const Tensor<T>& grad_out) {
  if (cache.x_hat.shape() != grad_out.shape())
    throw StateError("batchnorm_backward: missing or mismatched cache");
  const Shape& s = grad_out.shape();
  const std::size_t n = s[0], c = s[1], plane = s[2] * s[3];
  const std::size_t m = cache.count;
  BnGrads<T> g{Tensor<T>({c}), Tensor<T>({c}), Tensor<T>(s)};
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t bn = 0; bn < n; ++bn) {
      const std::size_t off = (bn * c + ch) * plane;
      const T* dy = grad_out.data() + off;
      const T* xh = cache.x_hat.data() + off;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += static_cast<double>(dy[i]) * xh[i];
      }
    }
    g.beta[ch] = static_cast<T>(sum_dy);
    g.gamma[ch] = static_cast<T>(sum_dy_xhat);
    const T scale = p.gamma[ch] * cache.inv_std[ch] / static_cast<T>(m);
    const T sdy = static_cast<T>(sum_dy), sdyx = static_cast<T>(sum_dy_xhat);
    for (std::size_t bn = 0; bn < n; ++bn) {
      const std::size_t off = (bn * c + ch) * plane;
      const T* dy = grad_out.data() + off;
      const T* xh = cache.x_hat.data() + off;
      T* dx = g.input.data() + off;
      for (std::size_t i = 0; i < plane; ++i)
        dx[i] = scale * (static_cast<T>(m) * dy[i] - sdy - xh[i] * sdyx);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// ReLU

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
  if (!x.same_shape(grad_out))
    throw StateError("relu_backward: cache/gradient shape mismatch");
  Tensor<T> gx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    gx[i] = x[i] > T(0) ? grad_out[i] : T(0);
  return gx;
}

// ---------------------------------------------------------------------------
// Fully connected

template <typename T>
Tensor<T> fc_forward(const Tensor<T>& x, const FcParams<T>& p) {
  const std::size_t nout = p.weight.dim(0), nin = p.weight.dim(1);
  if (x.rank() == 1) {
    if (x.dim(0) != nin) throw ShapeError("fc: input size mismatch");
    Tensor<T> y = fc_forward(x.reshaped({1, nin}), p);
    return y.reshaped({nout});
  }
  if (x.rank() != 2 || x.dim(1) != nin)
    throw ShapeError("fc: expects N x " + std::to_string(nin) + ", got " +
                     shape_str(x.shape()));
  const std::size_t n = x.dim(0);
  Tensor<T> y({n, nout});
  ConstMatMap<T> xm(x.data(), n, nin);
  ConstMatMap<T> wm(p.weight.data(), nout, nin);
  MatMap<T> ym(y.data(), n, nout);
  ym.noalias() = xm * wm.transpose();
  for (std::size_t o = 0; o < nout; ++o) ym.col(o).array() += p.bias[o];
  return y;
}

template <typename T>
struct FcGrads {
  Tensor<T> weight;
  Tensor<T> bias;
  Tensor<T> input;
};

template <typename T>
FcGrads<T> fc_backward(const Tensor<T>& x, const FcParams<T>& p,
                       const Tensor<T>& grad_out) {
  const std::size_t nout = p.weight.dim(0), nin = p.weight.dim(1);
  if (x.rank() != 2 || grad_out.rank() != 2 || grad_out.dim(1) != nout ||
      x.dim(0) != grad_out.dim(0))
    throw StateError("fc_backward: cache/gradient shape mismatch");
  const std::size_t n = x.dim(0);
  FcGrads<T> g{Tensor<T>(p.weight.shape()), Tensor<T>(p.bias.shape()),
               Tensor<T>(x.shape())};
  ConstMatMap<T> xm(x.data(), n, nin);
  ConstMatMap<T> wm(p.weight.data(), nout, nin);
  ConstMatMap<T> gym(grad_out.data(), n, nout);
  MatMap<T>(g.weight.data(), nout, nin).noalias() = gym.transpose() * xm;
  MatMap<T>(g.input.data(), n, nin).noalias() = gym * wm;
  for (std::size_t o = 0; o < nout; ++o) g.bias[o] = gym.col(o).sum();
  return g;
}

// ---------------------------------------------------------------------------
// Dropout (inverted scaling at train time)

template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& x, double rate, Mode mode, Rng& rng,
                          Tensor<T>* mask_out = nullptr) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout: rate must be in [0, 1)");
  if (mode == Mode::kInfer || rate == 0.0) {
    if (mask_out) *mask_out = Tensor<T>::full(x.shape(), T(1));
    return x;
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> y(x.shape());
  Tensor<T> mask(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T m = rng.uniform() < rate ? T(0) : keep_scale;
    mask[i] = m;
    y[i] = x[i] * m;
  }
  if (mask_out) *mask_out = std::move(mask);
  return y;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& mask, const Tensor<T>& grad_out) {
  if (!mask.same_shape(grad_out))
    throw StateError("dropout_backward: cache/gradient shape mismatch");
  Tensor<T> gx(grad_out.shape());
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = grad_out[i] * mask[i];
  return gx;
}

// ---------------------------------------------------------------------------
// Softmax over two classes with mean cross-entropy loss

template <typename T>
struct SoftmaxResult {
  double loss = 0.0;
  Tensor<T> probs;        // N x 2
  Tensor<T> grad_logits;  // (probs - onehot) / N
};

template <typename T>
SoftmaxResult<T> softmax_xent(const Tensor<T>& logits,
                              const std::vector<int>& labels) {
  if (logits.rank() != 2 || logits.dim(1) != 2)
    throw ShapeError("softmax_xent: expects N x 2 logits");
  const std::size_t n = logits.dim(0);
  if (labels.size() != n)
    throw ShapeError("softmax_xent: labels/logits size mismatch");
  SoftmaxResult<T> r{0.0, Tensor<T>({n, 2}), Tensor<T>({n, 2})};
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T a = logits.at(i, std::size_t(0)), b = logits.at(i, std::size_t(1));
    const T m = a > b ? a : b;
    const double ea = std::exp(static_cast<double>(a - m));
    const double eb = std::exp(static_cast<double>(b - m));
    const double z = ea + eb;
    const double pa = ea / z, pb = eb / z;
    r.probs.at(i, std::size_t(0)) = static_cast<T>(pa);
    r.probs.at(i, std::size_t(1)) = static_cast<T>(pb);
    const int label = labels[i];
    if (label != 0 && label != 1)
      throw ConfigError("softmax_xent: labels must be 0 or 1");
    // log p = (x_label - m) - log z, stable for extreme logits
    const double logp =
        static_cast<double>((label == 0 ? a : b) - m) - std::log(z);
    loss -= logp;
    r.grad_logits.at(i, std::size_t(0)) =
        static_cast<T>((pa - (label == 0 ? 1.0 : 0.0)) / n);
    r.grad_logits.at(i, std::size_t(1)) =
        static_cast<T>((pb - (label == 1 ? 1.0 : 0.0)) / n);
  }
  r.loss = loss / static_cast<double>(n);
  return r;
}

}  // namespace lscnn
