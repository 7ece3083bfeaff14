#pragma once

#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "lscnn/errors.hpp"
#include "lscnn/rng.hpp"

namespace lscnn {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_product(const Shape& s) {
  if (s.empty()) throw ShapeError("empty shape");
  std::size_t n = 1;
  for (std::size_t d : s) {
    if (d == 0) throw ShapeError("zero dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

// Dense row-major tensor. Feature maps are C x H x W, batches N x C x H x W.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(shape_product(shape_), T(0)) {}

  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size())
      throw ShapeError("data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(const Shape& shape) { return Tensor(shape); }

  static Tensor full(const Shape& shape, T value) {
    Tensor t(shape);
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  static Tensor normal(const Shape& shape, T mean, T stddev, Rng& rng) {
    if (stddev < T(0)) throw ConfigError("normal fill: negative stddev");
    Tensor t(shape);
    for (T& v : t.data_) v = static_cast<T>(rng.normal(mean, stddev));
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  T& at(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  const T& at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  // Copy of channels [lo, hi) of a C x H x W tensor.
  Tensor slice_channels(std::size_t lo, std::size_t hi) const {
    require_rank3("slice_channels");
    if (!(lo < hi && hi <= shape_[0]))
      throw ShapeError("slice_channels: range [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + ") invalid for " +
                       std::to_string(shape_[0]) + " channels");
    const std::size_t plane = shape_[1] * shape_[2];
    Tensor out({hi - lo, shape_[1], shape_[2]});
    std::copy(data_.begin() + lo * plane, data_.begin() + hi * plane,
              out.data_.begin());
    return out;
  }

  // Writes src into channels [lo, hi); the inverse of slice_channels.
  void assign_channels(std::size_t lo, std::size_t hi, const Tensor& src) {
    require_rank3("assign_channels");
    if (!(lo < hi && hi <= shape_[0]))
      throw ShapeError("assign_channels: invalid channel range");
    if (src.rank() != 3 || src.shape_[0] != hi - lo ||
        src.shape_[1] != shape_[1] || src.shape_[2] != shape_[2])
      throw ShapeError("assign_channels: source shape " +
                       shape_str(src.shape_) + " does not fit");
    const std::size_t plane = shape_[1] * shape_[2];
    std::copy(src.data_.begin(), src.data_.end(), data_.begin() + lo * plane);
  }

  Tensor reshaped(Shape shape) const {
    if (shape_product(shape) != data_.size())
      throw ShapeError("reshape to " + shape_str(shape) + " from " +
                       shape_str(shape_));
    return Tensor(std::move(shape), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i)
      out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  bool operator==(const Tensor& o) const {
    return shape_ == o.shape_ && data_ == o.data_;
  }

 private:
  void require_rank3(const char* op) const {
    if (shape_.size() != 3)
      throw ShapeError(std::string(op) + ": expects a C x H x W tensor, got " +
                       shape_str(shape_));
  }

  Shape shape_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename T>
Tensor<T> zeros(const Shape& shape) {
  return Tensor<T>::zeros(shape);
}

template <typename T>
Tensor<T> fill_normal(const Shape& shape, T mean, T stddev, Rng& rng) {
  return Tensor<T>::normal(shape, mean, stddev, rng);
}

}  // namespace lscnn
