#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fm3d/error.hpp"

namespace fm3d {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  return os.str();
}

// Dense row-major tensor. Rank-4 activations use (batch, channels, height,
// width); filter banks use (K, s1, s2, c); filter maps use (m1, m2, mc).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) {
      throw Error(Errc::ShapeMismatch, "tensor data has " + std::to_string(data_.size()) +
                                           " elements, shape " + shape_string(shape_) + " needs " +
                                           std::to_string(shape_size(shape_)));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::size_t offset(std::size_t a, std::size_t b, std::size_t c) const noexcept {
    return (a * shape_[1] + b) * shape_[2] + c;
  }
  std::size_t offset(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const noexcept {
    return ((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d;
  }
  T& at(std::size_t a, std::size_t b, std::size_t c) noexcept { return data_[offset(a, b, c)]; }
  const T& at(std::size_t a, std::size_t b, std::size_t c) const noexcept {
    return data_[offset(a, b, c)];
  }
  T& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) noexcept {
    return data_[offset(a, b, c, d)];
  }
  const T& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const noexcept {
    return data_[offset(a, b, c, d)];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  // Same data, new shape with identical element count.
  Tensor reshaped(Shape shape) const {
    Tensor out(std::move(shape), data_);
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
void require_shape(const Tensor<T>& t, const Shape& expected, std::string_view what) {
  if (t.shape() != expected) {
    throw Error(Errc::ShapeMismatch, std::string(what) + " has shape " + shape_string(t.shape()) +
                                         ", expected " + shape_string(expected));
  }
}

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, std::string_view what) {
  if (t.rank() != rank) {
    throw Error(Errc::ShapeMismatch, std::string(what) + " must be rank " + std::to_string(rank) +
                                         ", got shape " + shape_string(t.shape()));
  }
}

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& in) {
  std::vector<To> out(in.size());
  std::transform(in.data().begin(), in.data().end(), out.begin(),
                 [](From v) { return static_cast<To>(v); });
  return Tensor<To>(in.shape(), std::move(out));
}

}  // namespace fm3d
