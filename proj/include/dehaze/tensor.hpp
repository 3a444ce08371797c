#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dehaze/errors.hpp"

namespace dehaze {

// Extents of a rank-4 tensor in (batch, channels, height, width) order.
struct Shape {
  std::size_t n = 0, c = 0, h = 0, w = 0;

  constexpr std::size_t numel() const { return n * c * h * w; }
  constexpr std::size_t plane() const { return h * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  const char* axes[] = {"n", "c", "h", "w"};
  const std::size_t av[] = {a.n, a.c, a.h, a.w};
  const std::size_t bv[] = {b.n, b.c, b.h, b.w};
  for (int i = 0; i < 4; ++i) {
    if (av[i] != bv[i]) {
      throw DimensionError(axes[i], std::string(what) + ": " + a.str() + " vs " + b.str());
    }
  }
}

// Dense rank-4 array, row-major with width fastest, plus an optional
// gradient buffer of identical shape.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.numel()) {
      throw DimensionError("numel", "data length " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_.str());
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) { return data_[index(n, c, y, x)]; }
  const T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[index(n, c, y, x)];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool has_grad() const { return grad_ != nullptr; }
  // Allocates a zeroed gradient on first access.
  Tensor<T>& grad() {
    if (!grad_) grad_ = std::make_unique<Tensor<T>>(shape_);
    return *grad_;
  }
  const Tensor<T>* grad_if() const { return grad_.get(); }
  void zero_grad() {
    if (grad_) grad_->fill(T(0));
  }
  void drop_grad() { grad_.reset(); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  Tensor(const Tensor& o) : shape_(o.shape_), data_(o.data_) {
    if (o.grad_) grad_ = std::make_unique<Tensor<T>>(*o.grad_);
  }
  Tensor& operator=(const Tensor& o) {
    if (this != &o) {
      shape_ = o.shape_;
      data_ = o.data_;
      grad_.reset();
      if (o.grad_) grad_ = std::make_unique<Tensor<T>>(*o.grad_);
    }
    return *this;
  }
  Tensor(Tensor&&) noexcept = default;
  Tensor& operator=(Tensor&&) noexcept = default;

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  Shape shape_{};
  std::vector<T> data_;
  std::unique_ptr<Tensor<T>> grad_;
};

}  // namespace dehaze
