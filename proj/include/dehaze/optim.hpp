#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dehaze/errors.hpp"
#include "dehaze/rng.hpp"
#include "dehaze/tensor.hpp"

namespace dehaze {

// Trainable tensor with Adam moment buffers. The gradient lives in
// value.grad().
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> first_moment;
  Tensor<T> second_moment;
  std::uint64_t step_count = 0;

  Parameter(std::string n, Shape shape)
      : name(std::move(n)), value(shape), first_moment(shape), second_moment(shape) {}

  Tensor<T>& grad() { return value.grad(); }
  void zero_grad() { value.zero_grad(); }
};

struct AdamSettings {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update in place. A non-finite gradient aborts before
// any state is touched.
template <typename T>
void adam_step(Parameter<T>& p, const Tensor<T>& grad, const AdamSettings& s) {
  if (!(grad.shape() == p.value.shape())) {
    require_same_shape(grad.shape(), p.value.shape(), ("adam_step on " + p.name).c_str());
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericalError("non-finite gradient in parameter '" + p.name + "' at element " +
                           std::to_string(i));
    }
  }
  p.step_count += 1;
  const double t = static_cast<double>(p.step_count);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    const double m = s.beta1 * p.first_moment[i] + (1.0 - s.beta1) * g;
    const double v = s.beta2 * p.second_moment[i] + (1.0 - s.beta2) * g * g;
    p.first_moment[i] = static_cast<T>(m);
    p.second_moment[i] = static_cast<T>(v);
    const double update = s.lr * (m / c1) / (std::sqrt(v / c2) + s.eps);
    p.value[i] = static_cast<T>(p.value[i] - update);
  }
}

template <typename T>
void adam_step(Parameter<T>& p, const AdamSettings& s) {
  adam_step(p, p.value.grad(), s);
}

// Owns parameters at stable addresses, in registration order.
template <typename T>
class ParameterStore {
 public:
  Parameter<T>& add(std::string name, Shape shape) {
    items_.push_back(std::make_unique<Parameter<T>>(std::move(name), shape));
    return *items_.back();
  }

  std::size_t size() const { return items_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *items_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *items_[i]; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : items_) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : items_) p->zero_grad();
  }

  void step(const AdamSettings& s) {
    for (auto& p : items_) adam_step(*p, s);
  }

  template <typename F>
  void for_each(F&& f) {
    for (auto& p : items_) f(*p);
  }
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& p : items_) f(static_cast<const Parameter<T>&>(*p));
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> items_;
};

// He-uniform: U(-b, b) with b = sqrt(6 / fan_in).
template <typename T>
void he_uniform(Tensor<T>& w, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace dehaze
