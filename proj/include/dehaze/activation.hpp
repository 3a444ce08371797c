#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "dehaze/errors.hpp"

namespace dehaze {

struct ActivationKind {
  enum Kind { relu, leaky_relu, swish, mish, sigmoid, identity };

  Kind kind = relu;
  double slope = 0.01;  // leaky_relu only, must lie in (0, 1)

  friend bool operator==(const ActivationKind&, const ActivationKind&) = default;

  void validate() const {
    if (kind == leaky_relu && !(slope > 0.0 && slope < 1.0)) {
      throw ParameterError("leaky_relu slope must lie in (0,1), got " + std::to_string(slope));
    }
  }
};

inline std::string_view activation_name(ActivationKind::Kind k) {
  switch (k) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: return "leaky_relu";
    case ActivationKind::swish: return "swish";
    case ActivationKind::mish: return "mish";
    case ActivationKind::sigmoid: return "sigmoid";
    case ActivationKind::identity: return "identity";
  }
  return "?";
}

inline ActivationKind::Kind parse_activation(std::string_view name) {
  for (auto k : {ActivationKind::relu, ActivationKind::leaky_relu, ActivationKind::swish,
                 ActivationKind::mish, ActivationKind::sigmoid, ActivationKind::identity}) {
    if (activation_name(k) == name) return k;
  }
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

namespace detail {

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// log(1 + e^x) without overflow.
template <typename T>
T softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace detail

template <typename T>
T activate_scalar(const ActivationKind& a, T x) {
  switch (a.kind) {
    case ActivationKind::relu: return x > T(0) ? x : T(0);
    case ActivationKind::leaky_relu: return x > T(0) ? x : static_cast<T>(a.slope) * x;
    case ActivationKind::swish: return x * detail::stable_sigmoid(x);
    case ActivationKind::mish: return x * std::tanh(detail::softplus(x));
    case ActivationKind::sigmoid: return detail::stable_sigmoid(x);
    case ActivationKind::identity: return x;
  }
  return x;
}

template <typename T>
T activate_derivative(const ActivationKind& a, T x) {
  switch (a.kind) {
    case ActivationKind::relu: return x > T(0) ? T(1) : T(0);
    case ActivationKind::leaky_relu: return x > T(0) ? T(1) : static_cast<T>(a.slope);
    case ActivationKind::swish: {
      const T s = detail::stable_sigmoid(x);
      return s + x * s * (T(1) - s);
    }
    case ActivationKind::mish: {
      const T tsp = std::tanh(detail::softplus(x));
      return tsp + x * (T(1) - tsp * tsp) * detail::stable_sigmoid(x);
    }
    case ActivationKind::sigmoid: {
      const T s = detail::stable_sigmoid(x);
      return s * (T(1) - s);
    }
    case ActivationKind::identity: return T(1);
  }
  return T(1);
}

}  // namespace dehaze
