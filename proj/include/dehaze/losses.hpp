#pragma once

#include <cmath>
#include <span>

#include "dehaze/autograd.hpp"
#include "dehaze/errors.hpp"
#include "dehaze/tensor.hpp"

namespace dehaze {

struct LossWeights {
  double lambda_adv = 1.0;
  double lambda_rec = 100.0;

  void validate() const {
    if (lambda_adv < 0.0 || lambda_rec < 0.0) throw ParameterError("loss weights must be >= 0");
    if (lambda_adv == 0.0 && lambda_rec == 0.0) throw ParameterError("loss weights cannot both be zero");
  }
};

// Mean absolute error between prediction and target.
template <typename T>
Var<T> reconstruction_loss(Var<T> pred, Var<T> target) {
  require_same_shape(pred.shape(), target.shape(), "reconstruction_loss");
  const Tensor<T>& P = pred.value();
  const Tensor<T>& Y = target.value();
  double s = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) s += std::abs(double(P[i]) - double(Y[i]));
  if (pred.tape->tracking_branches()) {
    for (std::size_t i = 0; i < P.size(); ++i) pred.tape->note_branch(P[i] > Y[i] ? 2 * i + 1 : 2 * i);
  }
  const std::size_t count = P.size();
  Tensor<T> out(Shape{1, 1, 1, 1}, static_cast<T>(s / static_cast<double>(count)));
  return pred.tape->record(std::move(out), {pred, target}, [=](Tape<T>& t, std::size_t self) {
    const T g = (*t.grad_if(self))[0] / static_cast<T>(count);
    const Tensor<T>& Pv = t.value(pred.id);
    const Tensor<T>& Yv = t.value(target.id);
    for (std::size_t i = 0; i < count; ++i) {
      const T d = Pv[i] > Yv[i] ? g : (Pv[i] < Yv[i] ? -g : T(0));
      if (t.requires_grad(pred.id)) t.grad(pred.id)[i] += d;
      if (t.requires_grad(target.id)) t.grad(target.id)[i] -= d;
    }
  });
}

// 0.5 * mean((score - label)^2), the least-squares adversarial term.
template <typename T>
Var<T> least_squares(Var<T> scores, double label) {
  const Tensor<T>& S = scores.value();
  double s = 0.0;
  for (T v : S.values()) {
    if (!std::isfinite(v)) throw NumericalError("non-finite discriminator score");
    s += (double(v) - label) * (double(v) - label);
  }
  const std::size_t count = S.size();
  Tensor<T> out(Shape{1, 1, 1, 1}, static_cast<T>(0.5 * s / static_cast<double>(count)));
  return scores.tape->record(std::move(out), {scores}, [=](Tape<T>& t, std::size_t self) {
    const double g = (*t.grad_if(self))[0] / static_cast<double>(count);
    const Tensor<T>& Sv = t.value(scores.id);
    Tensor<T>& gs = t.grad(scores.id);
    for (std::size_t i = 0; i < count; ++i) gs[i] += static_cast<T>(g * (double(Sv[i]) - label));
  });
}

struct AdversarialLosses {
  double discriminator = 0.0;
  double generator = 0.0;
};

// Least-squares GAN objectives on raw discriminator scores.
inline AdversarialLosses adversarial_losses(std::span<const double> d_real,
                                            std::span<const double> d_fake) {
  auto half_mse = [](std::span<const double> xs, double label) {
    if (xs.empty()) throw ParameterError("adversarial_losses needs at least one score");
    double s = 0.0;
    for (double v : xs) {
      if (!std::isfinite(v)) throw NumericalError("non-finite discriminator score");
      s += (v - label) * (v - label);
    }
    return 0.5 * s / static_cast<double>(xs.size());
  };
  return {half_mse(d_real, 1.0) + half_mse(d_fake, 0.0), half_mse(d_fake, 1.0)};
}

inline double generator_total_loss(double adv, double rec, const LossWeights& w) {
  return w.lambda_adv * adv + w.lambda_rec * rec;
}

}  // namespace dehaze
