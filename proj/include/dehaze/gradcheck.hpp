#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "dehaze/autograd.hpp"
#include "dehaze/rng.hpp"
#include "dehaze/tensor.hpp"

namespace dehaze {

struct GradcheckOptions {
  double step = 1e-3;
  // When x +/- step crosses a kink, the step shrinks tenfold down to this.
  double min_step = 1e-6;
  std::size_t samples_per_tensor = 20;
  std::uint64_t seed = 1234;
  // Denominator floor for the relative error, so coordinates whose true
  // gradient is zero are judged by absolute error instead.
  double abs_floor = 1e-6;
};

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;  // compared
  // Coordinates where even min_step crosses a kink (a max selection or relu
  // sign flips). Central differences there do not estimate the derivative,
  // so they are left out of the comparison.
  std::size_t skipped_kinks = 0;
  std::size_t reduced_steps = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  // At most a quarter of the sample may be skipped, or the check says little.
  bool passed(double tol) const {
    return std::isfinite(max_rel_error) && max_rel_error < tol && coordinates > 0 &&
           4 * skipped_kinks <= coordinates + skipped_kinks;
  }
};

struct NamedTensor {
  std::string name;
  Tensor<double>* tensor;
};

// Central-difference check of d(loss)/d(tensor) for every listed tensor.
// `build` records the scalar loss on a fresh tape, referencing each tensor
// through Tape::parameter so analytic gradients land in tensor->grad().
template <typename Build>
GradcheckResult finite_diff_gradcheck(Build&& build, const std::vector<NamedTensor>& tensors,
                                      const GradcheckOptions& opts = {}) {
  for (const auto& nt : tensors) nt.tensor->zero_grad();
  std::uint64_t base_signature = 0;
  {
    Tape<double> tape;
    tape.track_branches(true);
    Var<double> loss = build(tape);
    base_signature = tape.branch_signature();
    tape.backward(loss);
  }
  bool crossed = false;
  auto evaluate = [&] {
    Tape<double> tape;
    tape.track_branches(true);
    const double v = build(tape).value()[0];
    crossed = crossed || tape.branch_signature() != base_signature;
    return v;
  };

  Rng rng(opts.seed);
  GradcheckResult result;
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    Tensor<double>& x = *tensors[ti].tensor;
    const Tensor<double> analytic = x.grad();

    std::vector<std::size_t> coords(x.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > opts.samples_per_tensor) {
      for (std::size_t i = 0; i < opts.samples_per_tensor; ++i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<long>(i), static_cast<long>(coords.size() - 1)));
        std::swap(coords[i], coords[j]);
      }
      coords.resize(opts.samples_per_tensor);
    }

    for (std::size_t idx : coords) {
      const double saved = x[idx];
      double h = opts.step;
      double numeric = 0.0;
      for (;;) {
        crossed = false;
        x[idx] = saved + h;
        const double f_plus = evaluate();
        x[idx] = saved - h;
        const double f_minus = evaluate();
        x[idx] = saved;
        numeric = (f_plus - f_minus) / (2.0 * h);
        if (!crossed || h / 10.0 < opts.min_step * (1.0 - 1e-9)) break;
        h /= 10.0;
      }
      if (h < opts.step) ++result.reduced_steps;
      if (crossed) {
        ++result.skipped_kinks;
        continue;
      }
      const double a = analytic[idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.abs_floor});
      double rel = std::abs(a - numeric) / denom;
      if (!std::isfinite(rel)) rel = std::numeric_limits<double>::infinity();
      ++result.coordinates;
      if (rel > result.max_rel_error || !std::isfinite(rel)) {
        result.max_rel_error = rel;
        result.worst_tensor = ti;
        result.worst_index = idx;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace dehaze
