#pragma once

#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "dehaze/errors.hpp"
#include "dehaze/image.hpp"

namespace dehaze {

inline constexpr double kPsnrCap = 100.0;

// 10 log10(1 / MSE) over every sample of both images, capped at 100 dB.
inline double psnr(const ImageRGB& a, const ImageRGB& b) {
  require_same_extent(a, b, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.data().size());
  if (mse < 1e-10) return kPsnrCap;
  return 10.0 * std::log10(1.0 / mse);
}

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 1.0;
};

namespace detail {

inline std::vector<double> gaussian_taps(std::size_t n, double sigma) {
  std::vector<double> g(n);
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  const double s = std::accumulate(g.begin(), g.end(), 0.0);
  for (auto& v : g) v /= s;
  return g;
}

// Valid-mode separable filtering of one plane (h x w) -> (h-n+1) x (w-n+1).
inline std::vector<double> filter_valid(const std::vector<double>& src, std::size_t h, std::size_t w,
                                        const std::vector<double>& g) {
  const std::size_t n = g.size(), oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(h * ow), out(oh * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += g[k] * src[y * w + x + k];
      rows[y * ow + x] = s;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace detail

// Mean SSIM over every valid window position, averaged over the channels.
inline double ssim(const ImageRGB& a, const ImageRGB& b, const SsimParams& p = {}) {
  require_same_extent(a, b, "ssim");
  const std::size_t h = a.height(), w = a.width();
  if (h < p.window || w < p.window) {
    throw ParameterError("ssim needs images of at least " + std::to_string(p.window) + "x" +
                         std::to_string(p.window) + ", got " + std::to_string(h) + "x" + std::to_string(w));
  }
  const auto g = detail::gaussian_taps(p.window, p.sigma);
  const double c1 = (p.k1 * p.range) * (p.k1 * p.range);
  const double c2 = (p.k2 * p.range) * (p.k2 * p.range);
  double total = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> x(h * w), y(h * w), xx(h * w), yy(h * w), xy(h * w);
    for (std::size_t i = 0; i < h * w; ++i) {
      x[i] = a.data()[3 * i + c];
      y[i] = b.data()[3 * i + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::filter_valid(x, h, w, g), my = detail::filter_valid(y, h, w, g);
    const auto sxx = detail::filter_valid(xx, h, w, g), syy = detail::filter_valid(yy, h, w, g);
    const auto sxy = detail::filter_valid(xy, h, w, g);
    double s = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      s += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
           ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += s / static_cast<double>(mx.size());
  }
  return total / 3.0;
}

// Per-image scores of one model on one split, plus the hazy-input baseline.
struct MetricsRecord {
  std::string config;
  std::string dataset;
  std::vector<double> psnr;
  std::vector<double> ssim;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::vector<double> baseline_psnr;
  std::vector<double> baseline_ssim;
  double baseline_mean_psnr = 0.0;
  double baseline_mean_ssim = 0.0;

  void finalize() {
    if (psnr.empty() || psnr.size() != ssim.size()) throw ParameterError("metrics record needs matching, non-empty lists");
    auto avg = [](const std::vector<double>& v) {
      return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    mean_psnr = avg(psnr);
    mean_ssim = avg(ssim);
    baseline_mean_psnr = avg(baseline_psnr);
    baseline_mean_ssim = avg(baseline_ssim);
  }
};

}  // namespace dehaze
