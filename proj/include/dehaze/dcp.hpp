#pragma once

// Dark channel prior transmission estimation with guided-filter refinement.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "dehaze/errors.hpp"
#include "dehaze/image.hpp"

namespace dehaze {

struct AtmosphericLight {
  std::array<double, 3> rgb{1.0, 1.0, 1.0};

  double operator[](std::size_t c) const { return rgb[c]; }
  friend bool operator==(const AtmosphericLight&, const AtmosphericLight&) = default;
};

inline constexpr double kMinAtmosphericLight = 0.05;

struct DcpParams {
  std::size_t patch = 15;
  double omega = 0.95;
  double t_floor = 0.1;
  double bright_fraction = 0.001;
  std::size_t guided_radius = 40;
  double guided_eps = 1e-3;

  // Scaled down for the 48x48 synthetic data.
  static DcpParams toy() {
    DcpParams p;
    p.patch = 7;
    p.guided_radius = 8;
    return p;
  }

  void validate() const {
    if (patch < 1 || patch % 2 == 0) throw ParameterError("patch must be odd and >= 1");
    if (!(omega > 0.0 && omega <= 1.0)) throw ParameterError("omega must lie in (0,1]");
    if (!(t_floor >= 0.0 && t_floor < 1.0)) throw ParameterError("t_floor must lie in [0,1)");
    if (!(bright_fraction > 0.0 && bright_fraction <= 1.0)) {
      throw ParameterError("bright_fraction must lie in (0,1]");
    }
    if (guided_radius < 1) throw ParameterError("guided_radius must be >= 1");
    if (!(guided_eps > 0.0)) throw ParameterError("guided_eps must be > 0");
  }
};

namespace detail {

inline std::size_t clamp_index(long i, std::size_t n) {
  return static_cast<std::size_t>(std::clamp(i, 0L, static_cast<long>(n) - 1));
}

// Separable min filter over a (2r+1)^2 window with edge replication.
inline GrayMap min_filter(const GrayMap& src, std::size_t radius) {
  const std::size_t h = src.height(), w = src.width();
  const long r = static_cast<long>(radius);
  GrayMap rows(h, w), out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double m = src(y, x);
      for (long k = -r; k <= r; ++k) m = std::min(m, src(y, clamp_index(static_cast<long>(x) + k, w)));
      rows(y, x) = m;
    }
  }
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double m = rows(y, x);
      for (long k = -r; k <= r; ++k) m = std::min(m, rows(clamp_index(static_cast<long>(y) + k, h), x));
      out(y, x) = m;
    }
  }
  return out;
}

// Mean over a (2r+1)^2 window with edge replication, via separable running sums.
inline GrayMap box_mean(const GrayMap& src, std::size_t radius) {
  const std::size_t h = src.height(), w = src.width();
  const long r = static_cast<long>(radius);
  const double norm = 1.0 / static_cast<double>((2 * radius + 1) * (2 * radius + 1));
  GrayMap rows(h, w), out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    double s = 0.0;
    for (long k = -r; k <= r; ++k) s += src(y, clamp_index(k, w));
    for (std::size_t x = 0; x < w; ++x) {
      rows(y, x) = s;
      const long xi = static_cast<long>(x);
      s += src(y, clamp_index(xi + r + 1, w)) - src(y, clamp_index(xi - r, w));
    }
  }
  for (std::size_t x = 0; x < w; ++x) {
    double s = 0.0;
    for (long k = -r; k <= r; ++k) s += rows(clamp_index(k, h), x);
    for (std::size_t y = 0; y < h; ++y) {
      out(y, x) = s * norm;
      const long yi = static_cast<long>(y);
      s += rows(clamp_index(yi + r + 1, h), x) - rows(clamp_index(yi - r, h), x);
    }
  }
  return out;
}

}  // namespace detail

// Per pixel: minimum over the patch of the per-pixel channel minimum.
inline GrayMap dark_channel(const ImageRGB& img, std::size_t patch) {
  if (patch < 1 || patch % 2 == 0) throw ParameterError("dark_channel patch must be odd and >= 1");
  GrayMap cmin(img.height(), img.width());
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      cmin(y, x) = std::min({img(y, x, 0), img(y, x, 1), img(y, x, 2)});
    }
  }
  return patch == 1 ? cmin : detail::min_filter(cmin, patch / 2);
}

// Among the brightest ceil(fraction * H * W) dark-channel pixels, the RGB of
// the one with largest channel sum. Components floored at 0.05.
inline AtmosphericLight atmospheric_light(const ImageRGB& img, const GrayMap& dark,
                                          double bright_fraction) {
  require_same_extent(img, dark, "atmospheric_light");
  const std::size_t count = img.pixels();
  if (count == 0) throw ParameterError("atmospheric_light on empty image");
  const auto wanted = static_cast<std::size_t>(std::ceil(bright_fraction * static_cast<double>(count)));
  const std::size_t k = std::clamp<std::size_t>(wanted, 1, count);

  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& d = dark.data();
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return d[a] > d[b] || (d[a] == d[b] && a < b); });

  const auto& px = img.data();
  std::size_t best = order[0];
  double best_sum = -1.0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t p = order[i];
    const double s = px[3 * p] + px[3 * p + 1] + px[3 * p + 2];
    if (s > best_sum) {
      best_sum = s;
      best = p;
    }
  }
  AtmosphericLight a;
  for (std::size_t c = 0; c < 3; ++c) a.rgb[c] = std::clamp(px[3 * best + c], kMinAtmosphericLight, 1.0);
  return a;
}

// t = 1 - omega * dark_channel(I / A), clamped to [0, 1].
inline TransmissionMap estimate_transmission(const ImageRGB& img, const AtmosphericLight& a,
                                             const DcpParams& params) {
  ImageRGB normalized(img.height(), img.width());
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      normalized.data()[3 * i + c] = img.data()[3 * i + c] / std::max(a[c], kMinAtmosphericLight);
    }
  }
  TransmissionMap t = dark_channel(normalized, params.patch);
  for (auto& v : t.data()) v = std::clamp(1.0 - params.omega * v, 0.0, 1.0);
  return t;
}

// Single-channel guided filter: q = mean(a) * guide + mean(b), with
// a = cov(guide, src) / (var(guide) + eps) and b = mean(src) - a * mean(guide).
inline GrayMap guided_filter(const GrayMap& guide, const GrayMap& src, std::size_t radius, double eps) {
  require_same_extent(guide, src, "guided_filter");
  if (radius > std::min(guide.height(), guide.width())) {
    throw ParameterError("guided_filter radius " + std::to_string(radius) + " exceeds image extent " +
                         std::to_string(guide.height()) + "x" + std::to_string(guide.width()));
  }
  const std::size_t h = guide.height(), w = guide.width();
  GrayMap gg(h, w), gs(h, w);
  for (std::size_t i = 0; i < guide.pixels(); ++i) {
    gg.data()[i] = guide.data()[i] * guide.data()[i];
    gs.data()[i] = guide.data()[i] * src.data()[i];
  }
  const GrayMap mean_g = detail::box_mean(guide, radius);
  const GrayMap mean_s = detail::box_mean(src, radius);
  const GrayMap mean_gg = detail::box_mean(gg, radius);
  const GrayMap mean_gs = detail::box_mean(gs, radius);

  GrayMap a(h, w), b(h, w);
  for (std::size_t i = 0; i < guide.pixels(); ++i) {
    const double var = mean_gg.data()[i] - mean_g.data()[i] * mean_g.data()[i];
    const double cov = mean_gs.data()[i] - mean_g.data()[i] * mean_s.data()[i];
    a.data()[i] = cov / (var + eps);
    b.data()[i] = mean_s.data()[i] - a.data()[i] * mean_g.data()[i];
  }
  const GrayMap mean_a = detail::box_mean(a, radius);
  const GrayMap mean_b = detail::box_mean(b, radius);
  GrayMap q(h, w);
  for (std::size_t i = 0; i < guide.pixels(); ++i) {
    q.data()[i] = mean_a.data()[i] * guide.data()[i] + mean_b.data()[i];
  }
  return q;
}

// J = (I - A) / max(t, t_floor) + A, clamped to [0, 1].
inline ImageRGB recover_radiance(const ImageRGB& img, const TransmissionMap& t, const AtmosphericLight& a,
                                 double t_floor) {
  require_same_extent(img, t, "recover_radiance");
  ImageRGB out(img.height(), img.width());
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    const double tt = std::max(t.data()[i], t_floor);
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = (img.data()[3 * i + c] - a[c]) / tt + a[c];
      out.data()[3 * i + c] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

struct DcpResult {
  ImageRGB dehazed;
  TransmissionMap transmission;  // guided-filter refined, in [0, 1]
  AtmosphericLight light;
};

inline DcpResult dcp_dehaze(const ImageRGB& img, const DcpParams& params) {
  params.validate();
  const GrayMap dark = dark_channel(img, params.patch);
  const AtmosphericLight a = atmospheric_light(img, dark, params.bright_fraction);
  const TransmissionMap raw = estimate_transmission(img, a, params);
  TransmissionMap refined = guided_filter(luma(img), raw, params.guided_radius, params.guided_eps);
  refined.clamp(0.0, 1.0);
  ImageRGB dehazed = recover_radiance(img, refined, a, params.t_floor);
  return {std::move(dehazed), std::move(refined), a};
}

}  // namespace dehaze
