#pragma once

// Procedural hazy/clean pairs built from the atmospheric scattering model
// I = J * t + A * (1 - t).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dehaze/dcp.hpp"
#include "dehaze/errors.hpp"
#include "dehaze/image.hpp"
#include "dehaze/rng.hpp"

namespace dehaze {

struct HazePair {
  ImageRGB hazy;
  ImageRGB clean;
  TransmissionMap t_true;
  TransmissionMap t_dcp;
  AtmosphericLight light;
};

struct BetaRange {
  double lo = 0.5;
  double hi = 2.0;
};

inline constexpr double kMinTransmission = 0.05;

inline ImageRGB synthesize_haze(const ImageRGB& clean, const TransmissionMap& t, const AtmosphericLight& a) {
  require_same_extent(clean, t, "synthesize_haze");
  ImageRGB out(clean.height(), clean.width());
  for (std::size_t i = 0; i < clean.pixels(); ++i) {
    const double ti = t.data()[i];
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = clean.data()[3 * i + c] * ti + a[c] * (1.0 - ti);
      out.data()[3 * i + c] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

namespace detail {

inline double smoothstep(double x) { return x * x * (3.0 - 2.0 * x); }

// Value noise on a lattice with the given cell size, smoothly interpolated.
inline GrayMap value_noise(std::size_t h, std::size_t w, double cell, Rng& rng) {
  const std::size_t gh = static_cast<std::size_t>(std::ceil(h / cell)) + 2;
  const std::size_t gw = static_cast<std::size_t>(std::ceil(w / cell)) + 2;
  std::vector<double> lattice(gh * gw);
  for (auto& v : lattice) v = rng.uniform();
  GrayMap out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    const double fy = y / cell;
    const auto y0 = static_cast<std::size_t>(fy);
    const double ty = smoothstep(fy - y0);
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = x / cell;
      const auto x0 = static_cast<std::size_t>(fx);
      const double tx = smoothstep(fx - x0);
      const double a = lattice[y0 * gw + x0], b = lattice[y0 * gw + x0 + 1];
      const double c = lattice[(y0 + 1) * gw + x0], d = lattice[(y0 + 1) * gw + x0 + 1];
      out(y, x) = (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
    }
  }
  return out;
}

// A colour with one channel near zero, so patches stay dark-channel friendly.
inline std::array<double, 3> saturated_color(Rng& rng, std::size_t dark_channel) {
  std::array<double, 3> c{rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0)};
  c[dark_channel] = rng.uniform(0.0, 0.06);
  return c;
}

inline std::array<double, 3> saturated_color(Rng& rng) {
  return saturated_color(rng, static_cast<std::size_t>(rng.uniform_int(0, 2)));
}

}  // namespace detail

// Smooth pseudo-depth d in [0, 1] (correlation length about extent / 4), then
// t = exp(-beta * d) with beta drawn from `beta`. Values lie in [0.05, 1].
inline TransmissionMap random_transmission_field(std::size_t height, std::size_t width, BetaRange beta,
                                                 std::uint64_t seed) {
  if (beta.lo < 0.0 || beta.hi < beta.lo) throw ParameterError("invalid beta range");
  Rng rng(seed);
  const double cell = std::max(2.0, std::max(height, width) / 4.0);
  GrayMap depth = detail::value_noise(height, width, cell, rng);
  const auto [lo, hi] = std::minmax_element(depth.data().begin(), depth.data().end());
  const double dmin = *lo, span = *hi - *lo;
  const double b = rng.uniform(beta.lo, beta.hi);
  TransmissionMap t(height, width);
  for (std::size_t i = 0; i < t.pixels(); ++i) {
    const double d = span > 1e-12 ? (depth.data()[i] - dmin) / span : 0.0;
    t.data()[i] = std::clamp(std::exp(-b * d), kMinTransmission, 1.0);
  }
  return t;
}

// Gradient background with rectangles, disks, brightness texture and sparse
// dark speckles (shadows) so most patches contain a near-zero channel.
inline ImageRGB procedural_scene(std::size_t height, std::size_t width, Rng& rng) {
  ImageRGB img(height, width);
  // Both gradient endpoints share their dark channel so blends stay dark.
  const auto shared = static_cast<std::size_t>(rng.uniform_int(0, 2));
  const auto c0 = detail::saturated_color(rng, shared);
  const auto c1 = detail::saturated_color(rng, shared);
  const bool vertical = rng.bernoulli(0.5);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double s = vertical ? double(y) / std::max<std::size_t>(height - 1, 1)
                                : double(x) / std::max<std::size_t>(width - 1, 1);
      for (std::size_t c = 0; c < 3; ++c) img(y, x, c) = c0[c] * (1 - s) + c1[c] * s;
    }
  }

  const long shapes = rng.uniform_int(3, 7);
  for (long k = 0; k < shapes; ++k) {
    const auto col = detail::saturated_color(rng);
    const double cy = rng.uniform(0, double(height)), cx = rng.uniform(0, double(width));
    const double ry = rng.uniform(0.08, 0.3) * height, rx = rng.uniform(0.08, 0.3) * width;
    const bool disk = rng.bernoulli(0.5);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double dy = (y - cy) / ry, dx = (x - cx) / rx;
        const bool inside = disk ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (inside) {
          for (std::size_t c = 0; c < 3; ++c) img(y, x, c) = col[c];
        }
      }
    }
  }

  const GrayMap texture = detail::value_noise(height, width, std::max(2.0, width / 8.0), rng);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    const double gain = 0.65 + 0.35 * texture.data()[i];
    for (std::size_t c = 0; c < 3; ++c) img.data()[3 * i + c] *= gain;
  }
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    if (rng.bernoulli(0.02)) {
      for (std::size_t c = 0; c < 3; ++c) img.data()[3 * i + c] *= 0.05;
    }
  }
  img.clamp();
  return img;
}

// Near-achromatic airlight in [0.7, 1]^3.
inline AtmosphericLight random_atmospheric_light(Rng& rng) {
  const double base = rng.uniform(0.7, 1.0);
  AtmosphericLight a;
  for (auto& v : a.rgb) v = std::clamp(base + rng.uniform(-0.03, 0.03), 0.7, 1.0);
  return a;
}

struct SynthOptions {
  BetaRange beta{};
  DcpParams dcp = DcpParams::toy();
};

struct Dataset {
  std::vector<HazePair> train;
  std::vector<HazePair> val;
  std::uint64_t seed = 0;
  std::size_t extent = 0;
  SynthOptions options{};
};

inline std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t split, std::uint64_t index) {
  // splitmix64 finalizer over the combined key.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (2 * index + split + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline HazePair make_pair(std::size_t extent, std::uint64_t seed, const SynthOptions& opts) {
  Rng rng(seed);
  HazePair p;
  p.clean = procedural_scene(extent, extent, rng);
  p.t_true = random_transmission_field(extent, extent, opts.beta, rng.next_u64());
  p.light = random_atmospheric_light(rng);
  p.hazy = synthesize_haze(p.clean, p.t_true, p.light);
  p.t_dcp = dcp_dehaze(p.hazy, opts.dcp).transmission;
  return p;
}

// Pure function of (sizes, extent, seed, options).
inline Dataset make_dataset(std::size_t n_train, std::size_t n_val, std::size_t extent, std::uint64_t seed,
                            const SynthOptions& opts = {}) {
  if (extent < 1) throw ParameterError("dataset extent must be >= 1");
  Dataset ds;
  ds.seed = seed;
  ds.extent = extent;
  ds.options = opts;
  for (std::size_t i = 0; i < n_train; ++i) ds.train.push_back(make_pair(extent, sample_seed(seed, 0, i), opts));
  for (std::size_t i = 0; i < n_val; ++i) ds.val.push_back(make_pair(extent, sample_seed(seed, 1, i), opts));
  return ds;
}

}  // namespace dehaze
