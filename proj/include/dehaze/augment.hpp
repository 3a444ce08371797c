#pragma once

// Paired augmentations: random crop, horizontal flip, cutout, mosaic.
// Geometric transforms act identically on every map of a HazePair.

#include <array>
#include <cmath>
#include <optional>
#include <span>

#include "dehaze/errors.hpp"
#include "dehaze/image.hpp"
#include "dehaze/rng.hpp"
#include "dehaze/synth.hpp"

namespace dehaze {

struct CutoutSpec {
  std::size_t count = 1;
  double max_fraction = 0.1;  // per rectangle, of H * W
};

struct AugmentSpec {
  std::optional<std::size_t> crop;  // square target extent
  double hflip_prob = 0.0;
  std::optional<CutoutSpec> cutout;
  double mosaic_prob = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    auto prob = [](double p, const char* what) {
      if (!(p >= 0.0 && p <= 1.0)) throw ParameterError(std::string(what) + " must lie in [0,1]");
    };
    prob(hflip_prob, "hflip_prob");
    prob(mosaic_prob, "mosaic_prob");
    if (crop && *crop == 0) throw ParameterError("crop extent must be >= 1");
    if (cutout && !(cutout->max_fraction > 0.0 && cutout->max_fraction <= 0.25)) {
      throw ParameterError("cutout max_fraction must lie in (0, 0.25]");
    }
  }

  bool any() const { return crop || hflip_prob > 0.0 || cutout || mosaic_prob > 0.0; }
};

inline HazePair crop_pair(const HazePair& p, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  return {crop(p.hazy, y0, x0, h, w), crop(p.clean, y0, x0, h, w), crop(p.t_true, y0, x0, h, w),
          crop(p.t_dcp, y0, x0, h, w), p.light};
}

inline HazePair hflip_pair(const HazePair& p) {
  return {hflip(p.hazy), hflip(p.clean), hflip(p.t_true), hflip(p.t_dcp), p.light};
}

struct Rect {
  std::size_t y0 = 0, x0 = 0, h = 0, w = 0;
};

// Zeroes one random rectangle of area <= max_fraction * H * W in the network
// inputs (hazy RGB and t_dcp). The clean target and t_true are untouched.
inline Rect apply_cutout(HazePair& p, double max_fraction, Rng& rng) {
  const std::size_t H = p.hazy.height(), W = p.hazy.width();
  const double budget = max_fraction * double(H * W);
  const auto max_h = std::clamp<std::size_t>(static_cast<std::size_t>(std::sqrt(budget)), 1, H);
  Rect r;
  r.h = static_cast<std::size_t>(rng.uniform_int(1, static_cast<long>(max_h)));
  const auto max_w = std::clamp<std::size_t>(static_cast<std::size_t>(budget / double(r.h)), 1, W);
  r.w = static_cast<std::size_t>(rng.uniform_int(1, static_cast<long>(max_w)));
  r.y0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(H - r.h)));
  r.x0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(W - r.w)));
  for (std::size_t y = r.y0; y < r.y0 + r.h; ++y) {
    for (std::size_t x = r.x0; x < r.x0 + r.w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) p.hazy(y, x, c) = 0.0;
      p.t_dcp(y, x) = 0.0;
    }
  }
  return r;
}

// Crop, then flip, then cutout. Mosaic needs several pairs and is applied by
// the caller through mosaic4 before this step.
inline HazePair augment(const HazePair& pair, const AugmentSpec& spec, Rng& rng) {
  spec.validate();
  HazePair out = pair;
  if (spec.crop) {
    const std::size_t c = *spec.crop;
    if (c > pair.hazy.height() || c > pair.hazy.width()) {
      throw ParameterError("crop " + std::to_string(c) + " exceeds source extent " +
                           std::to_string(pair.hazy.height()) + "x" + std::to_string(pair.hazy.width()));
    }
    const auto y0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(pair.hazy.height() - c)));
    const auto x0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(pair.hazy.width() - c)));
    out = crop_pair(pair, y0, x0, c, c);
  }
  if (spec.hflip_prob > 0.0 && rng.bernoulli(spec.hflip_prob)) out = hflip_pair(out);
  if (spec.cutout) {
    for (std::size_t k = 0; k < spec.cutout->count; ++k) apply_cutout(out, spec.cutout->max_fraction, rng);
  }
  return out;
}

struct MosaicResult {
  HazePair pair;  // pair.light is the top-left quadrant's light
  std::size_t center_y = 0, center_x = 0;
  std::array<AtmosphericLight, 4> lights;
};

// Quadrant q (0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right) is
// filled from pairs[q] using one window shared by all of its maps.
inline MosaicResult mosaic4(std::span<const HazePair* const, 4> pairs, std::size_t target, Rng& rng,
                            std::optional<std::array<std::size_t, 2>> center = std::nullopt) {
  for (const HazePair* p : pairs) {
    if (p->hazy.height() < target || p->hazy.width() < target) {
      throw ParameterError("mosaic4 source smaller than target extent " + std::to_string(target));
    }
  }
  MosaicResult r;
  if (center) {
    r.center_y = (*center)[0];
    r.center_x = (*center)[1];
    if (r.center_y > target || r.center_x > target) throw ParameterError("mosaic center outside target");
  } else {
    r.center_y = static_cast<std::size_t>(rng.uniform_int(static_cast<long>(target / 4), static_cast<long>(3 * target / 4)));
    r.center_x = static_cast<std::size_t>(rng.uniform_int(static_cast<long>(target / 4), static_cast<long>(3 * target / 4)));
  }
  HazePair& out = r.pair;
  out.hazy = ImageRGB(target, target);
  out.clean = ImageRGB(target, target);
  out.t_true = TransmissionMap(target, target);
  out.t_dcp = TransmissionMap(target, target);
  out.light = pairs[0]->light;

  for (std::size_t q = 0; q < 4; ++q) {
    const std::size_t qy = q < 2 ? 0 : r.center_y;
    const std::size_t qx = q % 2 == 0 ? 0 : r.center_x;
    const std::size_t qh = q < 2 ? r.center_y : target - r.center_y;
    const std::size_t qw = q % 2 == 0 ? r.center_x : target - r.center_x;
    const HazePair& src = *pairs[q];
    r.lights[q] = src.light;
    if (qh == 0 || qw == 0) continue;
    const auto sy = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(src.hazy.height() - qh)));
    const auto sx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(src.hazy.width() - qw)));
    for (std::size_t y = 0; y < qh; ++y) {
      for (std::size_t x = 0; x < qw; ++x) {
        for (std::size_t c = 0; c < 3; ++c) {
          out.hazy(qy + y, qx + x, c) = src.hazy(sy + y, sx + x, c);
          out.clean(qy + y, qx + x, c) = src.clean(sy + y, sx + x, c);
        }
        out.t_true(qy + y, qx + x) = src.t_true(sy + y, sx + x);
        out.t_dcp(qy + y, qx + x) = src.t_dcp(sy + y, sx + x);
      }
    }
  }
  return r;
}

// Draws one training sample: optional mosaic with three other random pairs,
// then augment().
inline HazePair draw_training_sample(std::span<const HazePair> data, std::size_t index, const AugmentSpec& spec,
                                     Rng& rng) {
  if (spec.mosaic_prob > 0.0 && rng.bernoulli(spec.mosaic_prob) && !data.empty()) {
    std::array<const HazePair*, 4> quad{&data[index], nullptr, nullptr, nullptr};
    for (std::size_t q = 1; q < 4; ++q) {
      quad[q] = &data[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(data.size() - 1)))];
    }
    const std::size_t target = std::min(data[index].hazy.height(), data[index].hazy.width());
    auto m = mosaic4(std::span<const HazePair* const, 4>(quad), target, rng);
    return augment(m.pair, spec, rng);
  }
  return augment(data[index], spec, rng);
}

}  // namespace dehaze
