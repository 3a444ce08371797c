#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "dehaze/errors.hpp"

namespace dehaze {

// Interleaved H x W x Channels image with double-precision samples.
template <std::size_t Channels>
class Image {
 public:
  static constexpr std::size_t channels = Channels;

  Image() = default;
  Image(std::size_t height, std::size_t width, double fill = 0.0)
      : height_(height), width_(width), data_(height * width * Channels, fill) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t y, std::size_t x, std::size_t c = 0) {
    return data_[(y * width_ + x) * Channels + c];
  }
  double operator()(std::size_t y, std::size_t x, std::size_t c = 0) const {
    return data_[(y * width_ + x) * Channels + c];
  }

  std::vector<double>& data() & { return data_; }
  const std::vector<double>& data() const& { return data_; }
  std::vector<double> data() && { return std::move(data_); }

  void clamp(double lo = 0.0, double hi = 1.0) {
    for (auto& v : data_) v = std::clamp(v, lo, hi);
  }

  bool same_extent(std::size_t h, std::size_t w) const { return h == height_ && w == width_; }
  template <std::size_t C2>
  bool same_extent(const Image<C2>& o) const {
    return same_extent(o.height(), o.width());
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

using ImageRGB = Image<3>;
using GrayMap = Image<1>;
using TransmissionMap = Image<1>;

template <std::size_t C1, std::size_t C2>
void require_same_extent(const Image<C1>& a, const Image<C2>& b, const char* what) {
  if (a.height() != b.height()) {
    throw DimensionError("h", std::string(what) + ": height " + std::to_string(a.height()) + " vs " +
                                  std::to_string(b.height()));
  }
  if (a.width() != b.width()) {
    throw DimensionError("w", std::string(what) + ": width " + std::to_string(a.width()) + " vs " +
                                  std::to_string(b.width()));
  }
}

// Rec.601 luma.
inline GrayMap luma(const ImageRGB& img) {
  GrayMap out(img.height(), img.width());
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      out(y, x) = 0.299 * img(y, x, 0) + 0.587 * img(y, x, 1) + 0.114 * img(y, x, 2);
    }
  }
  return out;
}

template <std::size_t C>
Image<C> crop(const Image<C>& img, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  if (y0 + h > img.height() || x0 + w > img.width()) {
    throw ParameterError("crop window exceeds image extent");
  }
  Image<C> out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    const double* src = &img.data()[((y0 + y) * img.width() + x0) * C];
    std::copy_n(src, w * C, &out.data()[y * w * C]);
  }
  return out;
}

template <std::size_t C>
Image<C> hflip(const Image<C>& img) {
  Image<C> out(img.height(), img.width());
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      for (std::size_t c = 0; c < C; ++c) out(y, img.width() - 1 - x, c) = img(y, x, c);
    }
  }
  return out;
}

}  // namespace dehaze
