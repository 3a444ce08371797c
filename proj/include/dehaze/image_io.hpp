#pragma once

// Binary PPM (P6) and PGM (P5) reading and writing, 8 bits per sample.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "dehaze/errors.hpp"
#include "dehaze/image.hpp"

namespace dehaze {

namespace detail {

struct PnmHeader {
  char kind = '6';
  std::size_t width = 0, height = 0, maxval = 0;
  std::size_t payload_offset = 0;
};

inline PnmHeader parse_pnm_header(const std::vector<unsigned char>& bytes, const std::string& path) {
  auto fail = [&](const std::string& why) { return FormatError("E_PPM_HEADER", path + ": " + why); };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5')) {
    throw fail("not a binary PPM/PGM (expected P6 or P5 magic)");
  }
  PnmHeader h;
  h.kind = static_cast<char>(bytes[1]);
  std::size_t pos = 2;
  auto next_number = [&]() -> std::size_t {
    // Whitespace and '#' comments may separate header fields.
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw fail("missing header field");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > 1u << 24) throw fail("header field out of range");
      ++pos;
    }
    return v;
  };
  h.width = next_number();
  h.height = next_number();
  h.maxval = next_number();
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw fail("missing whitespace after maxval");
  h.payload_offset = pos + 1;
  if (h.width == 0 || h.height == 0) throw fail("zero image extent");
  if (h.maxval != 255) {
    throw FormatError("E_PPM_DEPTH", path + ": unsupported maxval " + std::to_string(h.maxval) +
                                         " (only 8-bit, maxval 255)");
  }
  return h;
}

inline std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline unsigned char quantize(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace detail

// Loads P6 or P5; grayscale inputs are replicated into three channels.
inline ImageRGB load_image(const std::string& path) {
  const auto bytes = detail::read_bytes(path);
  const auto h = detail::parse_pnm_header(bytes, path);
  const std::size_t per_pixel = h.kind == '6' ? 3 : 1;
  const std::size_t need = h.width * h.height * per_pixel;
  if (bytes.size() - h.payload_offset < need) {
    throw FormatError("E_PPM_PAYLOAD", path + ": truncated payload, expected " + std::to_string(need) +
                                           " bytes, found " +
                                           std::to_string(bytes.size() - h.payload_offset));
  }
  ImageRGB img(h.height, h.width);
  const unsigned char* p = bytes.data() + h.payload_offset;
  for (std::size_t i = 0; i < h.width * h.height; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      img.data()[3 * i + c] = p[i * per_pixel + (per_pixel == 3 ? c : 0)] / 255.0;
    }
  }
  return img;
}

inline GrayMap load_gray(const std::string& path) {
  const ImageRGB rgb = load_image(path);
  GrayMap g(rgb.height(), rgb.width());
  for (std::size_t i = 0; i < g.pixels(); ++i) g.data()[i] = rgb.data()[3 * i];
  return g;
}

inline void save_image(const ImageRGB& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
  std::vector<unsigned char> buf(img.data().size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = detail::quantize(img.data()[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

// Single-channel maps are written as gray PPM so every file shares one format.
inline void save_gray(const GrayMap& map, const std::string& path) {
  ImageRGB rgb(map.height(), map.width());
  for (std::size_t i = 0; i < map.pixels(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) rgb.data()[3 * i + c] = map.data()[i];
  }
  save_image(rgb, path);
}

}  // namespace dehaze
