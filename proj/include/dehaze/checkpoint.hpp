#pragma once

// Binary checkpoint layout (all integers little-endian):
//   8 bytes  magic "DHZCKPT\0"
//   u32      format version
//   u32 + n  config echo, as config_to_text
//   u32      tensor count
//   per tensor: u32 + n name, 4 x u32 shape (n, c, h, w), numel x f32 values

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dehaze/config.hpp"
#include "dehaze/errors.hpp"
#include "dehaze/network.hpp"

namespace dehaze {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'D', 'H', 'Z', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Generator plus, for the generative core, its discriminator.
struct Model {
  explicit Model(const NetworkConfig& cfg, std::uint64_t seed = 0) : generator(cfg, seed) {
    if (cfg.core == Core::generative) discriminator.emplace(cfg, seed + 1);
  }

  const NetworkConfig& config() const { return generator.config(); }

  // Generator parameters first, then discriminator parameters.
  template <typename F>
  void for_each_parameter(F&& f) const {
    generator.parameters().for_each(f);
    if (discriminator) discriminator->parameters().for_each(f);
  }
  template <typename F>
  void for_each_parameter(F&& f) {
    generator.parameters().for_each(f);
    if (discriminator) discriminator->parameters().for_each(f);
  }

  Generator<float> generator;
  std::optional<Discriminator<float>> discriminator;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

inline void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4, "integer");
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n, "string");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void floats(float* dst, std::size_t count) {
    need(count * sizeof(float), "tensor payload");
    std::memcpy(dst, bytes_.data() + pos_, count * sizeof(float));
    pos_ += count * sizeof(float);
  }
  std::string raw(std::size_t n) {
    need(n, "header");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError("E_CKPT_TRUNCATED", path_ + ": checkpoint truncated while reading " + what);
    }
  }
  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

inline std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline std::string checkpoint_bytes(const Model& model) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_str(out, config_to_text(model.config()));
  std::uint32_t count = 0;
  model.for_each_parameter([&](const Parameter<float>&) { ++count; });
  detail::put_u32(out, count);
  model.for_each_parameter([&](const Parameter<float>& p) {
    detail::put_str(out, p.name);
    const Shape s = p.value.shape();
    for (std::size_t d : {s.n, s.c, s.h, s.w}) detail::put_u32(out, static_cast<std::uint32_t>(d));
    out.append(reinterpret_cast<const char*>(p.value.values().data()), p.value.size() * sizeof(float));
  });
  return out;
}

inline void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const std::string bytes = checkpoint_bytes(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

namespace detail {

inline NetworkConfig read_header(ByteReader& r, const std::string& path) {
  if (r.raw(sizeof kCheckpointMagic) != std::string(kCheckpointMagic, sizeof kCheckpointMagic)) {
    throw FormatError("E_CKPT_MAGIC", path + ": not a checkpoint (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("E_CKPT_VERSION", path + ": unsupported checkpoint version " + std::to_string(version));
  }
  try {
    return parse_config_text(r.str());
  } catch (const ConfigError& e) {
    throw FormatError("E_CKPT_CONFIG", path + ": unreadable config echo: " + e.what());
  }
}

inline void fill_parameters(ByteReader& r, Model& model, const std::string& path) {
  std::uint32_t expected = 0;
  model.for_each_parameter([&](const Parameter<float>&) { ++expected; });
  const std::uint32_t count = r.u32();
  if (count != expected) {
    throw FormatError("E_CKPT_LAYOUT", path + ": " + std::to_string(count) + " tensors, model has " +
                                           std::to_string(expected));
  }
  model.for_each_parameter([&](Parameter<float>& p) {
    const std::string name = r.str();
    if (name != p.name) throw FormatError("E_CKPT_LAYOUT", path + ": expected tensor '" + p.name + "', found '" + name + "'");
    Shape s;
    s.n = r.u32();
    s.c = r.u32();
    s.h = r.u32();
    s.w = r.u32();
    if (!(s == p.value.shape())) {
      throw FormatError("E_CKPT_LAYOUT", path + ": tensor '" + name + "' has shape " + s.str() + ", model expects " +
                                             p.value.shape().str());
    }
    r.floats(p.value.values().data(), p.value.size());
  });
  if (!r.at_end()) throw FormatError("E_CKPT_TRAILING", path + ": trailing bytes after last tensor");
}

}  // namespace detail

// Reads the config echo only.
inline NetworkConfig checkpoint_config(const std::filesystem::path& path) {
  const std::string bytes = detail::read_all(path);
  detail::ByteReader r(bytes, path.string());
  return detail::read_header(r, path.string());
}

// Restores into an existing model whose config must equal the echoed one.
inline void load_checkpoint(Model& model, const std::filesystem::path& path) {
  const std::string bytes = detail::read_all(path);
  detail::ByteReader r(bytes, path.string());
  const NetworkConfig stored = detail::read_header(r, path.string());
  if (!(stored == model.config())) {
    throw FormatError("E_CONFIG_MISMATCH", path.string() + ": checkpoint config '" + config_name(stored) +
                                              "' does not match model config '" + config_name(model.config()) + "'");
  }
  detail::fill_parameters(r, model, path.string());
}

// Builds the model described by the checkpoint and restores it.
inline Model load_checkpoint(const std::filesystem::path& path) {
  Model model(checkpoint_config(path));
  load_checkpoint(model, path);
  return model;
}

}  // namespace dehaze
