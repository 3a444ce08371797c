#pragma once

// Network configuration record, the named presets, and the plain-text
// configuration format:
//
//   # comment
//   preset = SPP G-U-Net 4-C (Swish)
//   base_width = 8
//
// Lines are `key = value`. A `preset` line (if any) is applied first, then
// every explicit field overrides it, whatever the line order. Unknown keys and
// repeated keys are errors.

#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dehaze/activation.hpp"
#include "dehaze/errors.hpp"

namespace dehaze {

enum class Core { segmentation, generative };
enum class Bottleneck { plain, spp, csp };
enum class Attention { none, sam, cam };

struct NetworkConfig {
  Core core = Core::generative;
  std::size_t input_channels = 4;
  Bottleneck bottleneck = Bottleneck::spp;
  Attention attention = Attention::none;
  ActivationKind activation{ActivationKind::swish};
  std::size_t extra_convs_per_stage = 1;
  std::size_t stage_kernel = 3;
  std::size_t base_width = 16;
  std::size_t depth = 3;
  std::vector<std::size_t> spp_kernels{5, 9, 13};
  // Discriminator also sees the generator input (hazy RGB, plus t when
  // input_channels is 4) stacked with the candidate image.
  bool conditional_discriminator = true;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;

  std::size_t convs_per_stage() const { return 2 + extra_convs_per_stage; }
  std::size_t width(std::size_t stage) const { return base_width << stage; }
  std::size_t divisor() const { return std::size_t{1} << depth; }
  std::size_t discriminator_channels() const {
    return conditional_discriminator ? input_channels + 3 : input_channels;
  }

  void validate() const {
    if (input_channels != 3 && input_channels != 4) {
      throw ConfigError("input_channels must be 3 or 4, got " + std::to_string(input_channels));
    }
    if (stage_kernel % 2 == 0) throw ConfigError("stage_kernel must be odd, got " + std::to_string(stage_kernel));
    if (base_width < 1) throw ConfigError("base_width must be >= 1");
    if (depth < 2 || depth > 8) throw ConfigError("depth must lie in [2, 8], got " + std::to_string(depth));
    if (bottleneck == Bottleneck::spp) {
      if (spp_kernels.empty()) throw ConfigError("spp_kernels must not be empty");
      for (std::size_t k : spp_kernels) {
        if (k % 2 == 0) throw ConfigError("spp kernel sizes must be odd, got " + std::to_string(k));
      }
    }
    try {
      activation.validate();
    } catch (const ParameterError& e) {
      throw ConfigError(e.what());
    }
  }

  // Throws unless height and width are multiples of 2^depth.
  void check_extent(std::size_t height, std::size_t width) const {
    if (height % divisor() != 0 || width % divisor() != 0 || height == 0 || width == 0) {
      throw ConfigError("input extent " + std::to_string(height) + "x" + std::to_string(width) +
                        " is not divisible by 2^depth = " + std::to_string(divisor()));
    }
  }
};

inline std::string_view core_name(Core c) { return c == Core::segmentation ? "segmentation" : "generative"; }

inline std::string_view bottleneck_name(Bottleneck b) {
  switch (b) {
    case Bottleneck::plain: return "plain";
    case Bottleneck::spp: return "spp";
    case Bottleneck::csp: return "csp";
  }
  return "?";
}

inline std::string_view attention_name(Attention a) {
  switch (a) {
    case Attention::none: return "none";
    case Attention::sam: return "sam";
    case Attention::cam: return "cam";
  }
  return "?";
}

namespace detail {

inline NetworkConfig s_unet() {
  NetworkConfig c;
  c.core = Core::segmentation;
  c.input_channels = 3;
  c.bottleneck = Bottleneck::plain;
  c.attention = Attention::none;
  c.activation = {ActivationKind::relu};
  c.extra_convs_per_stage = 0;
  return c;
}

inline NetworkConfig with(NetworkConfig c, auto&& edit) {
  edit(c);
  return c;
}

struct Preset {
  std::string_view name;
  NetworkConfig config;
  bool table;  // one of the six reported designs
};

inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> list = [] {
    const NetworkConfig s = s_unet();
    const NetworkConfig g = with(s, [](auto& c) { c.core = Core::generative; });
    const NetworkConfig g4 = with(g, [](auto& c) { c.input_channels = 4; });
    const NetworkConfig spp = with(g4, [](auto& c) { c.bottleneck = Bottleneck::spp; });
    const NetworkConfig swish = with(spp, [](auto& c) { c.activation = {ActivationKind::swish}; });
    const NetworkConfig edn = with(swish, [](auto& c) { c.extra_convs_per_stage = 1; });
    return std::vector<Preset>{
        {"S-U-Net", s, true},
        {"G-U-Net", g, true},
        {"G-U-Net 4-C", g4, true},
        {"CSP G-U-Net 4-C", with(g4, [](auto& c) { c.bottleneck = Bottleneck::csp; }), false},
        {"SPP G-U-Net 4-C (ReLU)", spp, true},
        {"SPP G-U-Net 4-C SAM", with(spp, [](auto& c) { c.attention = Attention::sam; }), false},
        {"SPP G-U-Net 4-C CAM", with(spp, [](auto& c) { c.attention = Attention::cam; }), false},
        {"SPP G-U-Net 4-C (Leaky ReLU)", with(spp, [](auto& c) { c.activation = {ActivationKind::leaky_relu}; }),
         false},
        {"SPP G-U-Net 4-C (Swish)", swish, true},
        {"SPP G-U-Net 4-C (Mish)", with(spp, [](auto& c) { c.activation = {ActivationKind::mish}; }), false},
        {"EDN-GTM", edn, true},
        {"EDN-GTM (5x5)", with(edn, [](auto& c) { c.stage_kernel = 5; }), false},
    };
  }();
  return list;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

// All twelve ablation configurations, in ablation order.
inline std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : detail::presets()) out.emplace_back(p.name);
  return out;
}

// The six designs reported side by side, left to right.
inline std::vector<std::string> table_preset_names() {
  std::vector<std::string> out;
  for (const auto& p : detail::presets())
    if (p.table) out.emplace_back(p.name);
  return out;
}

inline NetworkConfig preset_config(std::string_view name) {
  for (const auto& p : detail::presets())
    if (p.name == name) return p.config;
  std::string known;
  for (const auto& p : detail::presets()) known += (known.empty() ? "" : ", ") + std::string(p.name);
  throw ConfigError("unknown preset '" + std::string(name) + "' (known: " + known + ")");
}

// Preset name of a configuration, or "custom". Width, depth and the
// discriminator conditioning are scale knobs and do not affect the name.
inline std::string config_name(const NetworkConfig& cfg) {
  for (const auto& p : detail::presets()) {
    NetworkConfig probe = p.config;
    probe.base_width = cfg.base_width;
    probe.depth = cfg.depth;
    probe.conditional_discriminator = cfg.conditional_discriminator;
    probe.spp_kernels = cfg.spp_kernels;
    probe.activation.slope = cfg.activation.slope;
    if (probe == cfg) return std::string(p.name);
  }
  return "custom";
}

namespace detail {

inline std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

inline std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_real(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  double out = 0;
  if (!(in >> out) || !in.eof()) throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

template <typename E, std::size_t N>
E parse_enum(const std::string& key, const std::string& v, const std::array<E, N>& options,
             std::string_view (*name)(E)) {
  for (E e : options)
    if (name(e) == v) return e;
  throw ConfigError("key '" + key + "': unknown value '" + v + "'");
}

inline void apply_field(NetworkConfig& c, const std::string& key, const std::string& v) {
  if (key == "core") {
    c.core = parse_enum(key, v, std::array{Core::segmentation, Core::generative}, core_name);
  } else if (key == "input_channels") {
    c.input_channels = parse_size(key, v);
  } else if (key == "bottleneck") {
    c.bottleneck = parse_enum(key, v, std::array{Bottleneck::plain, Bottleneck::spp, Bottleneck::csp}, bottleneck_name);
  } else if (key == "attention") {
    c.attention = parse_enum(key, v, std::array{Attention::none, Attention::sam, Attention::cam}, attention_name);
  } else if (key == "activation") {
    c.activation.kind = parse_activation(v);
  } else if (key == "leaky_slope") {
    c.activation.slope = parse_real(key, v);
  } else if (key == "extra_convs_per_stage") {
    c.extra_convs_per_stage = parse_size(key, v);
  } else if (key == "stage_kernel") {
    c.stage_kernel = parse_size(key, v);
  } else if (key == "base_width") {
    c.base_width = parse_size(key, v);
  } else if (key == "depth") {
    c.depth = parse_size(key, v);
  } else if (key == "spp_kernels") {
    c.spp_kernels.clear();
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) c.spp_kernels.push_back(parse_size(key, trim(item)));
  } else if (key == "conditional_discriminator") {
    if (v != "true" && v != "false") throw ConfigError("key '" + key + "': expected true or false");
    c.conditional_discriminator = v == "true";
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

}  // namespace detail

inline NetworkConfig parse_config_text(std::string_view text) {
  std::map<std::string, std::string> fields;
  std::vector<std::string> order;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
    }
    std::string key = detail::trim(std::string_view(t).substr(0, eq));
    std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (!fields.emplace(key, value).second) throw ConfigError("line " + std::to_string(lineno) + ": repeated key '" + key + "'");
    order.push_back(key);
  }
  NetworkConfig cfg;
  if (auto it = fields.find("preset"); it != fields.end()) cfg = preset_config(it->second);
  for (const auto& key : order) {
    if (key != "preset") detail::apply_field(cfg, key, fields[key]);
  }
  cfg.validate();
  return cfg;
}

inline NetworkConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open configuration file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// Every field, one per line, in a fixed order. parse_config_text inverts it.
inline std::string config_to_text(const NetworkConfig& c) {
  std::ostringstream out;
  const std::string name = config_name(c);
  if (name != "custom") out << "# " << name << "\n";
  out << "core = " << core_name(c.core) << "\n";
  out << "input_channels = " << c.input_channels << "\n";
  out << "bottleneck = " << bottleneck_name(c.bottleneck) << "\n";
  out << "attention = " << attention_name(c.attention) << "\n";
  out << "activation = " << activation_name(c.activation.kind) << "\n";
  out << "leaky_slope = " << detail::format_real(c.activation.slope) << "\n";
  out << "extra_convs_per_stage = " << c.extra_convs_per_stage << "\n";
  out << "stage_kernel = " << c.stage_kernel << "\n";
  out << "base_width = " << c.base_width << "\n";
  out << "depth = " << c.depth << "\n";
  out << "spp_kernels = ";
  for (std::size_t i = 0; i < c.spp_kernels.size(); ++i) out << (i ? "," : "") << c.spp_kernels[i];
  out << "\n";
  out << "conditional_discriminator = " << (c.conditional_discriminator ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace dehaze
