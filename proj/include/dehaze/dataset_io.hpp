#pragma once

// On-disk dataset layout:
//   <root>/manifest.json
//   <root>/{train,val}/<index>_{hazy,clean,t}.ppm
// t_dcp is not stored; it is recomputed from the loaded hazy image with the
// DCP parameters recorded in the manifest.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "dehaze/dcp.hpp"
#include "dehaze/errors.hpp"
#include "dehaze/image_io.hpp"
#include "dehaze/synth.hpp"

namespace dehaze {

namespace fs = std::filesystem;

inline std::string sample_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", index);
  return buf;
}

inline nlohmann::ordered_json dcp_params_json(const DcpParams& p) {
  nlohmann::ordered_json j;
  j["patch"] = p.patch;
  j["omega"] = p.omega;
  j["t_floor"] = p.t_floor;
  j["bright_fraction"] = p.bright_fraction;
  j["guided_radius"] = p.guided_radius;
  j["guided_eps"] = p.guided_eps;
  return j;
}

inline DcpParams dcp_params_from_json(const nlohmann::json& j) {
  DcpParams p;
  p.patch = j.at("patch").get<std::size_t>();
  p.omega = j.at("omega").get<double>();
  p.t_floor = j.at("t_floor").get<double>();
  p.bright_fraction = j.at("bright_fraction").get<double>();
  p.guided_radius = j.at("guided_radius").get<std::size_t>();
  p.guided_eps = j.at("guided_eps").get<double>();
  return p;
}

inline void write_dataset(const Dataset& ds, const fs::path& root) {
  std::error_code ec;
  fs::create_directories(root / "train", ec);
  fs::create_directories(root / "val", ec);
  if (ec) throw IoError("cannot create dataset directory '" + root.string() + "': " + ec.message());

  nlohmann::ordered_json manifest;
  manifest["format"] = "dehaze-dataset";
  manifest["version"] = 1;
  manifest["seed"] = ds.seed;
  manifest["extent"] = ds.extent;
  manifest["n_train"] = ds.train.size();
  manifest["n_val"] = ds.val.size();
  manifest["beta"] = {ds.options.beta.lo, ds.options.beta.hi};
  manifest["dcp"] = dcp_params_json(ds.options.dcp);
  auto& samples = manifest["samples"] = nlohmann::ordered_json::array();

  auto emit = [&](const std::vector<HazePair>& pairs, const char* split) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto base = root / split / sample_stem(i);
      save_image(pairs[i].hazy, base.string() + "_hazy.ppm");
      save_image(pairs[i].clean, base.string() + "_clean.ppm");
      save_gray(pairs[i].t_true, base.string() + "_t.ppm");
      nlohmann::ordered_json s;
      s["split"] = split;
      s["index"] = i;
      s["light"] = pairs[i].light.rgb;
      samples.push_back(std::move(s));
    }
  };
  emit(ds.train, "train");
  emit(ds.val, "val");

  std::ofstream out(root / "manifest.json");
  if (!out) throw IoError("cannot write manifest in '" + root.string() + "'");
  out << manifest.dump(2) << "\n";
}

inline Dataset read_dataset(const fs::path& root) {
  const fs::path manifest_path = root / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open '" + manifest_path.string() + "'");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("E_MANIFEST", manifest_path.string() + ": " + e.what());
  }
  Dataset ds;
  try {
    if (m.at("format").get<std::string>() != "dehaze-dataset") {
      throw FormatError("E_MANIFEST", manifest_path.string() + ": unexpected format tag");
    }
    ds.seed = m.at("seed").get<std::uint64_t>();
    ds.extent = m.at("extent").get<std::size_t>();
    ds.options.beta = {m.at("beta").at(0).get<double>(), m.at("beta").at(1).get<double>()};
    ds.options.dcp = dcp_params_from_json(m.at("dcp"));
    for (const auto& s : m.at("samples")) {
      const auto split = s.at("split").get<std::string>();
      const auto index = s.at("index").get<std::size_t>();
      const auto base = (root / split / sample_stem(index)).string();
      HazePair p;
      p.hazy = load_image(base + "_hazy.ppm");
      p.clean = load_image(base + "_clean.ppm");
      p.t_true = load_gray(base + "_t.ppm");
      require_same_extent(p.hazy, p.clean, "dataset sample");
      require_same_extent(p.hazy, p.t_true, "dataset sample");
      for (std::size_t c = 0; c < 3; ++c) p.light.rgb[c] = s.at("light").at(c).get<double>();
      p.t_dcp = dcp_dehaze(p.hazy, ds.options.dcp).transmission;
      if (split == "train") {
        ds.train.push_back(std::move(p));
      } else if (split == "val") {
        ds.val.push_back(std::move(p));
      } else {
        throw FormatError("E_MANIFEST", "unknown split '" + split + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("E_MANIFEST", manifest_path.string() + ": " + e.what());
  }
  return ds;
}

}  // namespace dehaze
