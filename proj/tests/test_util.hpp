#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "dehaze/rng.hpp"
#include "dehaze/tensor.hpp"

namespace testutil {

inline dehaze::Tensor<double> random_tensor(dehaze::Shape shape, std::uint64_t seed, double lo = -1.0,
                                            double hi = 1.0) {
  dehaze::Rng rng(seed);
  dehaze::Tensor<double> t(shape);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("dehaze_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
