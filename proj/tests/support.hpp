#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "seastate/image.hpp"

namespace seastate::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("seastate_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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
  std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

 private:
  std::filesystem::path path_;
};

inline Image noise_image(int height, int width, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(height, width);
  for (auto& p : img.planes)
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(gen);
  return img;
}

inline Image8 noise_image8(int height, int width, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> u(0, 255);
  Image8 img(height, width);
  for (auto& p : img.planes)
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = static_cast<std::uint8_t>(u(gen));
  return img;
}

inline float max_abs_diff(const Image& a, const Image& b) {
  float m = 0.0f;
  for (int c = 0; c < 3; ++c) m = std::max(m, (a.planes[c] - b.planes[c]).abs().maxCoeff());
  return m;
}

inline bool in_unit_range(const Image& img) {
  for (const auto& p : img.planes)
    if (p.minCoeff() < 0.0f || p.maxCoeff() > 1.0f) return false;
  return true;
}

}  // namespace seastate::testing
