#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace seastate {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Mixes a base seed with a sequence of keys (epoch, sample index, ...) into an
/// independent sub-stream seed. Order of keys matters.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept;

std::uint64_t hash_string(std::string_view text) noexcept;

/// Seeded random stream. Copyable; copies continue identically.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  /// Inclusive on both ends.
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }
  double normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace seastate
