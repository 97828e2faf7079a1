#pragma once

// Reproducible random streams.
//
// Every generator in the library draws from `Rng`, a std::mt19937_64 engine
// (its output sequence is fixed by the C++ standard) seeded through SplitMix64.
// Normal variates use the Box-Muller transform implemented here, because the
// standard library's distributions are not specified bit-for-bit and differ
// between implementations. Independent streams are obtained with `derive_seed`.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace blocklr {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of the child stream `tag` of `parent`.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) {
  return mix64(mix64(parent) ^ mix64(tag + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::initializer_list<std::uint64_t> path) {
  for (std::uint64_t tag : path) parent = derive_seed(parent, tag);
  return parent;
}

/// Stream tags used by the simulation pipeline.
enum class Stream : std::uint64_t { kGroundTruth = 1, kEnsemble = 2, kNoise = 3, kPacking = 4 };

constexpr std::uint64_t derive_seed(std::uint64_t parent, Stream s) {
  return derive_seed(parent, static_cast<std::uint64_t>(s));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  /// Uniform on (0, 1], 53 random bits.
  double uniform() {
    return double((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// +1 or -1 with equal probability.
  double sign() { return (engine_() >> 63) ? 1.0 : -1.0; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0;
  bool has_spare_ = false;
};

}  // namespace blocklr
