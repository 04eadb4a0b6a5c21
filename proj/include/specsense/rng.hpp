#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace specsense {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for an independent substream identified by (master, domain, index).
/// Trials derive their generator from this, so results do not depend on the
/// order in which trials are executed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t domain,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(master) ^ domain) + index);
}

/// Seed domains. Calibration and measurement never share substreams.
namespace seed_domain {
inline constexpr std::uint64_t kCalibration = 0xCA11;
inline constexpr std::uint64_t kMeasureH1 = 0x0D11;
inline constexpr std::uint64_t kMeasureH0 = 0x0D10;
inline constexpr std::uint64_t kTemplate = 0x7E3F;
inline constexpr std::uint64_t kSignal = 0x5161;
inline constexpr std::uint64_t kNoise = 0x4015;
inline constexpr std::uint64_t kPowerIter = 0x9017;
inline constexpr std::uint64_t kNull = 0x4E11;
}  // namespace seed_domain

/// Portable Gaussian source: mt19937_64 plus Box-Muller. Unlike
/// std::normal_distribution the output sequence is identical across
/// standard library implementations.
class GaussianRng {
 public:
  explicit GaussianRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace specsense
