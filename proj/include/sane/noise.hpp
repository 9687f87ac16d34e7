#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "sane/latent.hpp"

namespace sane {

// Seeded standard-normal source. Box-Muller over mt19937_64 so the stream is
// identical on every standard library (std::normal_distribution is not).
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : engine_(seed) {}

  double uniform() {
    // 53 random bits -> (0, 1]
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
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

  template <typename T>
  BasicLatent<T> normal_latent(const Shape& shape) {
    BasicLatent<T> out(shape);
    for (auto& v : out.values()) v = static_cast<T>(normal());
    return out;
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sane
