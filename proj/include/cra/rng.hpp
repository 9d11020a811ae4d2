// SPDX-License-Identifier: Apache-2.0
//
// crasim: desk-scale simulation of compressive-reflector-antenna mm-wave imaging.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "cra/common.hpp"

namespace cra {

// Seeded, portable random stream. The engine is std::mt19937_64, whose bit
// output is fixed by the standard; the mappings to floating point are spelled
// out here instead of using std::uniform_real_distribution /
// std::normal_distribution, whose output is implementation-defined. This is
// what makes artifacts bit-identical across platforms and standard libraries.
class PortableRng {
 public:
  explicit PortableRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1]; safe as a log() argument.
  double unit_positive() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  /// Standard circular complex Gaussian, E|z|^2 = 1, via Box-Muller.
  Complex complex_normal() {
    double u1 = unit_positive();
    double u2 = unit();
    double r = std::sqrt(-std::log(u1));  // sqrt(-2 ln u1) / sqrt(2)
    double phi = 2.0 * kPi * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cra
