// SPDX-License-Identifier: Apache-2.0
//
// crasim: desk-scale simulation of compressive-reflector-antenna mm-wave imaging.

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cra {

using Complex = std::complex<double>;

// Internal unit system: lengths in mm, frequencies in GHz, time in ns.
// Wave numbers then come out in rad/mm, which keeps kR in a sane range
// for the desk-scale geometries this library targets.
inline constexpr double kSpeedOfLight = 299.792458;  // mm/ns == 1e-6 * c[m/s]
inline constexpr double kSpeedOfLightMetersPerSecond = 299792458.0;
inline constexpr double kPi = std::numbers::pi;

/// Free-space wavelength in mm for a frequency in GHz.
inline double wavelength_mm(double freq_ghz) {
  if (freq_ghz <= 0.0) throw std::invalid_argument("frequency must be positive, got " + std::to_string(freq_ghz) + " GHz");
  return kSpeedOfLight / freq_ghz;
}

/// Wave number k = 2*pi/lambda in rad/mm.
inline double wave_number(double freq_ghz) { return 2.0 * kPi / wavelength_mm(freq_ghz); }

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x; y += o.y; z += o.z;
    return *this;
  }
  bool operator==(const Vec3& o) const = default;
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v) {
  double n = norm(v);
  if (n == 0.0) throw std::invalid_argument("cannot normalize a zero vector");
  return v / n;
}

/// Complex-valued 3-vector (one field sample).
struct CVec3 {
  Complex x{}, y{}, z{};

  CVec3 operator+(const CVec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  CVec3 operator-(const CVec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  CVec3 operator*(const Complex& s) const { return {x * s, y * s, z * s}; }
  CVec3& operator+=(const CVec3& o) {
    x += o.x; y += o.y; z += o.z;
    return *this;
  }
};

inline CVec3 operator*(const Complex& s, const CVec3& v) { return v * s; }
inline CVec3 operator*(double s, const CVec3& v) { return {v.x * s, v.y * s, v.z * s}; }

/// Unconjugated component sum a.x*b.x + a.y*b.y + a.z*b.z.
inline Complex dot_unconjugated(const CVec3& a, const CVec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

/// Cross product of a complex vector with a real one.
inline CVec3 cross(const CVec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double squared_magnitude(const CVec3& v) { return std::norm(v.x) + std::norm(v.y) + std::norm(v.z); }

inline bool is_finite(const CVec3& v) {
  return std::isfinite(v.x.real()) && std::isfinite(v.x.imag()) && std::isfinite(v.y.real()) &&
         std::isfinite(v.y.imag()) && std::isfinite(v.z.real()) && std::isfinite(v.z.imag());
}

}  // namespace cra
