// SPDX-License-Identifier: Apache-2.0
//
// crasim: desk-scale simulation of compressive-reflector-antenna mm-wave imaging.
//
// Post-processing of reconstructed reflectivity volumes: cross-range
// averaging, magnitude normalization, support extraction, range projections,
// diffraction/bandwidth resolution limits, and sensing-matrix diversity
// metrics.

#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cra/common.hpp"
#include "cra/forward.hpp"
#include "cra/grid.hpp"

namespace cra {

struct SupportMask {
  RoIGrid roi;
  std::vector<std::uint8_t> mask;

  std::size_t count() const {
    std::size_t c = 0;
    for (auto m : mask) c += m != 0;
    return c;
  }
};

/// Real-valued image over the cross-range plane; index = ix + nx * iz.
struct PlaneImage {
  std::size_t nx = 0;
  std::size_t nz = 0;
  Eigen::VectorXd values;

  double at(std::size_t ix, std::size_t iz) const { return values(static_cast<Eigen::Index>(ix + nx * iz)); }
};

/// Box average of the complex reflectivity over an (na+1) x (na+1)
/// cross-range window at constant range. Neighbors outside the lattice
/// contribute zero while the denominator stays (na+1)^2 everywhere, so the
/// transform is linear and a unit impulse spreads to a patch of exactly
/// 1/(na+1)^2. Pass renormalize_border=true to divide by the in-window
/// sample count instead.
inline ReflectivityVolume cross_range_average(const ReflectivityVolume& vol, int na,
                                              bool renormalize_border = false) {
  if (na < 0) throw std::invalid_argument("averaging window parameter must be non-negative");
  if (na % 2 != 0) throw std::invalid_argument("averaging window parameter must be even; got " + std::to_string(na));
  const RoIGrid& roi = vol.roi;
  const int half = na / 2;
  const double full = static_cast<double>(na + 1) * static_cast<double>(na + 1);

  ReflectivityVolume out{roi, Eigen::VectorXcd::Zero(vol.values.size())};
  for (std::size_t iy = 0; iy < roi.ny; ++iy) {
    for (std::size_t iz = 0; iz < roi.nz; ++iz) {
      for (std::size_t ix = 0; ix < roi.nx; ++ix) {
        Complex sum{0.0, 0.0};
        int inside = 0;
        for (int dz = -half; dz <= half; ++dz) {
          const long long jz = static_cast<long long>(iz) + dz;
          if (jz < 0 || jz >= static_cast<long long>(roi.nz)) continue;
          for (int dx = -half; dx <= half; ++dx) {
            const long long jx = static_cast<long long>(ix) + dx;
            if (jx < 0 || jx >= static_cast<long long>(roi.nx)) continue;
            sum += vol.values(static_cast<Eigen::Index>(
                roi.index(static_cast<std::size_t>(jx), iy, static_cast<std::size_t>(jz))));
            ++inside;
          }
        }
        const double denom = renormalize_border ? std::max(inside, 1) : full;
        out.values(static_cast<Eigen::Index>(roi.index(ix, iy, iz))) = sum / denom;
      }
    }
  }
  return out;
}

inline double peak_magnitude(const ReflectivityVolume& vol) {
  double peak = 0.0;
  for (Eigen::Index i = 0; i < vol.values.size(); ++i) peak = std::max(peak, std::abs(vol.values(i)));
  return peak;
}

/// Scales so the peak magnitude is 1; phases are untouched.
inline ReflectivityVolume normalize_magnitude(const ReflectivityVolume& vol) {
  double peak = peak_magnitude(vol);
  if (peak <= 0.0) throw std::invalid_argument("cannot normalize an all-zero reflectivity volume");
  ReflectivityVolume out = vol;
  out.values /= peak;
  return out;
}

/// Support mask of voxels whose magnitude meets or exceeds tau. A tau
/// outside [0, 1] is still applied; the oddity is reported through warning.
inline SupportMask threshold_volume(const ReflectivityVolume& vol, double tau, std::string* warning = nullptr) {
  if (warning && (tau < 0.0 || tau > 1.0))
    *warning = "threshold " + std::to_string(tau) + " lies outside [0, 1]; applying it anyway";
  SupportMask out{vol.roi, std::vector<std::uint8_t>(static_cast<std::size_t>(vol.values.size()), 0)};
  for (Eigen::Index i = 0; i < vol.values.size(); ++i)
    out.mask[static_cast<std::size_t>(i)] = std::abs(vol.values(i)) >= tau;
  return out;
}

/// Support of the voxels with magnitude strictly above eps.
inline SupportMask support_of(const ReflectivityVolume& vol, double eps = 0.0) {
  SupportMask out{vol.roi, std::vector<std::uint8_t>(static_cast<std::size_t>(vol.values.size()), 0)};
  for (Eigen::Index i = 0; i < vol.values.size(); ++i)
    out.mask[static_cast<std::size_t>(i)] = std::abs(vol.values(i)) > eps;
  return out;
}

/// Intersection-over-union of two support masks on the same lattice. Two
/// empty masks are identical supports, reported as 1 with a warning.
inline double support_iou(const SupportMask& a, const SupportMask& b, std::string* warning = nullptr) {
  if (!a.roi.same_lattice(b.roi) || a.mask.size() != b.mask.size())
    throw std::invalid_argument("support masks live on different lattices");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.mask.size(); ++i) {
    bool pa = a.mask[i] != 0, pb = b.mask[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  if (uni == 0) {
    if (warning) *warning = "both support masks are empty; overlap reported as 1";
    return 1.0;
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Maximum magnitude along the range axis: per (x, z), max over y of |u|.
inline PlaneImage max_projection_range(const ReflectivityVolume& vol) {
  const RoIGrid& roi = vol.roi;
  PlaneImage out{roi.nx, roi.nz, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(roi.nx * roi.nz))};
  for (std::size_t iy = 0; iy < roi.ny; ++iy)
    for (std::size_t iz = 0; iz < roi.nz; ++iz)
      for (std::size_t ix = 0; ix < roi.nx; ++ix) {
        auto& cell = out.values(static_cast<Eigen::Index>(ix + roi.nx * iz));
        cell = std::max(cell, std::abs(vol.values(static_cast<Eigen::Index>(roi.index(ix, iy, iz)))));
      }
  return out;
}

struct RangeProfile {
  Eigen::VectorXd plane_max;  // max |u| per constant-range plane, index = iy
  Eigen::Index peak_plane = 0;
};

/// Peak magnitude per range plane plus the argmax plane; localizes a target
/// in range.
inline RangeProfile range_profile(const ReflectivityVolume& vol) {
  const RoIGrid& roi = vol.roi;
  RangeProfile out;
  out.plane_max = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(roi.ny));
  const std::size_t plane = roi.nx * roi.nz;
  for (std::size_t iy = 0; iy < roi.ny; ++iy) {
    double best = 0.0;
    for (std::size_t j = 0; j < plane; ++j)
      best = std::max(best, std::abs(vol.values(static_cast<Eigen::Index>(iy * plane + j))));
    out.plane_max(static_cast<Eigen::Index>(iy)) = best;
  }
  out.plane_max.maxCoeff(&out.peak_plane);
  return out;
}

/// Strict local maxima of a 1-D profile with value at least min_height.
/// Boundary samples count when they exceed their single neighbor.
inline int count_local_maxima(const Eigen::VectorXd& profile, double min_height = 0.0) {
  const Eigen::Index n = profile.size();
  if (n == 0) return 0;
  if (n == 1) return profile(0) >= min_height ? 1 : 0;
  int count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (profile(i) < min_height) continue;
    bool left = i == 0 || profile(i) > profile(i - 1);
    bool right = i == n - 1 || profile(i) > profile(i + 1);
    if (left && right) ++count;
  }
  return count;
}

struct ResolutionLimits {
  double sigma_xz = 0.0;  // cross-range, mm
  double sigma_y = 0.0;   // range, mm
};

/// Diffraction-limited cross-range resolution lambda * R / (2 * D) and
/// bandwidth-limited range resolution c / (2 * B), both in mm. Bandwidth is
/// in Hz.
inline ResolutionLimits resolution_limits(double lambda_mm, double range_mm, double aperture_mm,
                                          double bandwidth_hz) {
  if (!(lambda_mm > 0.0) || !(range_mm > 0.0) || !(aperture_mm > 0.0) || !(bandwidth_hz > 0.0))
    throw std::invalid_argument("resolution limit inputs must be positive");
  ResolutionLimits out;
  out.sigma_xz = lambda_mm * range_mm / (2.0 * aperture_mm);
  out.sigma_y = kSpeedOfLightMetersPerSecond / (2.0 * bandwidth_hz) * 1e3;
  return out;
}

struct DiversityReport {
  Eigen::VectorXd singular_values;  // descending
  double effective_rank = 0.0;      // exp of the spectral entropy of sigma^2
  Eigen::Index numerical_rank = 0;
  double condition = 0.0;           // sigma_1 / sigma_r at the numerical rank
};

/// Singular spectrum summary of a sensing matrix. The singular values come
/// from an eigendecomposition of the Gram matrix on the smaller dimension,
/// which is exact up to roundoff and far cheaper than a full SVD for the
/// wide matrices produced here.
inline DiversityReport spectral_diversity(const CMatrix& h) {
  if (h.rows() == 0 || h.cols() == 0) throw std::invalid_argument("sensing matrix is empty");
  const bool wide = h.rows() < h.cols();
  Eigen::MatrixXcd gram = wide ? (h * h.adjoint()).eval() : (h.adjoint() * h).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(gram, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw std::runtime_error("eigendecomposition of the Gram matrix failed");

  Eigen::VectorXd ev = eig.eigenvalues();  // ascending
  const Eigen::Index m = ev.size();
  DiversityReport out;
  out.singular_values = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i) out.singular_values(i) = std::sqrt(std::max(ev(m - 1 - i), 0.0));

  double total = out.singular_values.squaredNorm();
  if (total <= 0.0) throw std::invalid_argument("sensing matrix is identically zero");

  double entropy = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    double p = out.singular_values(i) * out.singular_values(i) / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  out.effective_rank = std::exp(entropy);

  const double cutoff = 1e-12 * out.singular_values(0);
  Eigen::Index rank = 0;
  while (rank < m && out.singular_values(rank) > cutoff) ++rank;
  out.numerical_rank = rank;
  out.condition = rank > 0 ? out.singular_values(0) / out.singular_values(rank - 1) : 0.0;
  return out;
}

inline DiversityReport spectral_diversity(const SensingMatrix& h) { return spectral_diversity(h.entries); }

}  // namespace cra
