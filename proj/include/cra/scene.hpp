// SPDX-License-Identifier: Apache-2.0
//
// crasim: desk-scale simulation of compressive-reflector-antenna mm-wave imaging.
//
// Test targets rasterized onto the RoI lattice and synthetic measurement
// vectors g = H u + n.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "cra/common.hpp"
#include "cra/forward.hpp"
#include "cra/grid.hpp"
#include "cra/rng.hpp"

namespace cra {

struct TargetSpec {
  enum class Shape { TShape, PointSet, Box };

  Shape shape = Shape::TShape;
  Vec3 offset{};               // of the target center from the RoI center, mm
  double rotation_deg = 45.0;  // in-plane rotation about the range (y) axis
  Complex reflectivity{1.0, 0.0};

  // T-shape: horizontal bar (length along x, width along z) with a stem
  // (width along x, length along z) hanging from the bar's lower edge. The
  // bar center is the target center.
  double bar_length = 200.0, bar_width = 50.0;
  double stem_length = 150.0, stem_width = 50.0;

  // Box edge lengths.
  Vec3 box_size{60.0, 30.0, 60.0};

  // Thickness along the range axis for t_shape; 0 selects exactly one voxel
  // plane (the one whose center is nearest the target center).
  double depth = 0.0;

  std::vector<Vec3> points;  // absolute positions for point_set
};

namespace detail {

struct Rect {  // axis-aligned rectangle in the local (x, z) plane
  double cx, cz, half_x, half_z;
  bool contains(double x, double z) const { return std::abs(x - cx) <= half_x && std::abs(z - cz) <= half_z; }
};

inline void check_inside_roi(const Vec3& p, const RoIGrid& roi, const char* what) {
  Vec3 lo = roi.origin();
  Vec3 hi = lo + roi.extent;
  if (p.x < lo.x || p.x > hi.x || p.y < lo.y || p.y > hi.y || p.z < lo.z || p.z > hi.z)
    throw std::invalid_argument(std::string(what) + " lies outside the RoI");
}

}  // namespace detail

/// Marks every voxel whose center falls inside the target shape with the
/// target reflectivity; all other voxels are zero. Throws if the target does
/// not fit inside the RoI.
inline ReflectivityVolume rasterize_target(const TargetSpec& spec, const RoIGrid& roi) {
  ReflectivityVolume vol = make_volume(roi);
  const Vec3 center = roi.center + spec.offset;

  if (spec.shape == TargetSpec::Shape::PointSet) {
    const Vec3 origin = roi.origin();
    for (const Vec3& p : spec.points) {
      detail::check_inside_roi(p, roi, "point target");
      auto clamp_idx = [](double t, std::size_t n) {
        auto i = static_cast<long long>(std::floor(t));
        return static_cast<std::size_t>(std::clamp(i, 0LL, static_cast<long long>(n) - 1));
      };
      std::size_t ix = clamp_idx((p.x - origin.x) / roi.voxel.x, roi.nx);
      std::size_t iy = clamp_idx((p.y - origin.y) / roi.voxel.y, roi.ny);
      std::size_t iz = clamp_idx((p.z - origin.z) / roi.voxel.z, roi.nz);
      vol.values(static_cast<Eigen::Index>(roi.index(ix, iy, iz))) = spec.reflectivity;
    }
    return vol;
  }

  // Footprint rectangles in the local (rotated) frame.
  std::vector<detail::Rect> rects;
  double half_depth = 0.0;
  if (spec.shape == TargetSpec::Shape::TShape) {
    rects.push_back({0.0, 0.0, spec.bar_length / 2.0, spec.bar_width / 2.0});
    rects.push_back({0.0, -(spec.bar_width + spec.stem_length) / 2.0, spec.stem_width / 2.0, spec.stem_length / 2.0});
    half_depth = spec.depth / 2.0;
  } else {
    rects.push_back({0.0, 0.0, spec.box_size.x / 2.0, spec.box_size.z / 2.0});
    half_depth = spec.box_size.y / 2.0;
  }

  const double angle = spec.rotation_deg * kPi / 180.0;
  const double ca = std::cos(angle), sa = std::sin(angle);

  // Rotated-footprint corners must stay inside the RoI.
  double radius = 0.0;
  for (const auto& r : rects) {
    double rx = std::abs(r.cx) + r.half_x, rz = std::abs(r.cz) + r.half_z;
    radius = std::max(radius, std::hypot(rx, rz));
  }
  double dz = spec.shape == TargetSpec::Shape::TShape ? std::max(roi.voxel.y / 2.0, half_depth) : half_depth;
  detail::check_inside_roi(center + Vec3{radius, dz, radius}, roi, "target extent");
  detail::check_inside_roi(center - Vec3{radius, dz, radius}, roi, "target extent");

  // One-voxel-deep targets select the plane whose center is nearest the
  // target center, sidestepping boundary ties.
  long long selected_iy = -1;
  if (spec.shape == TargetSpec::Shape::TShape && spec.depth <= 0.0) {
    double t = (center.y - roi.origin().y) / roi.voxel.y - 0.5;
    selected_iy = std::clamp(static_cast<long long>(std::llround(t)), 0LL, static_cast<long long>(roi.ny) - 1);
  }

  for (std::size_t iy = 0; iy < roi.ny; ++iy) {
    if (selected_iy >= 0) {
      if (static_cast<long long>(iy) != selected_iy) continue;
    }
    for (std::size_t iz = 0; iz < roi.nz; ++iz) {
      for (std::size_t ix = 0; ix < roi.nx; ++ix) {
        Vec3 p = roi.voxel_center(ix, iy, iz) - center;
        if (selected_iy < 0 && std::abs(p.y) > half_depth) continue;
        // rotate by -angle into the local frame
        double lx = ca * p.x + sa * p.z;
        double lz = -sa * p.x + ca * p.z;
        for (const auto& r : rects) {
          if (r.contains(lx, lz)) {
            vol.values(static_cast<Eigen::Index>(roi.index(ix, iy, iz))) = spec.reflectivity;
            break;
          }
        }
      }
    }
  }
  return vol;
}

/// g = H u + n with i.i.d. circular complex Gaussian noise scaled so that
/// 10 log10(|Hu|^2 / E|n|^2) = snr_db. snr_db = +inf produces exactly H u.
/// Deterministic for a fixed seed.
inline MeasurementVector synthesize_measurements(const SensingMatrix& H, const ReflectivityVolume& u, double snr_db,
                                                 std::uint64_t seed) {
  if (H.cols() != u.values.size())
    throw std::invalid_argument("sensing matrix has " + std::to_string(H.cols()) + " columns but the volume has " +
                                std::to_string(u.values.size()) + " voxels");
  MeasurementVector g;
  g.row_index = H.row_index;
  g.snr_db = snr_db;
  g.values = H.entries * u.values;

  if (std::isinf(snr_db)) return g;

  const double signal_power = g.values.squaredNorm();
  const auto m = static_cast<double>(g.values.size());
  const double sigma = std::sqrt(signal_power / (m * std::pow(10.0, snr_db / 10.0)));
  PortableRng rng(seed);
  for (Eigen::Index i = 0; i < g.values.size(); ++i) g.values(i) += sigma * rng.complex_normal();
  return g;
}

}  // namespace cra
