// SPDX-License-Identifier: Apache-2.0
//
// crasim: desk-scale simulation of compressive-reflector-antenna mm-wave imaging.
//
// Region-of-interest voxel grid and the reflectivity/measurement containers
// shared by the forward model and the solver.

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "cra/common.hpp"

namespace cra {

struct RoiSpec {
  Vec3 center{350.0, 1000.0, 0.0};
  Vec3 extent{600.0, 420.0, 600.0};  // mm
  Vec3 voxel{6.0, 30.0, 6.0};        // mm
};

// Regular voxel lattice over the RoI. The linear voxel ordering is fixed:
// x fastest, then z, then y, i.e. index = ix + nx*(iz + nz*iy).
struct RoIGrid {
  Vec3 center;
  Vec3 extent;
  Vec3 voxel;
  std::size_t nx = 0, ny = 0, nz = 0;

  std::size_t voxel_count() const { return nx * ny * nz; }

  std::size_t index(std::size_t ix, std::size_t iy, std::size_t iz) const { return ix + nx * (iz + nz * iy); }

  Vec3 origin() const { return center - extent / 2.0; }

  Vec3 voxel_center(std::size_t ix, std::size_t iy, std::size_t iz) const {
    Vec3 o = origin();
    return {o.x + (static_cast<double>(ix) + 0.5) * voxel.x,
            o.y + (static_cast<double>(iy) + 0.5) * voxel.y,
            o.z + (static_cast<double>(iz) + 0.5) * voxel.z};
  }

  Vec3 voxel_center(std::size_t linear) const {
    std::size_t ix = linear % nx;
    std::size_t rest = linear / nx;
    std::size_t iz = rest % nz;
    std::size_t iy = rest / nz;
    return voxel_center(ix, iy, iz);
  }

  bool same_lattice(const RoIGrid& o) const {
    return nx == o.nx && ny == o.ny && nz == o.nz && center == o.center && extent == o.extent && voxel == o.voxel;
  }
};

namespace detail {

inline std::size_t checked_axis_count(double extent, double voxel, const char* axis) {
  if (!(voxel > 0.0)) throw std::invalid_argument(std::string("voxel size along ") + axis + " must be positive");
  if (!(extent > 0.0)) throw std::invalid_argument(std::string("RoI extent along ") + axis + " must be positive");
  double ratio = extent / voxel;
  double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio) || rounded < 1.0) {
    double suggestion = std::max(1.0, rounded) * voxel;
    throw std::invalid_argument(std::string("RoI extent ") + std::to_string(extent) + " mm along " + axis +
                                " is not divisible by the voxel size " + std::to_string(voxel) +
                                " mm; nearest divisible extent is " + std::to_string(suggestion) + " mm");
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace detail

/// Validates divisibility of extents by voxel sizes and lays out the lattice.
inline RoIGrid build_roi(const RoiSpec& spec) {
  RoIGrid grid;
  grid.center = spec.center;
  grid.extent = spec.extent;
  grid.voxel = spec.voxel;
  grid.nx = detail::checked_axis_count(spec.extent.x, spec.voxel.x, "x");
  grid.ny = detail::checked_axis_count(spec.extent.y, spec.voxel.y, "y");
  grid.nz = detail::checked_axis_count(spec.extent.z, spec.voxel.z, "z");
  return grid;
}

/// Complex reflectivity, one value per voxel in the grid's linear order.
struct ReflectivityVolume {
  RoIGrid roi;
  Eigen::VectorXcd values;
};

inline ReflectivityVolume make_volume(const RoIGrid& roi) {
  return {roi, Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(roi.voxel_count()))};
}

/// One measurement per (tx, rx, frequency) triple of the sensing matrix.
struct RowTriple {
  double freq_ghz = 0.0;
  int tx = 0;
  int rx = 0;
};

struct MeasurementVector {
  Eigen::VectorXcd values;
  std::vector<RowTriple> row_index;
  double snr_db = std::numeric_limits<double>::infinity();
};

}  // namespace cra
