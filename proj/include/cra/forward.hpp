// SPDX-License-Identifier: Apache-2.0
//
// crasim: desk-scale simulation of compressive-reflector-antenna mm-wave imaging.
//
// Forward model: single-bounce physical-optics illumination of the reflector,
// radiation onto the calibration aperture, equivalent magnetic currents, exact
// near-field propagation into the RoI, and Born sensing-matrix assembly.
//
// The calibration chain mirrors the measured procedure it replaces: per port
// and frequency an aperture field E is synthesized, converted to equivalent
// currents M = -2 n0 x E, propagated into the RoI with the exact kernel
// G0 = (1 + jkR)/R^3, and each (tx, rx) pair contributes one sensing row
// H[v] = E_tx(v) . E_rx(v) (unconjugated component dot product).

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "cra/common.hpp"
#include "cra/geometry.hpp"
#include "cra/grid.hpp"
#include "cra/parallel.hpp"

namespace cra {

using CMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Sampling lattice on the planar calibration aperture, normal n0 = (0,1,0).
// Node index = iz * nx + ix (x fastest).
struct ApertureGrid {
  Vec3 origin;           // node (0, 0); the plane is y = origin.y
  std::size_t nx = 0, nz = 0;
  double spacing = 0.0;  // mm

  std::size_t node_count() const { return nx * nz; }

  Vec3 node(std::size_t ix, std::size_t iz) const {
    return {origin.x + static_cast<double>(ix) * spacing, origin.y, origin.z + static_cast<double>(iz) * spacing};
  }

  Vec3 node(std::size_t linear) const { return node(linear % nx, linear / nx); }

  static constexpr Vec3 normal() { return {0.0, 1.0, 0.0}; }

  /// Node lattice centered on `center`, covering x_extent-by-z_extent.
  static ApertureGrid centered(const Vec3& center, double x_extent, double z_extent, double spacing) {
    if (!(spacing > 0.0)) throw std::invalid_argument("aperture spacing must be positive");
    if (!(x_extent > 0.0) || !(z_extent > 0.0)) throw std::invalid_argument("aperture extents must be positive");
    ApertureGrid g;
    g.spacing = spacing;
    g.nx = static_cast<std::size_t>(std::floor(x_extent / spacing)) + 1;
    g.nz = static_cast<std::size_t>(std::floor(z_extent / spacing)) + 1;
    g.origin = {center.x - 0.5 * static_cast<double>(g.nx - 1) * spacing, center.y,
                center.z - 0.5 * static_cast<double>(g.nz - 1) * spacing};
    return g;
  }

  bool same_lattice(const ApertureGrid& o) const {
    return nx == o.nx && nz == o.nz && spacing == o.spacing && origin == o.origin;
  }
};

/// Complex vector field sampled on the aperture lattice.
struct FieldGrid {
  ApertureGrid aperture;
  double freq_ghz = 0.0;
  std::vector<CVec3> samples;  // node_count() entries
};

/// Equivalent magnetic current density on the aperture; y components vanish.
struct CurrentGrid {
  ApertureGrid aperture;
  double freq_ghz = 0.0;
  std::vector<CVec3> samples;
};

/// Complex vector field sampled at the RoI voxel centers.
struct RoIField {
  RoIGrid roi;
  double freq_ghz = 0.0;
  std::vector<CVec3> samples;  // voxel_count() entries, grid linear order
};

struct FeedPort {
  enum class Role { Tx, Rx };
  Vec3 position;                      // mm, near the focal point F = (0,0,0)
  Vec3 polarization{1.0, 0.0, 0.0};   // unit vector
  Vec3 boresight{0.0, -1.0, 0.0};     // unit vector, pattern axis
  double pattern_exponent = 2.0;      // q in cos^q(theta)
  Role role = Role::Tx;
};

/// Reflected excitation of one facet under spherical-wave illumination.
struct FacetExcitation {
  CVec3 amplitude;     // reflected complex field vector, includes e^{-jkr}/r
  Vec3 reflected_dir;  // unit vector
  Vec3 centroid;
  double area = 0.0;
};

/// Dense sensing matrix; row r maps voxel reflectivity to measurement
/// (frequency, tx, rx) = row_index[r]. Row order is lexicographic in
/// (frequency list position, tx, rx).
struct SensingMatrix {
  CMatrix entries;
  std::vector<RowTriple> row_index;

  Eigen::Index rows() const { return entries.rows(); }
  Eigen::Index cols() const { return entries.cols(); }
};

namespace detail {

// Scalar near-field kernel G0(R) e^{-jkR} with G0 = (1 + jkR)/R^3, expanded
// into real arithmetic. Symmetric in source/observer exchange.
inline Complex scalar_kernel(double k, double r) {
  double kr = k * r;
  double inv_r3 = 1.0 / (r * r * r);
  double c = std::cos(kr);
  double s = std::sin(kr);
  // (1 + j kr)(c - j s) / r^3
  return {(c + kr * s) * inv_r3, (kr * c - s) * inv_r3};
}

inline std::string role_name(FeedPort::Role role) { return role == FeedPort::Role::Tx ? "tx" : "rx"; }

}  // namespace detail

/// Spherical-wave illumination of the mesh from a feed port: per facet the
/// incident field pol * cos^q(theta)/r * e^{-jkr} reflects off the facet with
/// the PEC rule; the reflected direction is the average of the per-vertex
/// specular reflections about the stored vertex normals, so an unperturbed
/// paraboloid collimates exactly. Linear in the port polarization amplitude.
inline std::vector<FacetExcitation> feed_illumination(const FeedPort& port, const TriMesh& mesh, double freq_ghz) {
  if (mesh.vertex_normals.size() != mesh.vertices.size())
    throw std::invalid_argument("mesh has no per-vertex normals; build it via build_tra_surface/build_cra_surface");
  const double k = wave_number(freq_ghz);
  const auto facets = facet_properties(mesh);
  const Vec3 bore = normalized(port.boresight);

  std::vector<FacetExcitation> excitations;
  excitations.reserve(facets.size());
  for (std::size_t f = 0; f < facets.size(); ++f) {
    const FacetGeometry& fac = facets[f];
    Vec3 rvec = fac.centroid - port.position;
    double r = norm(rvec);
    if (r < 1e-9)
      throw std::runtime_error("facet " + std::to_string(f) + " is coincident with the feed port position");
    Vec3 d = rvec / r;

    double ct = std::max(0.0, dot(d, bore));
    double amp = std::pow(ct, port.pattern_exponent) / r;
    Complex phase{std::cos(k * r), -std::sin(k * r)};
    Complex scale = amp * phase;
    CVec3 incident{scale * port.polarization.x, scale * port.polarization.y, scale * port.polarization.z};

    // PEC reflection of the field about the flat facet: E_r = 2(E.n)n - E.
    const Vec3& n = fac.unit_normal;
    Complex en = incident.x * n.x + incident.y * n.y + incident.z * n.z;
    CVec3 reflected{2.0 * en * n.x - incident.x, 2.0 * en * n.y - incident.y, 2.0 * en * n.z - incident.z};

    // Ray direction: average of specular reflections at the three vertices.
    Vec3 dir_sum{};
    const auto& [ia, ib, ic] = mesh.faces[f];
    for (std::uint32_t vi : {ia, ib, ic}) {
      Vec3 dv = mesh.vertices[vi] - port.position;
      double rv = norm(dv);
      if (rv < 1e-9)
        throw std::runtime_error("facet " + std::to_string(f) + " is coincident with the feed port position");
      dv = dv / rv;
      const Vec3& vn = mesh.vertex_normals[vi];
      dir_sum += dv - 2.0 * dot(dv, vn) * vn;
    }
    excitations.push_back({reflected, normalized(dir_sum), fac.centroid, fac.area});
  }
  return excitations;
}

/// Radiates the facet excitations onto the aperture plane: each facet acts as
/// a point source with the scalar kernel family of the exact near-field
/// equations and a Kirchhoff inclination factor (1 + cos chi)/2 about its
/// reflected direction. Linear in the excitation amplitudes.
inline FieldGrid radiate_to_plane(const std::vector<FacetExcitation>& excitations, const TriMesh& mesh,
                                  const ApertureGrid& plane, double freq_ghz) {
  const double plane_y = plane.origin.y;
  bool above = false, below = false;
  for (const Vec3& v : mesh.vertices) {
    (v.y > plane_y ? above : below) = true;
    if (above && below)
      throw std::runtime_error("aperture plane at y = " + std::to_string(plane_y) + " intersects the reflector mesh");
  }

  const double k = wave_number(freq_ghz);
  FieldGrid field{plane, freq_ghz, std::vector<CVec3>(plane.node_count())};

  for (const FacetExcitation& ex : excitations) {
    const double weight = ex.area / (4.0 * kPi);
    for (std::size_t nidx = 0; nidx < field.samples.size(); ++nidx) {
      Vec3 p = plane.node(nidx);
      Vec3 rv = p - ex.centroid;
      double r = norm(rv);
      if (r < 1e-9)
        throw std::runtime_error("aperture node " + std::to_string(nidx) + " coincides with a facet centroid");
      double incl = 0.5 * (1.0 + dot(ex.reflected_dir, rv) / r);
      Complex s = detail::scalar_kernel(k, r) * (-weight * incl);
      field.samples[nidx] += s * cross(ex.amplitude, rv);
    }
  }
  return field;
}

/// Equivalence theorem on the aperture: M = -2 n0 x E. Output y components
/// are identically zero.
inline CurrentGrid equivalent_currents(const FieldGrid& field) {
  CurrentGrid currents{field.aperture, field.freq_ghz, std::vector<CVec3>(field.samples.size())};
  for (std::size_t i = 0; i < field.samples.size(); ++i) {
    const CVec3& e = field.samples[i];
    if (!is_finite(e)) throw std::invalid_argument("aperture field sample " + std::to_string(i) + " is not finite");
    // -2 (0,1,0) x E = (-2 Ez, 0, 2 Ex)
    currents.samples[i] = {-2.0 * e.z, Complex{0.0, 0.0}, 2.0 * e.x};
  }
  return currents;
}

/// Discretized exact near-field radiation integral,
///   E(r) = -(1/4pi) sum_nodes G0 (M x R) e^{-jkR} ds,
/// with one-point quadrature ds = spacing^2 per node. Throws if any
/// (node, voxel) pair is closer than min_distance.
inline RoIField propagate_to_roi(const CurrentGrid& currents, const RoIGrid& roi, double freq_ghz,
                                 double min_distance = 1.0) {
  const double k = wave_number(freq_ghz);
  const double ds = currents.aperture.spacing * currents.aperture.spacing;
  const double scale = -ds / (4.0 * kPi);
  const std::size_t voxels = roi.voxel_count();

  RoIField out{roi, freq_ghz, std::vector<CVec3>(voxels)};
  std::vector<Vec3> centers(voxels);
  for (std::size_t v = 0; v < voxels; ++v) centers[v] = roi.voxel_center(v);

  for (std::size_t nidx = 0; nidx < currents.samples.size(); ++nidx) {
    const CVec3& m = currents.samples[nidx];
    const Vec3 src = currents.aperture.node(nidx);
    for (std::size_t v = 0; v < voxels; ++v) {
      Vec3 rv = centers[v] - src;
      double r2 = dot(rv, rv);
      if (r2 < min_distance * min_distance)
        throw std::runtime_error("aperture node " + std::to_string(nidx) + " and voxel " + std::to_string(v) +
                                 " are closer than the minimum propagation distance");
      double r = std::sqrt(r2);
      Complex s = detail::scalar_kernel(k, r) * scale;
      out.samples[v] += s * cross(m, rv);
    }
  }
  return out;
}

/// Born sensing row: per voxel the unconjugated dot product of the two RoI
/// fields. Bilinear in the inputs.
inline Eigen::RowVectorXcd sensing_row(const RoIField& e_tx, const RoIField& e_rx) {
  if (!e_tx.roi.same_lattice(e_rx.roi) || e_tx.freq_ghz != e_rx.freq_ghz)
    throw std::invalid_argument("sensing_row requires matching RoI grids and frequencies");
  Eigen::RowVectorXcd row(static_cast<Eigen::Index>(e_tx.samples.size()));
  for (std::size_t v = 0; v < e_tx.samples.size(); ++v)
    row(static_cast<Eigen::Index>(v)) = dot_unconjugated(e_tx.samples[v], e_rx.samples[v]);
  return row;
}

/// Full-system sensing matrix: one row per (frequency, tx, rx) in that
/// lexicographic order, each produced by the calibration chain
/// feed_illumination -> radiate_to_plane -> equivalent_currents ->
/// propagate_to_roi -> sensing_row. Rows are computed independently per
/// frequency, so the result is byte-identical for any thread count.
inline SensingMatrix assemble_sensing_matrix(const std::vector<FeedPort>& ports, const std::vector<double>& freqs,
                                             const TriMesh& mesh, const ApertureGrid& plane, const RoIGrid& roi,
                                             int threads = 1, double min_distance = 1.0) {
  std::vector<std::size_t> tx_ids, rx_ids;
  for (std::size_t i = 0; i < ports.size(); ++i)
    (ports[i].role == FeedPort::Role::Tx ? tx_ids : rx_ids).push_back(i);
  if (tx_ids.empty() || rx_ids.empty()) throw std::invalid_argument("need at least one Tx and one Rx port");
  if (freqs.empty()) throw std::invalid_argument("need at least one frequency");

  const std::size_t pairs = tx_ids.size() * rx_ids.size();
  const std::size_t rows = freqs.size() * pairs;
  const std::size_t cols = roi.voxel_count();

  SensingMatrix H;
  H.entries.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  H.row_index.resize(rows);

  parallel_for(freqs.size(), threads, [&](std::size_t fi) {
    const double freq = freqs[fi];
    try {
      // RoI field for every port at this frequency (Tx and Rx are treated
      // symmetrically; the Rx path re-codes via the CRA by reciprocity).
      std::vector<RoIField> port_fields(ports.size());
      for (std::size_t p = 0; p < ports.size(); ++p) {
        auto excitation = feed_illumination(ports[p], mesh, freq);
        auto aperture_field = radiate_to_plane(excitation, mesh, plane, freq);
        auto currents = equivalent_currents(aperture_field);
        port_fields[p] = propagate_to_roi(currents, roi, freq, min_distance);
      }
      std::size_t row = fi * pairs;
      for (std::size_t t = 0; t < tx_ids.size(); ++t) {
        for (std::size_t r = 0; r < rx_ids.size(); ++r, ++row) {
          H.entries.row(static_cast<Eigen::Index>(row)) = sensing_row(port_fields[tx_ids[t]], port_fields[rx_ids[r]]);
          H.row_index[row] = {freq, static_cast<int>(t), static_cast<int>(r)};
        }
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("while assembling sensing rows for frequency " + std::to_string(freq) +
                               " GHz: " + e.what());
    }
  });
  return H;
}

}  // namespace cra
