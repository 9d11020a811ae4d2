// SPDX-License-Identifier: Apache-2.0
//
// crasim: desk-scale simulation of compressive-reflector-antenna mm-wave imaging.
//
// Offset parabolic reflector geometry. A traditional reflector antenna (TRA)
// surface y = ((x - L_off)^2 + z^2) / (4 f0) - f0 is tessellated into
// triangular facets over a square (x - L_off, z) footprint; a compressive
// reflector antenna (CRA) is the same mesh with seeded pseudo-random height
// distortions applied along the y axis.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "cra/common.hpp"
#include "cra/rng.hpp"

namespace cra {

struct ReflectorParams {
  double aperture_size = 500.0;    // D0, mm
  double focal_length = 500.0;     // f0, mm
  double offset = 350.0;           // L_off, mm
  double mean_facet_edge = 16.4;   // d0, mm (target mean edge length)
  double max_distortion = 0.8;     // mm, uniform distortion bound
  std::uint64_t seed = 1;

  void validate() const {
    if (!(aperture_size > 0.0)) throw std::invalid_argument("reflector aperture_size must be positive");
    if (!(focal_length > 0.0)) throw std::invalid_argument("reflector focal_length must be positive");
    if (!(mean_facet_edge > 0.0)) throw std::invalid_argument("reflector mean_facet_edge must be positive");
    if (max_distortion < 0.0) throw std::invalid_argument("reflector max_distortion must be non-negative");
  }

  /// Surface height of the unperturbed reflector at (x, z).
  double surface_height(double x, double z) const {
    double xo = x - offset;
    return (xo * xo + z * z) / (4.0 * focal_length) - focal_length;
  }

  /// Center of the reflector surface, (L_off, -f0, 0).
  Vec3 surface_center() const { return {offset, -focal_length, 0.0}; }
};

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;
  std::vector<double> distortions;     // applied y displacement per vertex, mm
  std::vector<Vec3> vertex_normals;    // unit normals of the modeled surface

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
};

struct FacetGeometry {
  Vec3 centroid;
  Vec3 unit_normal;  // oriented toward the focal (+y) half-space
  double area = 0.0; // mm^2
};

namespace detail {

// Target grid spacing as a fraction of d0. A square cell of side h split into
// two triangles has mean edge length h*(2 + sqrt(2))/3 ~ 1.14 h (diagonals
// included), rising another ~1% once projected on the curved surface, while
// the face count tracks 2*(D0/h)^2. h = 0.96 d0 keeps the mean edge and the
// 2*(D0/d0)^2 face-count estimate simultaneously within their contracts.
inline constexpr double kCellSideFactor = 0.96;

inline std::size_t grid_cells_per_side(double aperture, double mean_edge) {
  auto cells = static_cast<long long>(std::llround(aperture / (kCellSideFactor * mean_edge)));
  return static_cast<std::size_t>(std::max(1LL, cells));
}

}  // namespace detail

/// Builds the tessellated unperturbed (TRA) surface. Vertices lie exactly on
/// the paraboloid; vertex normals are the exact analytic surface normals.
inline TriMesh build_tra_surface(const ReflectorParams& params) {
  params.validate();
  const double extent = params.aperture_size;
  const std::size_t cells = detail::grid_cells_per_side(extent, params.mean_facet_edge);
  const std::size_t side = cells + 1;
  const double h = extent / static_cast<double>(cells);
  const double half = extent / 2.0;

  TriMesh mesh;
  mesh.vertices.reserve(side * side);
  mesh.vertex_normals.reserve(side * side);
  mesh.distortions.assign(side * side, 0.0);

  // Vertex index = ix * side + iz; this is also the RNG draw order used by
  // perturb_surface.
  for (std::size_t ix = 0; ix < side; ++ix) {
    double xo = -half + static_cast<double>(ix) * h;
    for (std::size_t iz = 0; iz < side; ++iz) {
      double z = -half + static_cast<double>(iz) * h;
      double x = xo + params.offset;
      mesh.vertices.push_back({x, params.surface_height(x, z), z});
      // gradient of y - ((x-L)^2+z^2)/(4 f0) + f0
      mesh.vertex_normals.push_back(normalized({-xo / (2.0 * params.focal_length), 1.0,
                                                -z / (2.0 * params.focal_length)}));
    }
  }

  mesh.faces.reserve(2 * cells * cells);
  auto vid = [side](std::size_t ix, std::size_t iz) { return static_cast<std::uint32_t>(ix * side + iz); };
  for (std::size_t ix = 0; ix < cells; ++ix) {
    for (std::size_t iz = 0; iz < cells; ++iz) {
      mesh.faces.push_back({vid(ix, iz), vid(ix + 1, iz), vid(ix + 1, iz + 1)});
      mesh.faces.push_back({vid(ix, iz), vid(ix + 1, iz + 1), vid(ix, iz + 1)});
    }
  }
  return mesh;
}

/// Per-facet centroid, +y-oriented unit normal, and area. Throws on a
/// degenerate (area below 1e-9 mm^2) face, naming the face index.
inline std::vector<FacetGeometry> facet_properties(const TriMesh& mesh) {
  std::vector<FacetGeometry> facets;
  facets.reserve(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& [ia, ib, ic] = mesh.faces[f];
    if (ia >= mesh.vertices.size() || ib >= mesh.vertices.size() || ic >= mesh.vertices.size())
      throw std::out_of_range("face " + std::to_string(f) + " references a vertex outside the mesh");
    const Vec3& a = mesh.vertices[ia];
    const Vec3& b = mesh.vertices[ib];
    const Vec3& c = mesh.vertices[ic];
    Vec3 n = cross(b - a, c - a);
    double twice_area = norm(n);
    if (twice_area < 2e-9)
      throw std::runtime_error("degenerate face " + std::to_string(f) + " (area below 1e-9 mm^2)");
    Vec3 unit = n / twice_area;
    if (unit.y < 0.0) unit = unit * -1.0;  // orient toward the focal half-space
    facets.push_back({(a + b + c) / 3.0, unit, 0.5 * twice_area});
  }
  return facets;
}

namespace detail {

// Area-weighted vertex normals recomputed from the faceted geometry. Used
// after perturbation, where the piecewise-linear surface is the real one.
inline void recompute_vertex_normals(TriMesh& mesh) {
  std::vector<Vec3> acc(mesh.vertices.size());
  for (const auto& [ia, ib, ic] : mesh.faces) {
    const Vec3& a = mesh.vertices[ia];
    Vec3 n = cross(mesh.vertices[ib] - a, mesh.vertices[ic] - a);
    if (n.y < 0.0) n = n * -1.0;
    acc[ia] += n;
    acc[ib] += n;
    acc[ic] += n;
  }
  mesh.vertex_normals.resize(mesh.vertices.size());
  for (std::size_t i = 0; i < acc.size(); ++i) mesh.vertex_normals[i] = normalized(acc[i]);
}

}  // namespace detail

/// Applies i.i.d. U(-max_distortion, +max_distortion) height displacements
/// along y, one draw per vertex in vertex-index order from a PortableRng
/// seeded with `seed`. x and z are untouched. max_distortion == 0 returns the
/// input unchanged.
inline TriMesh perturb_surface(const TriMesh& mesh, double max_distortion, std::uint64_t seed) {
  if (max_distortion < 0.0) throw std::invalid_argument("max_distortion must be non-negative");
  if (max_distortion == 0.0) return mesh;

  TriMesh out = mesh;
  out.distortions.resize(out.vertices.size(), 0.0);
  PortableRng rng(seed);
  for (std::size_t i = 0; i < out.vertices.size(); ++i) {
    double dh = rng.uniform(-max_distortion, max_distortion);
    out.vertices[i].y += dh;
    out.distortions[i] += dh;
  }
  detail::recompute_vertex_normals(out);
  return out;
}

/// TRA tessellation plus the seeded perturbation from `params`.
inline TriMesh build_cra_surface(const ReflectorParams& params) {
  return perturb_surface(build_tra_surface(params), params.max_distortion, params.seed);
}

/// Mean length over the unique edges of the mesh.
inline double mean_edge_length(const TriMesh& mesh) {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(mesh.faces.size() * 3);
  double total = 0.0;
  std::size_t count = 0;
  auto visit = [&](std::uint32_t i, std::uint32_t j) {
    std::uint64_t key = (static_cast<std::uint64_t>(std::min(i, j)) << 32) | std::max(i, j);
    if (seen.insert(key).second) {
      total += norm(mesh.vertices[i] - mesh.vertices[j]);
      ++count;
    }
  };
  for (const auto& [a, b, c] : mesh.faces) {
    visit(a, b);
    visit(b, c);
    visit(c, a);
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace cra
