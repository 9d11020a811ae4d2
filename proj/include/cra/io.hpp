// SPDX-License-Identifier: Apache-2.0
//
// crasim: desk-scale simulation of compressive-reflector-antenna mm-wave imaging.
//
// Artifact persistence. Numeric arrays are stored as little-endian
// interleaved (real, imag) 64-bit float pairs in row-major order; every
// binary artifact has a JSON sidecar at <path>.json recording its shape,
// provenance, and the canonical config hash. Meshes use a plain-text format
// (`v x y z` in mm, `f i j k` with 1-based indices). Logs and images export
// as CSV and 8-bit binary PGM.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cra/common.hpp"
#include "cra/forward.hpp"
#include "cra/geometry.hpp"
#include "cra/grid.hpp"
#include "cra/postproc.hpp"
#include "cra/solver.hpp"

namespace cra::io {

using nlohmann::json;

inline void ensure_parent_dir(const std::filesystem::path& path) {
  auto parent = path.parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

inline std::string sidecar_path(const std::string& path) { return path + ".json"; }

inline std::string hash_to_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

inline std::uint64_t hex_to_hash(const std::string& hex) {
  return static_cast<std::uint64_t>(std::stoull(hex, nullptr, 16));
}

namespace detail {

// Shortest round-trip decimal form; CSV cells and mesh coordinates reload
// bit-exactly.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_f64_le(std::ofstream& out, const double* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  } else {
    std::vector<unsigned char> buf(count * sizeof(double));
    for (std::size_t i = 0; i < count; ++i) {
      auto bits = std::bit_cast<std::uint64_t>(data[i]);
      for (int b = 0; b < 8; ++b) buf[i * 8 + static_cast<std::size_t>(b)] = static_cast<unsigned char>(bits >> (8 * b));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
}

inline void read_f64_le(std::ifstream& in, double* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  } else {
    std::vector<unsigned char> buf(count * sizeof(double));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[i * 8 + static_cast<std::size_t>(b)]) << (8 * b);
      data[i] = std::bit_cast<double>(bits);
    }
  }
}

inline std::ofstream open_for_write(const std::string& path, bool binary) {
  ensure_parent_dir(path);
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return out;
}

inline std::ifstream open_for_read(const std::string& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw std::runtime_error("cannot open " + path + " for reading");
  return in;
}

inline void finish_write(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

inline json roi_to_json(const RoIGrid& roi) {
  return json{{"center", {roi.center.x, roi.center.y, roi.center.z}},
              {"extent", {roi.extent.x, roi.extent.y, roi.extent.z}},
              {"voxel", {roi.voxel.x, roi.voxel.y, roi.voxel.z}},
              {"counts", {roi.nx, roi.ny, roi.nz}}};
}

inline RoIGrid roi_from_json(const json& j) {
  auto vec = [](const json& a) { return Vec3{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()}; };
  RoIGrid roi = build_roi(RoiSpec{vec(j.at("center")), vec(j.at("extent")), vec(j.at("voxel"))});
  const auto& c = j.at("counts");
  if (roi.nx != c.at(0).get<std::size_t>() || roi.ny != c.at(1).get<std::size_t>() ||
      roi.nz != c.at(2).get<std::size_t>())
    throw std::runtime_error("RoI voxel counts in sidecar do not match its extents");
  return roi;
}

inline json row_index_to_json(const std::vector<RowTriple>& rows) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back({r.freq_ghz, r.tx, r.rx});
  return arr;
}

inline std::vector<RowTriple> row_index_from_json(const json& arr) {
  std::vector<RowTriple> rows;
  rows.reserve(arr.size());
  for (const auto& e : arr) rows.push_back({e.at(0).get<double>(), e.at(1).get<int>(), e.at(2).get<int>()});
  return rows;
}

}  // namespace detail

inline void write_json_file(const std::string& path, const json& j) {
  auto out = detail::open_for_write(path, false);
  out << j.dump(2) << '\n';
  detail::finish_write(out, path);
}

inline json read_json_file(const std::string& path) {
  auto in = detail::open_for_read(path, false);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed sidecar " + path + ": " + e.what());
  }
  return j;
}

/// Writes interleaved complex float64, little-endian.
inline void write_complex_binary(const std::string& path, const Complex* data, std::size_t count) {
  auto out = detail::open_for_write(path, true);
  // std::complex<double> is layout-compatible with double[2] (re, im).
  detail::write_f64_le(out, reinterpret_cast<const double*>(data), count * 2);
  detail::finish_write(out, path);
}

inline std::vector<Complex> read_complex_binary(const std::string& path, std::size_t expected_count) {
  auto in = detail::open_for_read(path, true);
  std::vector<Complex> data(expected_count);
  detail::read_f64_le(in, reinterpret_cast<double*>(data.data()), expected_count * 2);
  if (!in) throw std::runtime_error(path + " is shorter than its sidecar promises");
  char extra;
  if (in.read(&extra, 1)) throw std::runtime_error(path + " is longer than its sidecar promises");
  return data;
}

// ---- sensing matrix ----

inline void save_sensing_matrix(const std::string& path, const SensingMatrix& h, const RoIGrid& roi,
                                std::uint64_t config_hash) {
  if (static_cast<std::size_t>(h.cols()) != roi.voxel_count())
    throw std::invalid_argument("sensing matrix columns do not match the RoI voxel count");
  write_complex_binary(path, h.entries.data(), static_cast<std::size_t>(h.entries.size()));
  json meta{{"format", 1},
            {"kind", "sensing_matrix"},
            {"config_hash", hash_to_hex(config_hash)},
            {"rows", h.rows()},
            {"cols", h.cols()},
            {"row_index", detail::row_index_to_json(h.row_index)},
            {"roi", detail::roi_to_json(roi)}};
  write_json_file(sidecar_path(path), meta);
}

inline SensingMatrix load_sensing_matrix(const std::string& path, RoIGrid* roi_out = nullptr,
                                         std::uint64_t* hash_out = nullptr) {
  json meta = read_json_file(sidecar_path(path));
  if (meta.at("kind").get<std::string>() != "sensing_matrix")
    throw std::runtime_error(path + " is not a sensing-matrix artifact");
  const auto rows = meta.at("rows").get<Eigen::Index>();
  const auto cols = meta.at("cols").get<Eigen::Index>();
  if (rows <= 0 || cols <= 0) throw std::runtime_error(path + " sidecar declares an empty matrix");
  auto data = read_complex_binary(path, static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));

  SensingMatrix h;
  h.entries.resize(rows, cols);
  std::memcpy(h.entries.data(), data.data(), data.size() * sizeof(Complex));
  h.row_index = detail::row_index_from_json(meta.at("row_index"));
  if (static_cast<Eigen::Index>(h.row_index.size()) != rows)
    throw std::runtime_error(path + " sidecar row index length does not match the matrix");
  if (roi_out) *roi_out = detail::roi_from_json(meta.at("roi"));
  if (hash_out) *hash_out = hex_to_hash(meta.at("config_hash").get<std::string>());
  return h;
}

// ---- measurement vector ----

inline void save_measurements(const std::string& path, const MeasurementVector& g, std::uint64_t config_hash,
                              std::uint64_t noise_seed) {
  write_complex_binary(path, g.values.data(), static_cast<std::size_t>(g.values.size()));
  json meta{{"format", 1},
            {"kind", "measurements"},
            {"config_hash", hash_to_hex(config_hash)},
            {"length", g.values.size()},
            {"noise_seed", noise_seed},
            {"row_index", detail::row_index_to_json(g.row_index)}};
  // JSON has no infinity literal; the noiseless case is stored symbolically.
  if (std::isfinite(g.snr_db))
    meta["snr_db"] = g.snr_db;
  else
    meta["snr_db"] = "inf";
  write_json_file(sidecar_path(path), meta);
}

inline MeasurementVector load_measurements(const std::string& path, std::uint64_t* hash_out = nullptr) {
  json meta = read_json_file(sidecar_path(path));
  if (meta.at("kind").get<std::string>() != "measurements")
    throw std::runtime_error(path + " is not a measurement artifact");
  const auto length = meta.at("length").get<Eigen::Index>();
  auto data = read_complex_binary(path, static_cast<std::size_t>(length));
  MeasurementVector g;
  g.values.resize(length);
  std::memcpy(g.values.data(), data.data(), data.size() * sizeof(Complex));
  g.row_index = detail::row_index_from_json(meta.at("row_index"));
  const json& snr = meta.at("snr_db");
  g.snr_db = snr.is_string() ? std::numeric_limits<double>::infinity() : snr.get<double>();
  if (hash_out) *hash_out = hex_to_hash(meta.at("config_hash").get<std::string>());
  return g;
}

// ---- reflectivity volume ----

inline void save_volume(const std::string& path, const ReflectivityVolume& vol, std::uint64_t config_hash,
                        const std::string& kind = "reflectivity", const json* extra = nullptr) {
  write_complex_binary(path, vol.values.data(), static_cast<std::size_t>(vol.values.size()));
  json meta{{"format", 1},
            {"kind", kind},
            {"config_hash", hash_to_hex(config_hash)},
            {"length", vol.values.size()},
            {"roi", detail::roi_to_json(vol.roi)}};
  if (extra)
    for (auto it = extra->begin(); it != extra->end(); ++it) meta[it.key()] = it.value();
  write_json_file(sidecar_path(path), meta);
}

inline ReflectivityVolume load_volume(const std::string& path, std::uint64_t* hash_out = nullptr,
                                      std::string* kind_out = nullptr) {
  json meta = read_json_file(sidecar_path(path));
  RoIGrid roi = detail::roi_from_json(meta.at("roi"));
  const auto length = meta.at("length").get<Eigen::Index>();
  if (static_cast<std::size_t>(length) != roi.voxel_count())
    throw std::runtime_error(path + " sidecar length does not match its RoI");
  auto data = read_complex_binary(path, static_cast<std::size_t>(length));
  ReflectivityVolume vol = make_volume(roi);
  std::memcpy(vol.values.data(), data.data(), data.size() * sizeof(Complex));
  if (hash_out) *hash_out = hex_to_hash(meta.at("config_hash").get<std::string>());
  if (kind_out) *kind_out = meta.at("kind").get<std::string>();
  return vol;
}

// ---- aperture field / current grids ----

template <typename Grid>
inline void save_field_grid(const std::string& path, const Grid& grid, std::uint64_t config_hash,
                            const std::string& kind) {
  static_assert(sizeof(CVec3) == 3 * sizeof(Complex));
  write_complex_binary(path, reinterpret_cast<const Complex*>(grid.samples.data()), grid.samples.size() * 3);
  json meta{{"format", 1},
            {"kind", kind},
            {"config_hash", hash_to_hex(config_hash)},
            {"freq_ghz", grid.freq_ghz},
            {"aperture",
             {{"origin", {grid.aperture.origin.x, grid.aperture.origin.y, grid.aperture.origin.z}},
              {"nx", grid.aperture.nx},
              {"nz", grid.aperture.nz},
              {"spacing", grid.aperture.spacing}}}};
  write_json_file(sidecar_path(path), meta);
}

// ---- mesh ----

inline void save_mesh(const std::string& path, const TriMesh& mesh, const ReflectorParams& params,
                      std::uint64_t config_hash) {
  auto out = detail::open_for_write(path, false);
  out << "# triangulated reflector surface; coordinates in mm\n";
  for (const auto& v : mesh.vertices)
    out << "v " << detail::format_double(v.x) << ' ' << detail::format_double(v.y) << ' '
        << detail::format_double(v.z) << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  detail::finish_write(out, path);

  json meta{{"format", 1},
            {"kind", "mesh"},
            {"config_hash", hash_to_hex(config_hash)},
            {"vertices", mesh.vertices.size()},
            {"faces", mesh.faces.size()},
            {"params",
             {{"aperture_size", params.aperture_size},
              {"focal_length", params.focal_length},
              {"offset", params.offset},
              {"mean_facet_edge", params.mean_facet_edge},
              {"max_distortion", params.max_distortion},
              {"seed", params.seed}}},
            {"rng", "mt19937_64, 53-bit uniform mapping, one draw per vertex in index order"}};
  write_json_file(sidecar_path(path), meta);
}

/// Loads `v`/`f` lines and recomputes vertex normals from the faces. The
/// per-vertex distortion record is not part of the text format and comes
/// back empty.
inline TriMesh load_mesh(const std::string& path, std::uint64_t* hash_out = nullptr) {
  auto in = detail::open_for_read(path, false);
  TriMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vec3 v{};
      if (!(ss >> v.x >> v.y >> v.z))
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed vertex line");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      long long a = 0, b = 0, c = 0;
      if (!(ss >> a >> b >> c) || a < 1 || b < 1 || c < 1)
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed face line");
      mesh.faces.push_back({static_cast<std::uint32_t>(a - 1), static_cast<std::uint32_t>(b - 1),
                            static_cast<std::uint32_t>(c - 1)});
    } else {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown record '" + tag + "'");
    }
  }
  if (mesh.vertices.empty() || mesh.faces.empty()) throw std::runtime_error(path + " holds no mesh");
  for (const auto& f : mesh.faces)
    for (auto idx : f)
      if (idx >= mesh.vertices.size())
        throw std::runtime_error(path + " references vertex " + std::to_string(idx + 1) + " past the vertex list");
  cra::detail::recompute_vertex_normals(mesh);
  if (hash_out) {
    json meta = read_json_file(sidecar_path(path));
    *hash_out = hex_to_hash(meta.at("config_hash").get<std::string>());
  }
  return mesh;
}

// ---- CSV / PGM exports ----

inline void save_convergence_csv(const std::string& path, const ConvergenceLog& log) {
  auto out = detail::open_for_write(path, false);
  out << "iteration,objective,primal_residual,dual_residual,rho\n";
  for (const auto& rec : log)
    out << rec.iteration << ',' << detail::format_double(rec.objective) << ','
        << detail::format_double(rec.primal_residual) << ',' << detail::format_double(rec.dual_residual) << ','
        << detail::format_double(rec.rho) << '\n';
  detail::finish_write(out, path);
}

inline void save_diversity_csv(const std::string& path, const DiversityReport& report) {
  auto out = detail::open_for_write(path, false);
  out << "index,singular_value\n";
  for (Eigen::Index i = 0; i < report.singular_values.size(); ++i)
    out << i << ',' << detail::format_double(report.singular_values(i)) << '\n';
  detail::finish_write(out, path);
}

inline void save_plane_csv(const std::string& path, const PlaneImage& img) {
  auto out = detail::open_for_write(path, false);
  for (std::size_t iz = 0; iz < img.nz; ++iz) {
    for (std::size_t ix = 0; ix < img.nx; ++ix) {
      if (ix) out << ',';
      out << detail::format_double(img.at(ix, iz));
    }
    out << '\n';
  }
  detail::finish_write(out, path);
}

/// 8-bit binary PGM; values scaled by `scale_max` (the image maximum when 0).
/// Rows run in increasing z.
inline void save_plane_pgm(const std::string& path, const PlaneImage& img, double scale_max = 0.0) {
  double peak = scale_max;
  if (peak <= 0.0) peak = img.values.size() > 0 ? img.values.maxCoeff() : 0.0;
  if (peak <= 0.0) peak = 1.0;
  auto out = detail::open_for_write(path, true);
  out << "P5\n" << img.nx << ' ' << img.nz << "\n255\n";
  std::vector<unsigned char> row(img.nx);
  for (std::size_t iz = 0; iz < img.nz; ++iz) {
    for (std::size_t ix = 0; ix < img.nx; ++ix) {
      double v = std::min(std::max(img.at(ix, iz) / peak, 0.0), 1.0);
      row[ix] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  detail::finish_write(out, path);
}

inline PlaneImage magnitude_plane(const ReflectivityVolume& vol, std::size_t iy) {
  const RoIGrid& roi = vol.roi;
  if (iy >= roi.ny) throw std::out_of_range("range plane index out of range");
  PlaneImage img{roi.nx, roi.nz, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(roi.nx * roi.nz))};
  for (std::size_t iz = 0; iz < roi.nz; ++iz)
    for (std::size_t ix = 0; ix < roi.nx; ++ix)
      img.values(static_cast<Eigen::Index>(ix + roi.nx * iz)) =
          std::abs(vol.values(static_cast<Eigen::Index>(vol.roi.index(ix, iy, iz))));
  return img;
}

/// Per-range-plane magnitude slices as CSV and PGM, on a shared gray scale.
inline std::vector<std::string> save_volume_slices(const std::string& dir, const std::string& stem,
                                                   const ReflectivityVolume& vol) {
  std::filesystem::create_directories(dir);
  const double peak = peak_magnitude(vol);
  std::vector<std::string> written;
  for (std::size_t iy = 0; iy < vol.roi.ny; ++iy) {
    PlaneImage img = magnitude_plane(vol, iy);
    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "_y%03zu", iy);
    std::string base = (std::filesystem::path(dir) / (stem + suffix)).string();
    save_plane_csv(base + ".csv", img);
    save_plane_pgm(base + ".pgm", img, peak);
    written.push_back(base + ".csv");
    written.push_back(base + ".pgm");
  }
  return written;
}

}  // namespace cra::io
