// SPDX-License-Identifier: Apache-2.0
//
// crasim: desk-scale simulation of compressive-reflector-antenna mm-wave imaging.
//
// Experiment configuration: an INI-style file with sections mirroring the
// pipeline stages, defaulted to the reference reflector design. Loading
// collects every problem (unknown keys, parse failures, invariant
// violations) into a single error. Each pipeline stage has a canonical
// FNV-1a hash over exactly the fields it depends on; artifacts carry their
// stage hash so downstream stages can verify provenance while artifacts
// unaffected by a change stay reusable.

#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cra/common.hpp"
#include "cra/forward.hpp"
#include "cra/geometry.hpp"
#include "cra/grid.hpp"
#include "cra/scene.hpp"
#include "cra/solver.hpp"

namespace cra {

struct FrequencyGrid {
  double start_ghz = 71.0;
  double stop_ghz = 76.0;
  int count = 30;
  // Radar band limits; defaults cover the 71-76 GHz slice of E-band.
  double band_min_ghz = 71.0;
  double band_max_ghz = 76.0;

  /// Inclusive endpoints, evenly spaced.
  std::vector<double> values() const {
    std::vector<double> f(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      if (i == 0)
        f[static_cast<std::size_t>(i)] = start_ghz;
      else if (i == count - 1)
        f[static_cast<std::size_t>(i)] = stop_ghz;
      else
        f[static_cast<std::size_t>(i)] = start_ghz + (stop_ghz - start_ghz) * i / (count - 1);
    }
    return f;
  }

  double bandwidth_ghz() const { return stop_ghz - start_ghz; }
  double center_ghz() const { return 0.5 * (start_ghz + stop_ghz); }
};

/// Cross-shaped MIMO layout around the focal point: transmitters along x,
/// receivers along z, uniform pitch, boresights aimed at the reflector
/// surface center.
struct PortLayout {
  int tx_count = 4;
  int rx_count = 4;
  double pitch = 10.0;
  double pattern_exponent = 2.0;
};

struct ApertureSpec {
  double standoff = 900.0;  // calibration-plane distance from the reflector surface center, mm
  double x_extent = 880.0;
  double z_extent = 640.0;
  double spacing = wavelength_mm(77.0) / 2.0;  // node pitch, mm: half-wavelength at the top of E-band
};

struct PostprocOptions {
  int na = 4;
  double tau = 0.35;
  bool renormalize_border = false;
};

struct Seeds {
  std::uint64_t geometry = 1;
  std::uint64_t noise = 2;
};

enum class LambdaMode { Absolute, Relative };

struct ExperimentConfig {
  ReflectorParams reflector;
  PortLayout ports;
  FrequencyGrid frequencies;
  ApertureSpec aperture;
  RoiSpec roi;
  TargetSpec target;
  double snr_db = std::numeric_limits<double>::infinity();
  AdmmConfig admm;
  LambdaMode lambda_mode = LambdaMode::Absolute;
  PostprocOptions postproc;
  Seeds seeds;

  /// Forces the unperturbed baseline surface.
  void apply_tra() { reflector.max_distortion = 0.0; }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

struct RawConfig {
  // section -> key -> value, plus parse problems
  std::map<std::string, std::map<std::string, std::string>> entries;
  std::vector<std::string> problems;
};

inline RawConfig parse_ini(std::istream& in) {
  RawConfig raw;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        raw.problems.push_back("line " + std::to_string(lineno) + ": malformed section header '" + t + "'");
        continue;
      }
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos) {
      raw.problems.push_back("line " + std::to_string(lineno) + ": expected key = value, got '" + t + "'");
      continue;
    }
    std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
    if (key.empty()) {
      raw.problems.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    if (section.empty()) {
      raw.problems.push_back("line " + std::to_string(lineno) + ": key '" + key + "' appears before any [section]");
      continue;
    }
    auto [it, inserted] = raw.entries[section].emplace(key, value);
    (void)it;
    if (!inserted) raw.problems.push_back("line " + std::to_string(lineno) + ": duplicate key " + section + "." + key);
  }
  return raw;
}

class Applier {
 public:
  Applier(RawConfig raw, std::vector<std::string>& problems) : raw_(std::move(raw)), problems_(problems) {
    for (const auto& p : raw_.problems) problems_.push_back(p);
  }

  template <typename Setter>
  void key(const std::string& section, const std::string& name, Setter&& set) {
    auto sit = raw_.entries.find(section);
    if (sit == raw_.entries.end()) return;
    auto kit = sit->second.find(name);
    if (kit == sit->second.end()) return;
    consumed_[section].insert(kit->first);
    try {
      set(kit->second);
    } catch (const std::exception& e) {
      problems_.push_back(section + "." + name + ": " + e.what());
    }
  }

  void report_unknown() {
    for (const auto& [section, kv] : raw_.entries) {
      auto cit = consumed_.find(section);
      if (cit == consumed_.end()) {
        problems_.push_back("unknown section [" + section + "]");
        continue;
      }
      for (const auto& [k, v] : kv)
        if (!cit->second.count(k)) problems_.push_back("unknown key " + section + "." + k);
    }
  }

 private:
  RawConfig raw_;
  std::vector<std::string>& problems_;
  std::map<std::string, std::set<std::string>> consumed_;
};

inline double to_double(const std::string& v) {
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  double d = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("'" + v + "' is not a number");
  return d;
}

inline long long to_int(const std::string& v) {
  std::size_t pos = 0;
  long long i = std::stoll(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("'" + v + "' is not an integer");
  return i;
}

inline std::uint64_t to_uint64(const std::string& v) {
  std::size_t pos = 0;
  unsigned long long i = std::stoull(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("'" + v + "' is not an unsigned integer");
  return i;
}

inline bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("'" + v + "' is not a boolean (use true/false)");
}

inline Vec3 to_vec3(const std::string& v) {
  std::istringstream ss(v);
  Vec3 out{};
  if (!(ss >> out.x >> out.y >> out.z)) throw std::invalid_argument("'" + v + "' is not three numbers");
  std::string rest;
  if (ss >> rest) throw std::invalid_argument("'" + v + "' has trailing content");
  return out;
}

inline Complex to_complex(const std::string& v) {
  std::istringstream ss(v);
  double re = 0.0, im = 0.0;
  if (!(ss >> re >> im)) throw std::invalid_argument("'" + v + "' is not 're im'");
  std::string rest;
  if (ss >> rest) throw std::invalid_argument("'" + v + "' has trailing content");
  return {re, im};
}

inline std::vector<Vec3> to_point_list(const std::string& v) {
  std::vector<Vec3> pts;
  std::istringstream groups(v);
  std::string group;
  while (std::getline(groups, group, ';')) {
    std::string g = trim(group);
    if (g.empty()) continue;
    pts.push_back(to_vec3(g));
  }
  if (pts.empty()) throw std::invalid_argument("'" + v + "' holds no points (use 'x y z; x y z; ...')");
  return pts;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace config_detail

/// Canonical serializations per pipeline stage; each extends the previous,
/// so a stage hash covers exactly the upstream fields its artifact depends
/// on.
namespace config_hash {

using config_detail::fmt;

inline std::string geometry_text(const ExperimentConfig& c) {
  std::string s;
  s += "reflector.aperture_size=" + fmt(c.reflector.aperture_size) + ";";
  s += "reflector.focal_length=" + fmt(c.reflector.focal_length) + ";";
  s += "reflector.offset=" + fmt(c.reflector.offset) + ";";
  s += "reflector.mean_facet_edge=" + fmt(c.reflector.mean_facet_edge) + ";";
  s += "reflector.max_distortion=" + fmt(c.reflector.max_distortion) + ";";
  s += "seeds.geometry=" + std::to_string(c.seeds.geometry) + ";";
  return s;
}

inline std::string calibration_text(const ExperimentConfig& c) {
  std::string s = geometry_text(c);
  s += "ports.tx_count=" + std::to_string(c.ports.tx_count) + ";";
  s += "ports.rx_count=" + std::to_string(c.ports.rx_count) + ";";
  s += "ports.pitch=" + fmt(c.ports.pitch) + ";";
  s += "ports.pattern_exponent=" + fmt(c.ports.pattern_exponent) + ";";
  s += "frequencies.start=" + fmt(c.frequencies.start_ghz) + ";";
  s += "frequencies.stop=" + fmt(c.frequencies.stop_ghz) + ";";
  s += "frequencies.count=" + std::to_string(c.frequencies.count) + ";";
  s += "aperture.standoff=" + fmt(c.aperture.standoff) + ";";
  s += "aperture.x_extent=" + fmt(c.aperture.x_extent) + ";";
  s += "aperture.z_extent=" + fmt(c.aperture.z_extent) + ";";
  s += "aperture.spacing=" + fmt(c.aperture.spacing) + ";";
  s += "roi.center=" + fmt(c.roi.center.x) + "," + fmt(c.roi.center.y) + "," + fmt(c.roi.center.z) + ";";
  s += "roi.extent=" + fmt(c.roi.extent.x) + "," + fmt(c.roi.extent.y) + "," + fmt(c.roi.extent.z) + ";";
  s += "roi.voxel=" + fmt(c.roi.voxel.x) + "," + fmt(c.roi.voxel.y) + "," + fmt(c.roi.voxel.z) + ";";
  return s;
}

inline std::string measurement_text(const ExperimentConfig& c) {
  std::string s = calibration_text(c);
  s += "target.shape=" + std::to_string(static_cast<int>(c.target.shape)) + ";";
  s += "target.offset=" + fmt(c.target.offset.x) + "," + fmt(c.target.offset.y) + "," + fmt(c.target.offset.z) + ";";
  s += "target.rotation=" + fmt(c.target.rotation_deg) + ";";
  s += "target.reflectivity=" + fmt(c.target.reflectivity.real()) + "," + fmt(c.target.reflectivity.imag()) + ";";
  s += "target.bar=" + fmt(c.target.bar_length) + "," + fmt(c.target.bar_width) + ";";
  s += "target.stem=" + fmt(c.target.stem_length) + "," + fmt(c.target.stem_width) + ";";
  s += "target.box=" + fmt(c.target.box_size.x) + "," + fmt(c.target.box_size.y) + "," + fmt(c.target.box_size.z) + ";";
  s += "target.depth=" + fmt(c.target.depth) + ";";
  s += "target.points=";
  for (const auto& p : c.target.points) s += fmt(p.x) + "," + fmt(p.y) + "," + fmt(p.z) + "|";
  s += ";";
  s += "noise.snr_db=" + fmt(c.snr_db) + ";";
  s += "seeds.noise=" + std::to_string(c.seeds.noise) + ";";
  return s;
}

inline std::string solve_text(const ExperimentConfig& c) {
  std::string s = measurement_text(c);
  s += "admm.blocks=" + std::to_string(c.admm.block_count) + ";";
  s += "admm.lambda=" + fmt(c.admm.lambda_r) + ";";
  s += "admm.lambda_mode=" + std::string(c.lambda_mode == LambdaMode::Relative ? "relative" : "absolute") + ";";
  s += "admm.rho=" + fmt(c.admm.rho) + ";";
  s += "admm.max_iters=" + std::to_string(c.admm.max_iters) + ";";
  s += "admm.tol_primal=" + fmt(c.admm.tol_primal) + ";";
  s += "admm.tol_dual=" + fmt(c.admm.tol_dual) + ";";
  s += "admm.adaptive_rho=" + std::string(c.admm.adaptive_rho ? "1" : "0") + ";";
  return s;
}

inline std::string full_text(const ExperimentConfig& c) {
  std::string s = solve_text(c);
  s += "postproc.na=" + std::to_string(c.postproc.na) + ";";
  s += "postproc.tau=" + fmt(c.postproc.tau) + ";";
  s += "postproc.renormalize_border=" + std::string(c.postproc.renormalize_border ? "1" : "0") + ";";
  return s;
}

inline std::uint64_t geometry(const ExperimentConfig& c) { return config_detail::fnv1a(geometry_text(c)); }
inline std::uint64_t calibration(const ExperimentConfig& c) { return config_detail::fnv1a(calibration_text(c)); }
inline std::uint64_t measurement(const ExperimentConfig& c) { return config_detail::fnv1a(measurement_text(c)); }
inline std::uint64_t solve(const ExperimentConfig& c) { return config_detail::fnv1a(solve_text(c)); }
inline std::uint64_t full(const ExperimentConfig& c) { return config_detail::fnv1a(full_text(c)); }

}  // namespace config_hash

/// Collects every invariant violation; empty result means valid.
inline std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> p;
  auto positive = [&](double v, const std::string& name) {
    if (!(v > 0.0)) p.push_back(name + " must be positive (got " + config_detail::fmt(v) + ")");
  };

  positive(c.reflector.aperture_size, "reflector.aperture_size");
  positive(c.reflector.focal_length, "reflector.focal_length");
  positive(c.reflector.mean_facet_edge, "reflector.mean_facet_edge");
  if (c.reflector.offset < 0.0) p.push_back("reflector.offset must be non-negative");
  if (c.reflector.max_distortion < 0.0)
    p.push_back("reflector.max_distortion must be non-negative (got " + config_detail::fmt(c.reflector.max_distortion) + ")");
  if (c.reflector.mean_facet_edge > c.reflector.aperture_size)
    p.push_back("reflector.mean_facet_edge exceeds the aperture size");

  if (c.ports.tx_count < 1) p.push_back("ports.tx_count must be at least 1");
  if (c.ports.rx_count < 1) p.push_back("ports.rx_count must be at least 1");
  positive(c.ports.pitch, "ports.pitch");
  if (c.ports.pattern_exponent < 0.0) p.push_back("ports.pattern_exponent must be non-negative");

  const auto& fr = c.frequencies;
  if (fr.count < 1) p.push_back("frequencies.count must be at least 1");
  if (!(fr.band_min_ghz > 0.0)) p.push_back("frequencies.band_min must be positive");
  if (fr.band_min_ghz >= fr.band_max_ghz) p.push_back("frequencies.band_min must lie below frequencies.band_max");
  if (fr.start_ghz > fr.stop_ghz) p.push_back("frequencies.start must not exceed frequencies.stop");
  if (fr.count == 1 && fr.start_ghz != fr.stop_ghz)
    p.push_back("frequencies.count = 1 requires start == stop");
  if (fr.count > 1 && fr.start_ghz == fr.stop_ghz)
    p.push_back("frequencies.count > 1 requires start < stop");
  if (fr.start_ghz < fr.band_min_ghz || fr.stop_ghz > fr.band_max_ghz)
    p.push_back("frequency sweep [" + config_detail::fmt(fr.start_ghz) + ", " + config_detail::fmt(fr.stop_ghz) +
                "] GHz leaves the radar band [" + config_detail::fmt(fr.band_min_ghz) + ", " +
                config_detail::fmt(fr.band_max_ghz) + "] GHz");

  positive(c.aperture.standoff, "aperture.standoff");
  positive(c.aperture.x_extent, "aperture.x_extent");
  positive(c.aperture.z_extent, "aperture.z_extent");
  positive(c.aperture.spacing, "aperture.spacing");

  for (auto [v, name] : {std::pair{c.roi.extent.x, "roi.extent.x"}, {c.roi.extent.y, "roi.extent.y"},
                         {c.roi.extent.z, "roi.extent.z"}, {c.roi.voxel.x, "roi.voxel.x"},
                         {c.roi.voxel.y, "roi.voxel.y"}, {c.roi.voxel.z, "roi.voxel.z"}})
    positive(v, name);
  try {
    build_roi(c.roi);
  } catch (const std::exception& e) {
    p.push_back(e.what());
  }

  if (c.target.shape == TargetSpec::Shape::TShape) {
    positive(c.target.bar_length, "target.bar_length");
    positive(c.target.bar_width, "target.bar_width");
    positive(c.target.stem_length, "target.stem_length");
    positive(c.target.stem_width, "target.stem_width");
  }
  if (c.target.shape == TargetSpec::Shape::Box)
    for (auto [v, name] :
         {std::pair{c.target.box_size.x, "target.box_size.x"}, {c.target.box_size.y, "target.box_size.y"},
          {c.target.box_size.z, "target.box_size.z"}})
      positive(v, name);
  if (c.target.depth < 0.0) p.push_back("target.depth must be non-negative");
  if (!std::isfinite(c.target.rotation_deg)) p.push_back("target.rotation must be finite");

  if (std::isnan(c.snr_db) || c.snr_db == -std::numeric_limits<double>::infinity())
    p.push_back("noise.snr_db must be a real value or inf");

  const Eigen::Index rows =
      static_cast<Eigen::Index>(fr.count) * c.ports.tx_count * c.ports.rx_count;
  if (c.admm.block_count < 1) p.push_back("admm.blocks must be at least 1");
  if (fr.count >= 1 && c.ports.tx_count >= 1 && c.ports.rx_count >= 1 &&
      c.admm.block_count > rows)
    p.push_back("admm.blocks = " + std::to_string(c.admm.block_count) + " exceeds the measurement count " +
                std::to_string(rows));
  if (c.admm.lambda_r < 0.0) p.push_back("admm.lambda must be non-negative");
  if (!(c.admm.rho > 0.0)) p.push_back("admm.rho must be positive");
  if (c.admm.max_iters < 1) p.push_back("admm.max_iters must be at least 1");
  if (!(c.admm.tol_primal > 0.0)) p.push_back("admm.tol_primal must be positive");
  if (!(c.admm.tol_dual > 0.0)) p.push_back("admm.tol_dual must be positive");

  if (c.postproc.na < 0 || c.postproc.na % 2 != 0)
    p.push_back("postproc.na must be even and non-negative (got " + std::to_string(c.postproc.na) + ")");
  if (!std::isfinite(c.postproc.tau)) p.push_back("postproc.tau must be finite");

  return p;
}

/// Parses an INI-style stream over the defaults. Throws a single error
/// listing every unknown key, parse failure, and invariant violation.
inline ExperimentConfig load_config_stream(std::istream& in) {
  using namespace config_detail;
  ExperimentConfig c;
  std::vector<std::string> problems;
  Applier a(parse_ini(in), problems);

  a.key("reflector", "aperture_size", [&](const std::string& v) { c.reflector.aperture_size = to_double(v); });
  a.key("reflector", "focal_length", [&](const std::string& v) { c.reflector.focal_length = to_double(v); });
  a.key("reflector", "offset", [&](const std::string& v) { c.reflector.offset = to_double(v); });
  a.key("reflector", "mean_facet_edge", [&](const std::string& v) { c.reflector.mean_facet_edge = to_double(v); });
  a.key("reflector", "max_distortion", [&](const std::string& v) { c.reflector.max_distortion = to_double(v); });

  a.key("ports", "tx_count", [&](const std::string& v) { c.ports.tx_count = static_cast<int>(to_int(v)); });
  a.key("ports", "rx_count", [&](const std::string& v) { c.ports.rx_count = static_cast<int>(to_int(v)); });
  a.key("ports", "pitch", [&](const std::string& v) { c.ports.pitch = to_double(v); });
  a.key("ports", "pattern_exponent", [&](const std::string& v) { c.ports.pattern_exponent = to_double(v); });

  a.key("frequencies", "start", [&](const std::string& v) { c.frequencies.start_ghz = to_double(v); });
  a.key("frequencies", "stop", [&](const std::string& v) { c.frequencies.stop_ghz = to_double(v); });
  a.key("frequencies", "count", [&](const std::string& v) { c.frequencies.count = static_cast<int>(to_int(v)); });
  a.key("frequencies", "band_min", [&](const std::string& v) { c.frequencies.band_min_ghz = to_double(v); });
  a.key("frequencies", "band_max", [&](const std::string& v) { c.frequencies.band_max_ghz = to_double(v); });

  a.key("aperture", "standoff", [&](const std::string& v) { c.aperture.standoff = to_double(v); });
  a.key("aperture", "x_extent", [&](const std::string& v) { c.aperture.x_extent = to_double(v); });
  a.key("aperture", "z_extent", [&](const std::string& v) { c.aperture.z_extent = to_double(v); });
  a.key("aperture", "spacing", [&](const std::string& v) { c.aperture.spacing = to_double(v); });

  a.key("roi", "center", [&](const std::string& v) { c.roi.center = to_vec3(v); });
  a.key("roi", "extent", [&](const std::string& v) { c.roi.extent = to_vec3(v); });
  a.key("roi", "voxel", [&](const std::string& v) { c.roi.voxel = to_vec3(v); });

  a.key("target", "shape", [&](const std::string& v) {
    if (v == "t_shape")
      c.target.shape = TargetSpec::Shape::TShape;
    else if (v == "point_set")
      c.target.shape = TargetSpec::Shape::PointSet;
    else if (v == "box")
      c.target.shape = TargetSpec::Shape::Box;
    else
      throw std::invalid_argument("'" + v + "' is not a shape (t_shape, point_set, box)");
  });
  a.key("target", "offset", [&](const std::string& v) { c.target.offset = to_vec3(v); });
  a.key("target", "rotation", [&](const std::string& v) { c.target.rotation_deg = to_double(v); });
  a.key("target", "reflectivity", [&](const std::string& v) { c.target.reflectivity = to_complex(v); });
  a.key("target", "bar_length", [&](const std::string& v) { c.target.bar_length = to_double(v); });
  a.key("target", "bar_width", [&](const std::string& v) { c.target.bar_width = to_double(v); });
  a.key("target", "stem_length", [&](const std::string& v) { c.target.stem_length = to_double(v); });
  a.key("target", "stem_width", [&](const std::string& v) { c.target.stem_width = to_double(v); });
  a.key("target", "box_size", [&](const std::string& v) { c.target.box_size = to_vec3(v); });
  a.key("target", "depth", [&](const std::string& v) { c.target.depth = to_double(v); });
  a.key("target", "points", [&](const std::string& v) { c.target.points = to_point_list(v); });

  a.key("noise", "snr_db", [&](const std::string& v) { c.snr_db = to_double(v); });

  a.key("admm", "blocks", [&](const std::string& v) { c.admm.block_count = static_cast<int>(to_int(v)); });
  a.key("admm", "lambda", [&](const std::string& v) { c.admm.lambda_r = to_double(v); });
  a.key("admm", "lambda_mode", [&](const std::string& v) {
    if (v == "absolute")
      c.lambda_mode = LambdaMode::Absolute;
    else if (v == "relative")
      c.lambda_mode = LambdaMode::Relative;
    else
      throw std::invalid_argument("'" + v + "' is not a lambda mode (absolute, relative)");
  });
  a.key("admm", "rho", [&](const std::string& v) { c.admm.rho = to_double(v); });
  a.key("admm", "max_iters", [&](const std::string& v) { c.admm.max_iters = static_cast<int>(to_int(v)); });
  a.key("admm", "tol_primal", [&](const std::string& v) { c.admm.tol_primal = to_double(v); });
  a.key("admm", "tol_dual", [&](const std::string& v) { c.admm.tol_dual = to_double(v); });
  a.key("admm", "adaptive_rho", [&](const std::string& v) { c.admm.adaptive_rho = to_bool(v); });

  a.key("postproc", "na", [&](const std::string& v) { c.postproc.na = static_cast<int>(to_int(v)); });
  a.key("postproc", "tau", [&](const std::string& v) { c.postproc.tau = to_double(v); });
  a.key("postproc", "renormalize_border",
        [&](const std::string& v) { c.postproc.renormalize_border = to_bool(v); });

  a.key("seeds", "geometry", [&](const std::string& v) { c.seeds.geometry = to_uint64(v); });
  a.key("seeds", "noise", [&](const std::string& v) { c.seeds.noise = to_uint64(v); });

  a.report_unknown();
  c.reflector.seed = c.seeds.geometry;

  for (const auto& v : validate_config(c)) problems.push_back(v);
  if (!problems.empty()) {
    std::string msg = "configuration has " + std::to_string(problems.size()) + " problem(s):";
    for (const auto& pr : problems) msg += "\n  - " + pr;
    throw std::invalid_argument(msg);
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return load_config_stream(in);
}

/// Transmitters along x, receivers along z, centered on the focal point;
/// boresights aimed at the reflector surface center.
inline std::vector<FeedPort> build_ports(const PortLayout& layout, const ReflectorParams& reflector) {
  const Vec3 center = reflector.surface_center();
  std::vector<FeedPort> ports;
  ports.reserve(static_cast<std::size_t>(layout.tx_count + layout.rx_count));
  auto add = [&](Vec3 pos, FeedPort::Role role) {
    FeedPort p;
    p.position = pos;
    p.boresight = normalized(center - pos);
    p.pattern_exponent = layout.pattern_exponent;
    p.role = role;
    ports.push_back(p);
  };
  for (int i = 0; i < layout.tx_count; ++i) {
    double off = (i - 0.5 * (layout.tx_count - 1)) * layout.pitch;
    add(Vec3{off, 0.0, 0.0}, FeedPort::Role::Tx);
  }
  for (int j = 0; j < layout.rx_count; ++j) {
    double off = (j - 0.5 * (layout.rx_count - 1)) * layout.pitch;
    add(Vec3{0.0, 0.0, off}, FeedPort::Role::Rx);
  }
  return ports;
}

/// Calibration plane centered on the reflector axis at the configured
/// standoff from the surface center, normal +y.
inline ApertureGrid build_aperture(const ApertureSpec& spec, const ReflectorParams& reflector) {
  const Vec3 center = reflector.surface_center();
  return ApertureGrid::centered(Vec3{center.x, center.y + spec.standoff, center.z}, spec.x_extent, spec.z_extent,
                                spec.spacing);
}

/// Line-of-sight distance from the reflector surface center to the RoI
/// center; the range used in resolution estimates.
inline double range_to_roi(const ExperimentConfig& c) {
  return norm(build_roi(c.roi).center - c.reflector.surface_center());
}

}  // namespace cra
