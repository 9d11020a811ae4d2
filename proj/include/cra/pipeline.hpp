// SPDX-License-Identifier: Apache-2.0
//
// crasim: desk-scale simulation of compressive-reflector-antenna mm-wave imaging.
//
// Stage orchestration. Five stages communicate through on-disk artifacts in
// one output directory: geometry writes the reflector mesh, calibrate
// assembles the sensing matrix, simulate rasterizes the target and
// synthesizes measurements, reconstruct runs the consensus solver, analyze
// post-processes and writes the human-readable summary. Every artifact
// carries the hash of the configuration fields it depends on; a stage
// refuses upstream artifacts whose hash does not match the current config
// unless forced. All numeric artifacts are pure functions of (config,
// seeds); wall-clock timings appear only in summary.txt.

#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cra/common.hpp"
#include "cra/config.hpp"
#include "cra/forward.hpp"
#include "cra/geometry.hpp"
#include "cra/grid.hpp"
#include "cra/io.hpp"
#include "cra/postproc.hpp"
#include "cra/scene.hpp"
#include "cra/solver.hpp"

namespace cra {

namespace artifact {
inline constexpr const char* kMesh = "surface.mesh";
inline constexpr const char* kSensingMatrix = "sensing_matrix.bin";
inline constexpr const char* kTruth = "truth.bin";
inline constexpr const char* kMeasurements = "measurements.bin";
inline constexpr const char* kReconstruction = "reconstruction.bin";
inline constexpr const char* kConvergence = "convergence.csv";
inline constexpr const char* kAveraged = "averaged.bin";
inline constexpr const char* kRangeProjection = "range_projection";  // .csv / .pgm
inline constexpr const char* kDiversity = "diversity.csv";
inline constexpr const char* kSummary = "summary.txt";
}  // namespace artifact

struct StageOptions {
  std::string out_dir = "out";
  int threads = 1;
  bool force = false;               // accept artifacts with mismatched config hashes
  std::ostream* log = &std::cout;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct ReportBundle {
  std::vector<std::string> artifacts;
  std::vector<StageTiming> timings;
  double iou = -1.0;                // -1 when no ground truth was available
  bool range_plane_correct = false;
  Eigen::Index peak_plane = -1;
  double effective_rank = 0.0;
  ResolutionLimits resolution;
  double lambda_absolute = 0.0;
  double lambda_fraction = 0.0;
  bool solver_converged = false;
  bool reconstruction_empty = false;
};

namespace pipeline_detail {

inline std::string join(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

inline std::ostream& log_of(const StageOptions& opts) {
  static std::ostream null_stream{nullptr};
  return opts.log ? *opts.log : null_stream;
}

inline void require_artifact(const std::string& path, const std::string& producer) {
  if (!std::filesystem::exists(path))
    throw std::runtime_error("missing artifact " + path + "; run the '" + producer + "' subcommand first");
}

inline void check_hash(std::uint64_t found, std::uint64_t expected, const std::string& path,
                       const std::string& producer, const StageOptions& opts) {
  if (found == expected) return;
  if (opts.force) {
    log_of(opts) << "warning: " << path << " carries config hash " << io::hash_to_hex(found) << ", expected "
                 << io::hash_to_hex(expected) << "; continuing because of --force\n";
    return;
  }
  throw std::runtime_error(path + " was produced under a different configuration (hash " + io::hash_to_hex(found) +
                           ", expected " + io::hash_to_hex(expected) + "); rerun '" + producer +
                           "' or pass --force");
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline std::string fmt_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", s);
  return buf;
}

}  // namespace pipeline_detail

/// Builds the (possibly perturbed) reflector surface and writes the mesh
/// artifact.
inline std::vector<std::string> run_geometry(const ExperimentConfig& cfg, const StageOptions& opts) {
  using namespace pipeline_detail;
  TriMesh mesh = build_cra_surface(cfg.reflector);
  const std::string path = join(opts.out_dir, artifact::kMesh);
  io::save_mesh(path, mesh, cfg.reflector, config_hash::geometry(cfg));
  log_of(opts) << "geometry: " << mesh.vertices.size() << " vertices, " << mesh.faces.size()
               << " faces, mean edge " << mean_edge_length(mesh) << " mm (target " << cfg.reflector.mean_facet_edge
               << " mm), max distortion " << cfg.reflector.max_distortion << " mm\n";
  return {path, io::sidecar_path(path)};
}

/// Loads the mesh, propagates every port's field to the calibration plane
/// and on into the RoI, and assembles the Born sensing matrix.
inline std::vector<std::string> run_calibrate(const ExperimentConfig& cfg, const StageOptions& opts) {
  using namespace pipeline_detail;
  const std::string mesh_path = join(opts.out_dir, artifact::kMesh);
  require_artifact(mesh_path, "geometry");
  std::uint64_t mesh_hash = 0;
  TriMesh mesh = io::load_mesh(mesh_path, &mesh_hash);
  check_hash(mesh_hash, config_hash::geometry(cfg), mesh_path, "geometry", opts);

  const std::vector<FeedPort> ports = build_ports(cfg.ports, cfg.reflector);
  const ApertureGrid plane = build_aperture(cfg.aperture, cfg.reflector);
  const RoIGrid roi = build_roi(cfg.roi);
  const std::vector<double> freqs = cfg.frequencies.values();

  log_of(opts) << "calibrate: " << ports.size() << " ports, " << freqs.size() << " frequencies, plane "
               << plane.nx << "x" << plane.nz << " nodes, RoI " << roi.nx << "x" << roi.ny << "x" << roi.nz
               << " voxels\n";
  SensingMatrix h = assemble_sensing_matrix(ports, freqs, mesh, plane, roi, opts.threads);

  const std::string path = join(opts.out_dir, artifact::kSensingMatrix);
  io::save_sensing_matrix(path, h, roi, config_hash::calibration(cfg));
  log_of(opts) << "calibrate: sensing matrix " << h.rows() << "x" << h.cols() << " written\n";
  return {path, io::sidecar_path(path)};
}

/// Rasterizes the target into the RoI and synthesizes noisy measurements
/// through the stored sensing matrix.
inline std::vector<std::string> run_simulate(const ExperimentConfig& cfg, const StageOptions& opts) {
  using namespace pipeline_detail;
  const std::string h_path = join(opts.out_dir, artifact::kSensingMatrix);
  require_artifact(h_path, "calibrate");
  std::uint64_t h_hash = 0;
  RoIGrid roi;
  SensingMatrix h = io::load_sensing_matrix(h_path, &roi, &h_hash);
  check_hash(h_hash, config_hash::calibration(cfg), h_path, "calibrate", opts);

  ReflectivityVolume truth = rasterize_target(cfg.target, roi);
  MeasurementVector g = synthesize_measurements(h, truth, cfg.snr_db, cfg.seeds.noise);

  const std::uint64_t stage_hash = config_hash::measurement(cfg);
  const std::string truth_path = join(opts.out_dir, artifact::kTruth);
  const std::string g_path = join(opts.out_dir, artifact::kMeasurements);
  io::save_volume(truth_path, truth, stage_hash, "ground_truth");
  io::save_measurements(g_path, g, stage_hash, cfg.seeds.noise);
  log_of(opts) << "simulate: " << support_of(truth).count() << " occupied voxels, " << g.values.size()
               << " measurements at SNR " << cfg.snr_db << " dB\n";
  return {truth_path, io::sidecar_path(truth_path), g_path, io::sidecar_path(g_path)};
}

/// Runs consensus ADMM on the stored (H, g) and writes the reconstruction
/// plus the convergence log.
inline std::vector<std::string> run_reconstruct(const ExperimentConfig& cfg, const StageOptions& opts,
                                                ReportBundle* bundle = nullptr) {
  using namespace pipeline_detail;
  const std::string h_path = join(opts.out_dir, artifact::kSensingMatrix);
  const std::string g_path = join(opts.out_dir, artifact::kMeasurements);
  require_artifact(h_path, "calibrate");
  require_artifact(g_path, "simulate");
  std::uint64_t h_hash = 0, g_hash = 0;
  RoIGrid roi;
  SensingMatrix h = io::load_sensing_matrix(h_path, &roi, &h_hash);
  MeasurementVector g = io::load_measurements(g_path, &g_hash);
  check_hash(h_hash, config_hash::calibration(cfg), h_path, "calibrate", opts);
  check_hash(g_hash, config_hash::measurement(cfg), g_path, "simulate", opts);
  if (g.values.size() != h.rows())
    throw std::runtime_error("measurement vector length does not match the sensing matrix row count");

  // The norm-1 weight is portable across sensing-matrix scales only as a
  // fraction of the data-fit gradient scale, so both forms are reported.
  const double grad_scale = (h.entries.adjoint() * g.values).cwiseAbs().maxCoeff();
  AdmmConfig admm = cfg.admm;
  admm.threads = opts.threads;
  if (cfg.lambda_mode == LambdaMode::Relative) admm.lambda_r = cfg.admm.lambda_r * grad_scale;
  const double fraction = grad_scale > 0.0 ? admm.lambda_r / grad_scale : 0.0;
  log_of(opts) << "reconstruct: lambda = " << admm.lambda_r << " (fraction " << fraction
               << " of the peak data-fit gradient), " << admm.block_count << " blocks\n";

  AdmmResult result = admm_solve(h, g.values, admm);
  ReflectivityVolume recon{roi, result.v};

  const std::uint64_t stage_hash = config_hash::solve(cfg);
  const std::string recon_path = join(opts.out_dir, artifact::kReconstruction);
  const std::string conv_path = join(opts.out_dir, artifact::kConvergence);
  io::json extra{{"lambda_absolute", admm.lambda_r},
                 {"lambda_fraction", fraction},
                 {"converged", result.converged},
                 {"iterations", result.state.iteration},
                 {"final_rho", result.final_rho}};
  io::save_volume(recon_path, recon, stage_hash, "reconstruction", &extra);
  io::save_convergence_csv(conv_path, result.log);
  log_of(opts) << "reconstruct: " << (result.converged ? "converged" : "iteration cap reached") << " after "
               << result.state.iteration << " iterations\n";
  if (bundle) {
    bundle->lambda_absolute = admm.lambda_r;
    bundle->lambda_fraction = fraction;
    bundle->solver_converged = result.converged;
  }
  return {recon_path, io::sidecar_path(recon_path), conv_path};
}

/// Post-processes the reconstruction: averaging, normalization, threshold,
/// IoU against ground truth, range localization, projections, diversity
/// metrics, and the summary report. Pass compare_dir to also emit a
/// comparative singular-spectrum CSV against another run's sensing matrix.
inline std::vector<std::string> run_analyze(const ExperimentConfig& cfg, const StageOptions& opts,
                                            const std::string& compare_dir = "", ReportBundle* bundle = nullptr,
                                            const std::vector<StageTiming>& timings = {}) {
  using namespace pipeline_detail;
  Stopwatch analyze_watch;
  const std::string recon_path = join(opts.out_dir, artifact::kReconstruction);
  require_artifact(recon_path, "reconstruct");
  std::uint64_t recon_hash = 0;
  ReflectivityVolume recon = io::load_volume(recon_path, &recon_hash);
  check_hash(recon_hash, config_hash::solve(cfg), recon_path, "reconstruct", opts);

  std::vector<std::string> written;
  std::ostringstream summary;
  summary << "experiment summary\n==================\n";

  ReflectivityVolume averaged = cross_range_average(recon, cfg.postproc.na, cfg.postproc.renormalize_border);
  const std::string avg_path = join(opts.out_dir, artifact::kAveraged);
  io::save_volume(avg_path, averaged, config_hash::full(cfg), "averaged_reflectivity");
  written.push_back(avg_path);
  written.push_back(io::sidecar_path(avg_path));

  const bool empty_recon = peak_magnitude(averaged) <= 0.0;
  ReflectivityVolume normalized = averaged;
  if (!empty_recon) normalized = normalize_magnitude(averaged);
  std::string tau_warning;
  SupportMask mask = threshold_volume(normalized, cfg.postproc.tau, &tau_warning);
  if (empty_recon) {
    summary << "note: reconstruction is identically zero; support is empty\n";
    mask.mask.assign(mask.mask.size(), 0);
  }
  if (!tau_warning.empty()) summary << "warning: " << tau_warning << "\n";

  summary << "averaging window: " << cfg.postproc.na + 1 << " x " << cfg.postproc.na + 1
          << (cfg.postproc.renormalize_border ? " (border renormalized)\n" : " (zero padded)\n");
  summary << "threshold: " << cfg.postproc.tau << ", surviving voxels: " << mask.count() << "\n";

  RangeProfile profile = range_profile(normalized);
  const double plane_y = recon.roi.voxel_center(0, static_cast<std::size_t>(profile.peak_plane), 0).y;
  summary << "peak range plane: index " << profile.peak_plane << " (y = " << plane_y << " mm)\n";

  // Ground truth is optional; IoU and plane checks only run when simulate
  // stored it.
  double iou = -1.0;
  bool plane_correct = false;
  const std::string truth_path = join(opts.out_dir, artifact::kTruth);
  if (std::filesystem::exists(truth_path)) {
    std::uint64_t truth_hash = 0;
    ReflectivityVolume truth = io::load_volume(truth_path, &truth_hash);
    check_hash(truth_hash, config_hash::measurement(cfg), truth_path, "simulate", opts);
    if (!truth.roi.same_lattice(recon.roi))
      throw std::runtime_error("ground truth and reconstruction live on different lattices");
    SupportMask truth_mask = support_of(truth);
    std::string iou_warning;
    iou = support_iou(mask, truth_mask, &iou_warning);
    if (!iou_warning.empty()) summary << "warning: " << iou_warning << "\n";
    RangeProfile truth_profile = range_profile(truth);
    plane_correct = truth_profile.peak_plane == profile.peak_plane;
    summary << "support IoU vs ground truth: " << iou << "\n";
    summary << "range plane matches ground truth: " << (plane_correct ? "yes" : "no") << " (truth index "
            << truth_profile.peak_plane << ")\n";
  } else {
    summary << "ground truth not present; IoU skipped\n";
  }

  PlaneImage projection = max_projection_range(normalized);
  const std::string proj_base = join(opts.out_dir, artifact::kRangeProjection);
  io::save_plane_csv(proj_base + std::string(".csv"), projection);
  io::save_plane_pgm(proj_base + std::string(".pgm"), projection);
  written.push_back(proj_base + std::string(".csv"));
  written.push_back(proj_base + std::string(".pgm"));

  auto slice_paths = io::save_volume_slices(join(opts.out_dir, "slices"), "averaged", normalized);
  for (auto& sp : slice_paths) written.push_back(std::move(sp));

  // Diversity of the sensing matrix actually used for this reconstruction.
  const std::string h_path = join(opts.out_dir, artifact::kSensingMatrix);
  require_artifact(h_path, "calibrate");
  std::uint64_t h_hash = 0;
  SensingMatrix h = io::load_sensing_matrix(h_path, nullptr, &h_hash);
  check_hash(h_hash, config_hash::calibration(cfg), h_path, "calibrate", opts);
  DiversityReport diversity = spectral_diversity(h);
  const std::string div_path = join(opts.out_dir, artifact::kDiversity);
  io::save_diversity_csv(div_path, diversity);
  written.push_back(div_path);
  summary << "sensing matrix: " << h.rows() << " x " << h.cols() << ", effective rank " << diversity.effective_rank
          << ", numerical rank " << diversity.numerical_rank << ", condition " << diversity.condition << "\n";

  if (!compare_dir.empty()) {
    const std::string other_path = join(compare_dir, artifact::kSensingMatrix);
    require_artifact(other_path, "calibrate");
    SensingMatrix other = io::load_sensing_matrix(other_path);
    DiversityReport other_div = spectral_diversity(other);
    const std::string cmp_path = join(opts.out_dir, "diversity_compare.csv");
    auto out = io::detail::open_for_write(cmp_path, false);
    out << "index,singular_value_this,singular_value_other\n";
    const Eigen::Index count = std::min(diversity.singular_values.size(), other_div.singular_values.size());
    for (Eigen::Index i = 0; i < count; ++i)
      out << i << ',' << io::detail::format_double(diversity.singular_values(i)) << ','
          << io::detail::format_double(other_div.singular_values(i)) << '\n';
    io::detail::finish_write(out, cmp_path);
    written.push_back(cmp_path);
    summary << "comparison run " << compare_dir << ": effective rank " << other_div.effective_rank
            << " (this run " << diversity.effective_rank << ")\n";
  }

  const double lambda0 = wavelength_mm(cfg.frequencies.center_ghz());
  ResolutionLimits limits =
      resolution_limits(lambda0, range_to_roi(cfg), cfg.reflector.aperture_size, cfg.frequencies.bandwidth_ghz() * 1e9);
  summary << "resolution limits: cross-range " << limits.sigma_xz << " mm, range " << limits.sigma_y
          << " mm (wavelength " << lambda0 << " mm at " << cfg.frequencies.center_ghz() << " GHz)\n";

  // The reconstruction sidecar records how the norm-1 weight was resolved.
  io::json recon_meta = io::read_json_file(io::sidecar_path(recon_path));
  if (recon_meta.contains("lambda_absolute"))
    summary << "solver: lambda " << recon_meta["lambda_absolute"].get<double>() << " (fraction "
            << recon_meta["lambda_fraction"].get<double>() << " of the peak data-fit gradient), "
            << (recon_meta["converged"].get<bool>() ? "converged" : "hit the iteration cap") << " after "
            << recon_meta["iterations"].get<int>() << " iterations\n";

  std::vector<StageTiming> all_timings = timings;
  all_timings.push_back({"analyze", analyze_watch.seconds()});
  summary << "timings:\n";
  double total = 0.0;
  for (const auto& t : all_timings) {
    summary << "  " << t.stage << ": " << fmt_seconds(t.seconds) << " s\n";
    total += t.seconds;
  }
  summary << "  total: " << fmt_seconds(total) << " s\n";

  const std::string summary_path = join(opts.out_dir, artifact::kSummary);
  {
    auto out = io::detail::open_for_write(summary_path, false);
    out << summary.str();
    io::detail::finish_write(out, summary_path);
  }
  written.push_back(summary_path);
  log_of(opts) << summary.str();

  if (bundle) {
    bundle->iou = iou;
    bundle->range_plane_correct = plane_correct;
    bundle->peak_plane = profile.peak_plane;
    bundle->effective_rank = diversity.effective_rank;
    bundle->resolution = limits;
    bundle->reconstruction_empty = empty_recon;
  }
  return written;
}

/// Runs all five stages in order. A stage failure aborts with the stage
/// name and the artifacts the completed stages produced.
inline ReportBundle run_pipeline(const ExperimentConfig& cfg, const StageOptions& opts,
                                 const std::string& compare_dir = "") {
  using namespace pipeline_detail;
  ReportBundle bundle;
  auto stage = [&](const char* name, auto&& fn) {
    Stopwatch watch;
    try {
      auto paths = fn();
      bundle.timings.push_back({name, watch.seconds()});
      for (auto& p : paths) bundle.artifacts.push_back(std::move(p));
    } catch (const std::exception& e) {
      std::string msg = std::string("pipeline stage '") + name + "' failed: " + e.what();
      if (!bundle.artifacts.empty()) {
        msg += "\nartifacts from completed stages:";
        for (const auto& p : bundle.artifacts) msg += "\n  " + p;
      }
      throw std::runtime_error(msg);
    }
  };

  stage("geometry", [&] { return run_geometry(cfg, opts); });
  stage("calibrate", [&] { return run_calibrate(cfg, opts); });
  stage("simulate", [&] { return run_simulate(cfg, opts); });
  stage("reconstruct", [&] { return run_reconstruct(cfg, opts, &bundle); });
  stage("analyze", [&] { return run_analyze(cfg, opts, compare_dir, &bundle, bundle.timings); });
  return bundle;
}

}  // namespace cra
