#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cra/io.hpp"

#ifdef _WIN32
#error "the cli tests assume a posix shell"
#endif
#include <sys/wait.h>

using Catch::Matchers::ContainsSubstring;

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr combined
};

fs::path workspace(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("crasim_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CliResult run_cli(const fs::path& dir, const std::string& args) {
  fs::path log = dir / "cli.log";
  std::string cmd = std::string(CRA_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  int raw = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  REQUIRE(out.good());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small enough to run every stage in seconds: 12 measurements, 50 voxels,
// 121 calibration nodes.
const char* kTinyConfig =
    "[ports]\n"
    "tx_count = 2\n"
    "rx_count = 2\n"
    "[frequencies]\n"
    "count = 3\n"
    "[aperture]\n"
    "spacing = 60\n"
    "x_extent = 600\n"
    "z_extent = 600\n"
    "[roi]\n"
    "extent = 120 120 120\n"
    "voxel = 24 60 24\n"
    "[target]\n"
    "shape = point_set\n"
    "points = 350 1000 0\n"
    "[noise]\n"
    "snr_db = 30\n"
    "[admm]\n"
    "blocks = 4\n"
    "lambda = 0.1\n"
    "lambda_mode = relative\n"
    "max_iters = 200\n"
    "[postproc]\n"
    "na = 2\n";

}  // namespace

TEST_CASE("the pipeline runs end to end on a tiny config", "[cli]") {
  fs::path dir = workspace("pipeline");
  write_file(dir / "tiny.ini", kTinyConfig);
  fs::path out = dir / "out";

  CliResult r = run_cli(dir, "pipeline --config " + (dir / "tiny.ini").string() + " --out " + out.string());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);

  for (const char* name : {"surface.mesh", "sensing_matrix.bin", "truth.bin", "measurements.bin",
                           "reconstruction.bin", "convergence.csv", "averaged.bin", "diversity.csv",
                           "range_projection.csv", "range_projection.pgm", "summary.txt"})
    REQUIRE(fs::exists(out / name));

  std::string summary = slurp(out / "summary.txt");
  REQUIRE_THAT(summary, ContainsSubstring("experiment summary"));
  REQUIRE_THAT(summary, ContainsSubstring("support IoU vs ground truth:"));
  REQUIRE_THAT(summary, ContainsSubstring("resolution limits:"));
  REQUIRE_THAT(summary, ContainsSubstring("timings:"));

  // Re-running one stage with a different thread cap must reproduce the
  // artifact byte for byte.
  std::string first = slurp(out / "reconstruction.bin");
  CliResult again = run_cli(
      dir, "reconstruct --config " + (dir / "tiny.ini").string() + " --out " + out.string() + " --threads 3");
  INFO(again.output);
  REQUIRE(again.exit_code == 0);
  REQUIRE(slurp(out / "reconstruction.bin") == first);
}

TEST_CASE("geometry --tra writes an unperturbed paraboloid", "[cli]") {
  fs::path dir = workspace("tra");
  write_file(dir / "tiny.ini", kTinyConfig);

  CliResult r = run_cli(dir, "geometry --tra --config " + (dir / "tiny.ini").string() + " --out " + dir.string());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);

  cra::TriMesh mesh = cra::io::load_mesh((dir / "surface.mesh").string());
  double max_residual = 0.0;
  for (const auto& v : mesh.vertices) {
    double dx = v.x - 350.0;
    double ideal = (dx * dx + v.z * v.z) / (4.0 * 500.0) - 500.0;
    max_residual = std::max(max_residual, std::abs(v.y - ideal));
  }
  REQUIRE(max_residual < 1e-9);

  // Without --tra the default build perturbs the surface.
  fs::path cra_dir = dir / "cra";
  fs::create_directories(cra_dir);
  CliResult rc = run_cli(dir, "geometry --config " + (dir / "tiny.ini").string() + " --out " + cra_dir.string());
  REQUIRE(rc.exit_code == 0);
  cra::TriMesh perturbed = cra::io::load_mesh((cra_dir / "surface.mesh").string());
  double max_dev = 0.0;
  for (const auto& v : perturbed.vertices) {
    double dx = v.x - 350.0;
    double ideal = (dx * dx + v.z * v.z) / (4.0 * 500.0) - 500.0;
    max_dev = std::max(max_dev, std::abs(v.y - ideal));
  }
  REQUIRE(max_dev > 1e-3);
}

TEST_CASE("stages refuse artifacts from a different configuration", "[cli]") {
  fs::path dir = workspace("hash");
  write_file(dir / "a.ini", kTinyConfig);
  // b differs from a only in the noise level.
  std::string b_text(kTinyConfig);
  auto pos = b_text.find("snr_db = 30");
  REQUIRE(pos != std::string::npos);
  b_text.replace(pos, std::string("snr_db = 30").size(), "snr_db = 20");
  write_file(dir / "b.ini", b_text);
  fs::path out = dir / "out";

  std::string cfg_a = " --config " + (dir / "a.ini").string() + " --out " + out.string();
  std::string cfg_b = " --config " + (dir / "b.ini").string() + " --out " + out.string();

  REQUIRE(run_cli(dir, "geometry" + cfg_a).exit_code == 0);
  REQUIRE(run_cli(dir, "calibrate" + cfg_a).exit_code == 0);
  REQUIRE(run_cli(dir, "simulate" + cfg_a).exit_code == 0);

  // The stored measurements belong to config a; reconstructing under b must
  // refuse and point at the stage to rerun.
  CliResult stale = run_cli(dir, "reconstruct" + cfg_b);
  INFO(stale.output);
  REQUIRE(stale.exit_code == 2);
  REQUIRE_THAT(stale.output, ContainsSubstring("different configuration"));
  REQUIRE_THAT(stale.output, ContainsSubstring("rerun 'simulate'"));
  REQUIRE_THAT(stale.output, ContainsSubstring("--force"));

  // The sensing matrix does not depend on the noise level, so simulate under
  // b reuses it, and the refreshed measurements unblock the solve.
  REQUIRE(run_cli(dir, "simulate" + cfg_b).exit_code == 0);
  REQUIRE(run_cli(dir, "reconstruct" + cfg_b).exit_code == 0);
}

TEST_CASE("missing artifacts name the producing stage", "[cli]") {
  fs::path dir = workspace("missing");
  write_file(dir / "tiny.ini", kTinyConfig);
  CliResult r = run_cli(dir, "calibrate --config " + (dir / "tiny.ini").string() + " --out " + dir.string());
  INFO(r.output);
  REQUIRE(r.exit_code == 2);
  REQUIRE_THAT(r.output, ContainsSubstring("missing artifact"));
  REQUIRE_THAT(r.output, ContainsSubstring("'geometry'"));
}

TEST_CASE("configuration and usage errors exit with 1", "[cli]") {
  fs::path dir = workspace("usage");
  write_file(dir / "bad.ini", "[reflector]\nmax_distortion = -1\n");

  CliResult bad = run_cli(dir, "geometry --config " + (dir / "bad.ini").string() + " --out " + dir.string());
  INFO(bad.output);
  REQUIRE(bad.exit_code == 1);
  REQUIRE_THAT(bad.output, ContainsSubstring("problem(s)"));

  REQUIRE(run_cli(dir, "frobnicate").exit_code == 1);
  REQUIRE(run_cli(dir, "").exit_code == 1);
  REQUIRE(run_cli(dir, "geometry --config " + (dir / "no_such.ini").string()).exit_code == 1);
  REQUIRE(run_cli(dir, "--help").exit_code == 0);
}

TEST_CASE("analyze --compare emits the comparative spectrum", "[cli]") {
  fs::path dir = workspace("compare");
  write_file(dir / "tiny.ini", kTinyConfig);
  fs::path main_out = dir / "main";
  fs::path other_out = dir / "other";
  std::string cfg = " --config " + (dir / "tiny.ini").string();

  REQUIRE(run_cli(dir, "pipeline" + cfg + " --out " + main_out.string()).exit_code == 0);
  // The comparison run only needs a sensing matrix.
  REQUIRE(run_cli(dir, "geometry --tra" + cfg + " --out " + other_out.string()).exit_code == 0);
  REQUIRE(run_cli(dir, "calibrate --tra" + cfg + " --out " + other_out.string()).exit_code == 0);

  CliResult r = run_cli(dir, "analyze" + cfg + " --out " + main_out.string() + " --compare " + other_out.string());
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  fs::path cmp = main_out / "diversity_compare.csv";
  REQUIRE(fs::exists(cmp));
  std::string text = slurp(cmp);
  REQUIRE_THAT(text, ContainsSubstring("index,singular_value_this,singular_value_other\n"));
  REQUIRE_THAT(text, ContainsSubstring("\n0,"));
  REQUIRE_THAT(slurp(main_out / "summary.txt"), ContainsSubstring("comparison run"));
}
