// SPDX-License-Identifier: Apache-2.0
//
// crasim: desk-scale simulation of compressive-reflector-antenna mm-wave imaging.
//
// Command-line front end. Each subcommand runs one pipeline stage against an
// artifact directory; `pipeline` runs all five. Exit codes: 0 success,
// 1 configuration or usage error, 2 runtime failure.

#include <CLI11.hpp>
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "cra/config.hpp"
#include "cra/pipeline.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::string out_dir = "out";
  int threads = 1;
  bool tra = false;
  bool force = false;
  std::string compare_dir;
  std::uint64_t seed_geometry = 0;
  std::uint64_t seed_noise = 0;
  bool seed_geometry_set = false;
  bool seed_noise_set = false;
};

cra::ExperimentConfig resolve_config(const CliArgs& args) {
  cra::ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = cra::load_config(args.config_path);
  if (args.seed_geometry_set) {
    cfg.seeds.geometry = args.seed_geometry;
    cfg.reflector.seed = args.seed_geometry;
  }
  if (args.seed_noise_set) cfg.seeds.noise = args.seed_noise;
  if (args.tra) cfg.apply_tra();
  return cfg;
}

cra::StageOptions stage_options(const CliArgs& args) {
  cra::StageOptions opts;
  opts.out_dir = args.out_dir;
  opts.threads = args.threads;
  opts.force = args.force;
  opts.log = &std::cout;
  return opts;
}

void add_common_flags(CLI::App* sub, CliArgs& args) {
  sub->add_option("--config", args.config_path, "experiment config file (INI-style); defaults apply when omitted")
      ->check(CLI::ExistingFile);
  sub->add_option("--out", args.out_dir, "artifact directory");
  sub->add_option("--threads", args.threads, "worker thread cap (results are identical for any value)")
      ->check(CLI::PositiveNumber);
  sub->add_flag("--tra", args.tra, "force the unperturbed baseline reflector (max distortion 0)");
  sub->add_flag("--force", args.force, "accept artifacts whose config hash does not match");
  sub->add_option("--seed-geometry", args.seed_geometry, "override the surface perturbation seed")
      ->each([&args](const std::string&) { args.seed_geometry_set = true; });
  sub->add_option("--seed-noise", args.seed_noise, "override the measurement noise seed")
      ->each([&args](const std::string&) { args.seed_noise_set = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compressive-reflector imaging pipeline"};
  app.require_subcommand(1);
  CliArgs args;

  auto* geometry = app.add_subcommand("geometry", "build the reflector surface mesh");
  auto* calibrate = app.add_subcommand("calibrate", "assemble the sensing matrix from the stored mesh");
  auto* simulate = app.add_subcommand("simulate", "rasterize the target and synthesize measurements");
  auto* reconstruct = app.add_subcommand("reconstruct", "solve for the reflectivity volume");
  auto* analyze = app.add_subcommand("analyze", "post-process the reconstruction and write the summary");
  auto* pipeline = app.add_subcommand("pipeline", "run all stages in order");
  for (auto* sub : {geometry, calibrate, simulate, reconstruct, analyze, pipeline}) add_common_flags(sub, args);
  analyze->add_option("--compare", args.compare_dir,
                      "artifact directory of another run; emits a comparative singular-spectrum CSV");
  pipeline->add_option("--compare", args.compare_dir,
                       "artifact directory of another run; emits a comparative singular-spectrum CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Collapse CLI11's exit-code zoo onto the documented contract: 0 for
    // --help/--version, 1 for any usage or validation problem.
    return app.exit(e) == 0 ? 0 : 1;
  }

  cra::ExperimentConfig cfg;
  try {
    cfg = resolve_config(args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  const cra::StageOptions opts = stage_options(args);
  try {
    if (geometry->parsed()) {
      cra::run_geometry(cfg, opts);
    } else if (calibrate->parsed()) {
      cra::run_calibrate(cfg, opts);
    } else if (simulate->parsed()) {
      cra::run_simulate(cfg, opts);
    } else if (reconstruct->parsed()) {
      cra::run_reconstruct(cfg, opts);
    } else if (analyze->parsed()) {
      cra::run_analyze(cfg, opts, args.compare_dir);
    } else if (pipeline->parsed()) {
      cra::run_pipeline(cfg, opts, args.compare_dir);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
