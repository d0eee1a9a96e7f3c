// radarodo: simulate | run | evaluate command-line front end.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>

#include "radarodo/evaluation.hpp"
#include "radarodo/pipeline.hpp"
#include "radarodo/scan_io.hpp"

namespace {

using namespace radarodo;
using nlohmann::json;

int cmd_simulate(const PipelineConfig& cfg, const std::string& out_dir,
                 std::optional<std::uint64_t> seed) {
  SimConfig sim = cfg.sim;
  if (seed) sim.noise.seed = *seed;

  const SimDataset data = simulate(sim);
  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);
  write_radar_jsonl((dir / "radar.jsonl").string(), data.scans);
  write_imu_csv((dir / "imu.csv").string(), data.imu);
  write_tum((dir / "gt.tum").string(), data.ground_truth);

  json j{{"scans", data.scans.size()},
         {"imu_samples", data.imu.size()},
         {"ground_truth_poses", data.ground_truth.size()},
         {"degenerate_scans", data.degenerate_scans},
         {"seed", sim.noise.seed},
         {"out_dir", out_dir}};
  std::printf("%s\n", j.dump(2).c_str());
  if (data.degenerate_scans > 0)
    std::fprintf(stderr, "warning: %d scans hold fewer than 50 returns\n",
                 data.degenerate_scans);
  return 0;
}

int cmd_run(const PipelineConfig& cfg, const RunOptions& opts) {
  const RunSummary s = run_pipeline(cfg, opts);
  json j{{"scans", s.scans},
         {"keyframes", s.keyframes},
         {"ego_failures", s.ego_failures},
         {"elevated_residual_scans", s.elevated_residual_scans},
         {"skipped_keyframes", s.skipped_keyframes},
         {"degenerate_windows", s.degenerate_windows},
         {"edges_added", s.edges_added},
         {"edges_discarded", s.edges_discarded},
         {"solver_diverged", s.solver_diverged},
         {"max_solver_iterations", s.max_solver_iterations},
         {"all_costs_monotonic", s.all_costs_monotonic},
         {"max_kept_fitness", s.max_kept_fitness},
         {"trajectory", opts.out_path}};
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

int cmd_evaluate(const std::string& est_path, const std::string& gt_path,
                 bool no_align, double max_dt, std::vector<double> lengths,
                 const std::string& csv_path) {
  const Trajectory est = make_trajectory(read_tum(est_path));
  const Trajectory gt = make_trajectory(read_tum(gt_path));
  const auto pairs = associate(est, gt, max_dt);

  std::optional<Pose> alignment;
  bool aligned = false;
  if (!no_align) {
    try {
      alignment = align_se3(pairs);
      aligned = true;
    } catch (const DegenerateAlignment& e) {
      std::fprintf(stderr, "warning: %s; reporting unaligned errors\n", e.what());
    }
  }
  const AbsoluteErrors abs_err = absolute_errors(pairs, alignment);
  if (lengths.empty()) lengths = default_subtrajectory_lengths();
  const RelativeErrors rel = relative_errors(pairs, lengths);

  json per = json::array();
  for (const auto& pl : rel.per_length)
    per.push_back(json{{"length", pl.length},
                       {"t_rel_pct", pl.t_rel_pct},
                       {"r_rel_deg_per_m", pl.r_rel_deg_per_m},
                       {"samples", pl.samples}});
  json j{{"pairs", pairs.size()},
         {"aligned", aligned},
         {"t_abs", abs_err.t_abs},
         {"t_abs_x", abs_err.x},
         {"t_abs_y", abs_err.y},
         {"t_abs_z", abs_err.z},
         {"t_rel_pct", rel.t_rel_pct},
         {"r_rel_deg_per_m", rel.r_rel_deg_per_m},
         {"per_length", per}};
  std::printf("%s\n", j.dump(2).c_str());

  if (!csv_path.empty()) {
    std::FILE* f = std::fopen(csv_path.c_str(), "w");
    if (!f) throw Error("cannot open for writing: " + csv_path);
    std::fprintf(f, "length_m,t_rel_pct,r_rel_deg_per_m,samples\n");
    for (const auto& pl : rel.per_length)
      std::fprintf(f, "%.3f,%.9f,%.9f,%d\n", pl.length, pl.t_rel_pct,
                   pl.r_rel_deg_per_m, pl.samples);
    std::fclose(f);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"4D radar-inertial odometry toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string model_name;
  int window = -1;
  std::int64_t seed = -1;

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic dataset");
  std::string sim_out = "dataset";
  sim_cmd->add_option("--config", config_path, "pipeline config file");
  sim_cmd->add_option("--out", sim_out, "output directory");
  sim_cmd->add_option("--seed", seed, "noise seed override");

  // run
  auto* run_cmd = app.add_subcommand("run", "run odometry on a dataset");
  RunOptions run_opts;
  std::string dataset_dir;
  bool single_thread = false;
  bool diagnostics = false;
  bool emit_raw = false;
  run_cmd->add_option("--config", config_path, "pipeline config file");
  run_cmd->add_option("--dataset", dataset_dir,
                      "dataset directory holding radar.jsonl and imu.csv");
  run_cmd->add_option("--radar", run_opts.radar_path, "radar JSONL path");
  run_cmd->add_option("--imu", run_opts.imu_path, "IMU CSV path");
  run_cmd->add_option("--out", run_opts.out_path, "estimated trajectory (TUM)")
      ->required();
  run_cmd->add_flag("--emit-raw", emit_raw, "also write the raw direct odometry");
  run_cmd->add_flag("--diagnostics", diagnostics, "write solver diagnostics JSONL");
  run_cmd->add_option("--model", model_name,
                      "unconstrained|holonomic|nonholonomic");
  run_cmd->add_option("--window", window, "sliding window size");
  run_cmd->add_option("--seed", seed, "RANSAC seed override");
  run_cmd->add_flag("--single-thread", single_thread,
                    "run both stages in one thread");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "compare two TUM trajectories");
  std::string est_path, gt_path, csv_path;
  bool no_align = false;
  double max_dt = 0.05;
  std::vector<double> lengths;
  eval_cmd->add_option("--est", est_path, "estimated trajectory")->required();
  eval_cmd->add_option("--gt", gt_path, "ground-truth trajectory")->required();
  eval_cmd->add_flag("--no-align", no_align, "skip SE(3) alignment (per-axis mode)");
  eval_cmd->add_option("--max-dt", max_dt, "association gate, seconds");
  eval_cmd->add_option("--lengths", lengths, "sub-trajectory lengths, meters");
  eval_cmd->add_option("--csv", csv_path, "per-length CSV output");

  CLI11_PARSE(app, argc, argv);

  try {
    radarodo::PipelineConfig cfg;
    if (!config_path.empty()) cfg = radarodo::parse_config_file(config_path);

    if (sim_cmd->parsed()) {
      return cmd_simulate(cfg, sim_out,
                          seed >= 0 ? std::optional<std::uint64_t>(
                                          static_cast<std::uint64_t>(seed))
                                    : std::nullopt);
    }
    if (run_cmd->parsed()) {
      if (!model_name.empty()) cfg.model = radarodo::motion_model_from_name(model_name);
      if (window > 0) cfg.odom.window_size = window;
      if (seed >= 0) cfg.ransac.seed = static_cast<std::uint64_t>(seed);
      if (single_thread) cfg.single_thread = true;
      if (!dataset_dir.empty()) {
        const auto dir = std::filesystem::path(dataset_dir);
        if (run_opts.radar_path.empty())
          run_opts.radar_path = (dir / "radar.jsonl").string();
        if (run_opts.imu_path.empty()) run_opts.imu_path = (dir / "imu.csv").string();
      }
      if (run_opts.radar_path.empty() || run_opts.imu_path.empty())
        throw radarodo::ConfigError("need --dataset or both --radar and --imu");
      if (emit_raw) run_opts.raw_out_path = run_opts.out_path + ".raw";
      if (diagnostics) run_opts.diagnostics_path = run_opts.out_path + ".diag.jsonl";
      return cmd_run(cfg, run_opts);
    }
    return cmd_evaluate(est_path, gt_path, no_align, max_dt, lengths, csv_path);
  } catch (const radarodo::NoOverlap& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const radarodo::TooShort& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const radarodo::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
