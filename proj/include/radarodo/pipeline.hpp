#pragma once

// Two-stage processing pipeline behind the `run` sub-command. Stage 1
// (cloud processing) parses, calibrates, filters and estimates ego-velocity
// per scan; stage 2 (optimizer) propagates poses, gates keyframes, maintains
// the constraint mesh and optimizes the sliding window. The stages exchange
// immutable messages over a bounded queue; a writer flushes retired poses as
// they leave the window, so peak memory does not grow with dataset length.

#include <string>

#include "radarodo/config.hpp"

namespace radarodo {

struct RunOptions {
  std::string radar_path;
  std::string imu_path;
  std::string out_path;          // estimated trajectory, TUM
  std::string raw_out_path;      // raw direct odometry, TUM (empty = off)
  std::string diagnostics_path;  // JSONL solver/edge diagnostics (empty = off)
};

struct RunSummary {
  int scans = 0;
  int keyframes = 0;
  int ego_failures = 0;             // velocity estimation fell back to coasting
  int elevated_residual_scans = 0;  // ego residual above the inlier threshold
  int skipped_keyframes = 0;        // too few points to build a cloud
  int degenerate_windows = 0;
  int edges_added = 0;
  int edges_discarded = 0;
  int solver_diverged = 0;
  int max_solver_iterations = 0;
  bool all_costs_monotonic = true;
  double max_kept_fitness = 0.0;
};

RunSummary run_pipeline(const PipelineConfig& cfg, const RunOptions& opts);

}  // namespace radarodo
