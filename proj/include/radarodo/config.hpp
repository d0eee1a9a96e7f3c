#pragma once

// Flat key/value configuration with dotted sections, e.g.
//   model = holonomic
//   odom.w_p = [0.1, 0.1, 0.1]
//   gicp.max_corr_dist = 2.0
// Unknown keys are rejected with their line number.

#include <string>

#include "radarodo/ego_velocity.hpp"
#include "radarodo/evaluation.hpp"
#include "radarodo/pose_graph.hpp"
#include "radarodo/radar_scan.hpp"
#include "radarodo/simulator.hpp"

namespace radarodo {

struct PipelineConfig {
  MotionModelKind model = MotionModelKind::kHolonomic;
  PreprocessConfig preprocess;
  RansacConfig ransac;
  OdomConfig odom;  // holds the GICP settings
  Extrinsics extrinsics;

  double eval_max_dt = 0.05;
  std::vector<double> eval_lengths = default_subtrajectory_lengths();

  int queue_capacity = 16;
  bool single_thread = false;

  SimConfig sim;
};

PipelineConfig parse_config_text(const std::string& text,
                                 const std::string& origin = "<string>");
PipelineConfig parse_config_file(const std::string& path);

MotionModelKind motion_model_from_name(const std::string& name);
std::string motion_model_name(MotionModelKind kind);

}  // namespace radarodo
