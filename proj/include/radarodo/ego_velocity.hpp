#pragma once

// Ego-velocity estimation from a single radar scan. Each return constrains
// the body velocity through its Doppler reading; the motion model reduces
// the unknowns for ground vehicles (holonomic: planar V_x/V_y coupled to
// pitch/roll increments; non-holonomic: single speed along the heading).
// RANSAC rejects returns from dynamic objects and multipath.

#include <cstdint>
#include <vector>

#include "radarodo/geometry.hpp"
#include "radarodo/radar_scan.hpp"

namespace radarodo {

enum class MotionModelKind { kUnconstrained, kHolonomic, kNonHolonomic };

// Orientation increments between the previous and current radar scan,
// Z-Y-X Euler components of q_prev^-1 * q_curr. Only the angles the kind
// uses are read.
struct MotionModel {
  MotionModelKind kind = MotionModelKind::kUnconstrained;
  double pitch_inc = 0.0;  // theta, rad
  double roll_inc = 0.0;   // phi, rad
  double yaw_inc = 0.0;    // psi, rad
};

MotionModel make_motion_model(MotionModelKind kind, const Quat& q_prev,
                              const Quat& q_curr);

struct EgoVelocity {
  Vec3 v = Vec3::Zero();  // body frame, m/s
  int inlier_count = 0;
  double inlier_ratio = 0.0;
  double residual_rms = 0.0;  // m/s, over the inlier set
};

struct RansacConfig {
  bool enabled = true;
  int iterations = 200;
  double inlier_threshold = 0.2;  // m/s on the Doppler residual
  double min_inlier_ratio = 0.3;
  std::uint64_t seed = 0;
};

// Per-point rows of the Doppler system: row i is the unit line-of-sight
// pos_i/|pos_i|, rhs i is the raw (receding-positive) Doppler reading.
struct DopplerSystem {
  Eigen::MatrixX3d rays;
  Eigen::VectorXd doppler;
};

DopplerSystem doppler_rows(const RadarScan& scan);

// Plain least squares over all three velocity components.
// Throws RankDeficient when the smallest singular value of rays is <= 1e-6.
Vec3 solve_unconstrained(const Eigen::MatrixX3d& rays, const Eigen::VectorXd& rhs);

// Reduced two-unknown system for a holonomic ground vehicle:
//   v = [cos(theta) V_x, cos(phi) V_y, sin(theta) V_x + sin(phi) V_y].
EgoVelocity solve_holonomic(const Eigen::MatrixX3d& rays, const Eigen::VectorXd& rhs,
                            double pitch_inc, double roll_inc);

// Single-unknown system for a non-holonomic vehicle: v = V * d(theta, psi)
// with d = [cos(theta)cos(psi), cos(theta)sin(psi), sin(theta)].
EgoVelocity solve_nonholonomic(const Eigen::MatrixX3d& rays,
                               const Eigen::VectorXd& rhs, double pitch_inc,
                               double yaw_inc);

struct RansacResult {
  EgoVelocity velocity;
  std::vector<bool> inlier_mask;  // aligned with scan.points
};

// Full estimator: converts the sensor's receding-positive Doppler into the
// projection model's sign, runs RANSAC with the model-specific minimal sample
// (3/2/1), and refits on the best consensus set. Deterministic per cfg.seed.
// Throws NoConsensus when the best inlier ratio is below cfg.min_inlier_ratio.
RansacResult ransac_estimate(const RadarScan& scan, const MotionModel& model,
                             const RansacConfig& cfg);

}  // namespace radarodo
