#pragma once

// Trajectory accuracy metrics: timestamp association, closed-form SE(3)
// alignment, absolute translation RMSE (total and per axis), and
// sub-trajectory relative errors in percent and deg/m.

#include <optional>
#include <span>
#include <vector>

#include "radarodo/geometry.hpp"

namespace radarodo {

// Validated timestamped pose sequence: >= 2 poses, strictly increasing stamps.
struct Trajectory {
  std::vector<Pose> poses;
};

Trajectory make_trajectory(std::vector<Pose> poses);

struct PosePair {
  Pose est;
  Pose gt;
};

// Globally greedy nearest-stamp pairing within max_dt; every ground-truth
// pose is used at most once. Throws NoOverlap when nothing pairs.
std::vector<PosePair> associate(const Trajectory& est, const Trajectory& gt,
                                double max_dt = 0.05);

// Rigid gt <- est alignment minimizing sum |gt - T(est)|^2 (no scale).
// Throws DegenerateAlignment for fewer than 3 or collinear positions.
Pose align_se3(std::span<const PosePair> pairs);

struct AbsoluteErrors {
  double t_abs = 0.0;  // m, RMSE of Euclidean residuals
  double x = 0.0, y = 0.0, z = 0.0;  // m, per-axis RMSE
};

// alignment = nullopt evaluates unaligned (the direct-odometry convention).
AbsoluteErrors absolute_errors(std::span<const PosePair> pairs,
                               const std::optional<Pose>& alignment);

struct RelativeErrors {
  struct PerLength {
    double length = 0.0;        // m
    double t_rel_pct = 0.0;     // translation RMSE / length * 100
    double r_rel_deg_per_m = 0.0;
    int samples = 0;
  };
  std::vector<PerLength> per_length;
  double t_rel_pct = 0.0;  // mean over lengths
  double r_rel_deg_per_m = 0.0;
};

// rpg-style sub-trajectory errors over the given lengths (meters, measured as
// ground-truth arc length). Throws TooShort when the trajectory cannot cover
// the longest requested length.
RelativeErrors relative_errors(std::span<const PosePair> pairs,
                               std::span<const double> lengths);

inline const std::vector<double>& default_subtrajectory_lengths() {
  static const std::vector<double> lengths{5.0, 10.0, 15.0, 20.0, 25.0};
  return lengths;
}

}  // namespace radarodo
