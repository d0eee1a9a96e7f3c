#pragma once

// Radar scan types, extrinsic calibration into the vehicle frame, and the
// range/power/voxel filters that prepare clouds for scan matching.

#include <span>
#include <vector>

#include "radarodo/geometry.hpp"

namespace radarodo {

// One radar return in the sensor frame. Doppler is positive for targets
// receding along the line of sight. Power is dB, NaN when the sensor does
// not report it.
struct RadarPoint {
  Vec3 pos = Vec3::Zero();
  double doppler = 0.0;
  double power = std::numeric_limits<double>::quiet_NaN();
};

struct RadarScan {
  double t_stamp = 0.0;
  std::vector<RadarPoint> points;
};

// Fixed rigid transform taking radar-frame coordinates to the vehicle base frame.
struct Extrinsics {
  Pose radar_to_base{0.0, Vec3::Zero(), Quat::identity()};
};

// Rotate+translate point positions into the base frame. Doppler stays a
// scalar along the ray; the lever-arm contribution is not modeled.
RadarScan apply_extrinsics(const RadarScan& scan, const Extrinsics& ext);

// Keep points with min_range <= |pos| <= max_range and power >= min_power
// (points with NaN power always pass the power gate).
RadarScan range_power_filter(const RadarScan& scan, double min_range,
                             double max_range, double min_power);

// Voxel-grid downsampling: one centroid per occupied cube of side `leaf`.
// Output order follows first occupancy, so results are deterministic.
std::vector<Vec3> voxel_downsample(std::span<const Vec3> cloud, double leaf);

struct PreprocessConfig {
  double min_range = 0.5;    // m
  double max_range = 120.0;  // m
  double min_power = -std::numeric_limits<double>::infinity();  // dB, gate disabled
  double voxel_leaf = 0.5;   // m
};

}  // namespace radarodo
