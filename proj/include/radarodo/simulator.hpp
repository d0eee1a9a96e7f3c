#pragma once

// Synthetic worlds, vehicle trajectories, radar scans with per-point Doppler
// and IMU streams. Every quantity has a closed-form or finely integrated
// ground truth, which makes this module the oracle for the whole pipeline.

#include <cstdint>
#include <random>
#include <vector>

#include "radarodo/geometry.hpp"
#include "radarodo/radar_scan.hpp"

namespace radarodo {

// Deterministic noise source: 53-bit uniforms from mt19937_64 and a
// Box-Muller gaussian, so byte-identical output does not depend on the
// standard library's distribution internals.
class NoiseRng {
 public:
  explicit NoiseRng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0);
  }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return mag * std::cos(2.0 * kPi * u2);
  }

  double gaussian(double sigma) { return sigma == 0.0 ? 0.0 : sigma * gaussian(); }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

enum class VehicleKind { kHolonomic, kNonHolonomic };

// Analytic motion profile: constant body-frame speed (plus lateral speed for
// the holonomic kind), constant-plus-sinusoidal yaw rate, optional sinusoidal
// pitch to mimic rolling terrain.
struct TrajectorySpec {
  VehicleKind kind = VehicleKind::kNonHolonomic;
  double duration = 10.0;    // s
  double radar_rate = 10.0;  // Hz
  double imu_rate = 100.0;   // Hz
  double speed = 1.0;          // m/s, body x
  double lateral_speed = 0.0;  // m/s, body y (holonomic only)
  double yaw_rate = 0.0;       // rad/s
  double yaw_rate_amp = 0.0;   // rad/s
  double yaw_rate_freq = 0.0;  // Hz
  double pitch_amp = 0.0;      // rad
  double pitch_freq = 0.0;     // Hz
};

struct NoiseSpec {
  double doppler_sigma = 0.0;        // m/s
  double doppler_scale = 1.0;        // multiplicative calibration error
  double range_sigma = 0.0;          // m
  double angular_sigma = 0.0;        // rad
  double imu_gyro_sigma = 0.0;       // rad/s
  double imu_attitude_sigma = 0.0;   // rad, pitch/roll
  double imu_pitch_bias = 0.0;       // rad
  double z_doppler_bias = 0.0;       // m/s, scaled by |r_hat_z|
  std::uint64_t seed = 0;
};

struct SensorSpec {
  double fov_azimuth_deg = 120.0;   // full width
  double fov_elevation_deg = 30.0;  // full height
  double max_range = 100.0;         // m
};

// Jittered-grid landmark field around the trajectory. The guaranteed minimum
// separation (spacing - 2*jitter) keeps voxel downsampling from merging
// distinct landmarks.
struct WorldSpec {
  double spacing = 2.5;             // m
  double jitter = 0.6;              // m, uniform per horizontal axis
  double corridor_halfwidth = 25.0; // m beyond the trajectory bounding box
  double min_height = -1.0;         // m relative to the sensor plane
  double max_height = 5.0;
  int dynamic_objects = 0;
  double object_speed = 3.0;        // m/s
  int object_cluster = 8;           // points per object
};

struct DynamicObject {
  Vec3 start = Vec3::Zero();     // cluster center at t = 0
  Vec3 velocity = Vec3::Zero();  // constant world velocity
  std::vector<Vec3> offsets;
};

struct World {
  std::vector<Vec3> landmarks;
  std::vector<DynamicObject> dynamic_objects;
};

struct TrajectorySample {
  double t = 0.0;
  Pose pose;
  Vec3 body_vel = Vec3::Zero();
  Vec3 body_rates = Vec3::Zero();
};

// Poses at IMU rate, endpoint included. Body velocity is consistent with the
// finite difference of positions to 1e-6 * speed. Throws BadSpec.
std::vector<TrajectorySample> sample_trajectory(const TrajectorySpec& spec);

World make_world(std::span<const TrajectorySample> samples, const WorldSpec& spec,
                 NoiseRng& rng);

// One radar scan in the body frame: landmarks and dynamic-object points
// inside the field of view; Doppler is receding-positive range rate plus the
// configured noise and z-bias terms.
RadarScan render_scan(const World& world, const TrajectorySample& state,
                      const NoiseSpec& noise, const SensorSpec& sensor, NoiseRng& rng);

std::vector<ImuSample> render_imu(std::span<const TrajectorySample> samples,
                                  const NoiseSpec& noise, NoiseRng& rng);

struct SimConfig {
  TrajectorySpec trajectory;
  NoiseSpec noise;
  SensorSpec sensor;
  WorldSpec world;
};

struct SimDataset {
  std::vector<RadarScan> scans;          // radar rate
  std::vector<ImuSample> imu;            // IMU rate
  std::vector<Pose> ground_truth;        // IMU rate
  int degenerate_scans = 0;              // scans with fewer than 50 returns
};

// Full dataset generation; deterministic per cfg.noise.seed.
SimDataset simulate(const SimConfig& cfg);

}  // namespace radarodo
