#include "radarodo/simulator.hpp"

#include <cmath>

namespace radarodo {

namespace {

struct Profile {
  const TrajectorySpec& spec;

  double yaw(double t) const {
    double psi = spec.yaw_rate * t;
    if (spec.yaw_rate_amp != 0.0 && spec.yaw_rate_freq != 0.0) {
      const double w = 2.0 * kPi * spec.yaw_rate_freq;
      psi += spec.yaw_rate_amp / w * (1.0 - std::cos(w * t));
    }
    return psi;
  }
  double yaw_dot(double t) const {
    double rate = spec.yaw_rate;
    if (spec.yaw_rate_amp != 0.0 && spec.yaw_rate_freq != 0.0)
      rate += spec.yaw_rate_amp * std::sin(2.0 * kPi * spec.yaw_rate_freq * t);
    return rate;
  }
  double pitch(double t) const {
    return spec.pitch_amp == 0.0 ? 0.0
                                 : spec.pitch_amp * std::sin(2.0 * kPi * spec.pitch_freq * t);
  }
  double pitch_dot(double t) const {
    if (spec.pitch_amp == 0.0) return 0.0;
    const double w = 2.0 * kPi * spec.pitch_freq;
    return spec.pitch_amp * w * std::cos(w * t);
  }

  Quat attitude(double t) const { return quat_from_euler_zyx(yaw(t), pitch(t), 0.0); }

  Vec3 body_vel() const {
    return {spec.speed,
            spec.kind == VehicleKind::kHolonomic ? spec.lateral_speed : 0.0, 0.0};
  }

  Vec3 world_vel(double t) const { return attitude(t).rotate(body_vel()); }

  Vec3 body_rates(double t) const {
    // attitude = Rz(yaw) * Ry(pitch), roll identically zero
    const double th = pitch(t);
    return {-std::sin(th) * yaw_dot(t), pitch_dot(t), std::cos(th) * yaw_dot(t)};
  }
};

}  // namespace

std::vector<TrajectorySample> sample_trajectory(const TrajectorySpec& spec) {
  if (!(spec.duration > 0.0)) throw BadSpec("duration must be positive");
  if (!(spec.imu_rate > 0.0) || !(spec.radar_rate > 0.0))
    throw BadSpec("sample rates must be positive");
  if (spec.speed < 0.0) throw BadSpec("speed must be non-negative");
  const double ratio = spec.imu_rate / spec.radar_rate;
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    throw BadSpec("imu_rate must be an integer multiple of radar_rate");

  const Profile prof{spec};
  const double dt = 1.0 / spec.imu_rate;
  const int n = static_cast<int>(std::round(spec.duration * spec.imu_rate));

  std::vector<TrajectorySample> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  Vec3 pos = Vec3::Zero();
  constexpr int kSubsteps = 20;

  for (int k = 0; k <= n; ++k) {
    const double t = k * dt;
    TrajectorySample s;
    s.t = t;
    s.pose = Pose{t, pos, prof.attitude(t)};
    s.body_vel = prof.body_vel();
    s.body_rates = prof.body_rates(t);
    out.push_back(s);
    if (k == n) break;

    // RK4 on p_dot = R(t) v_body with the analytic attitude
    const double h = dt / kSubsteps;
    for (int sub = 0; sub < kSubsteps; ++sub) {
      const double t0 = t + sub * h;
      const Vec3 k1 = prof.world_vel(t0);
      const Vec3 k2 = prof.world_vel(t0 + 0.5 * h);
      const Vec3 k4 = prof.world_vel(t0 + h);
      pos += h / 6.0 * (k1 + 4.0 * k2 + k4);
    }
  }
  return out;
}

World make_world(std::span<const TrajectorySample> samples, const WorldSpec& spec,
                 NoiseRng& rng) {
  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  for (const auto& s : samples) {
    min_x = std::min(min_x, s.pose.trans.x());
    max_x = std::max(max_x, s.pose.trans.x());
    min_y = std::min(min_y, s.pose.trans.y());
    max_y = std::max(max_y, s.pose.trans.y());
  }
  min_x -= spec.corridor_halfwidth;
  max_x += spec.corridor_halfwidth;
  min_y -= spec.corridor_halfwidth;
  max_y += spec.corridor_halfwidth;

  World world;
  for (double gx = min_x; gx <= max_x; gx += spec.spacing) {
    for (double gy = min_y; gy <= max_y; gy += spec.spacing) {
      const double jx = (2.0 * rng.uniform() - 1.0) * spec.jitter;
      const double jy = (2.0 * rng.uniform() - 1.0) * spec.jitter;
      const double z =
          spec.min_height + rng.uniform() * (spec.max_height - spec.min_height);
      world.landmarks.emplace_back(gx + jx, gy + jy, z);
    }
  }

  for (int i = 0; i < spec.dynamic_objects; ++i) {
    DynamicObject obj;
    // seed the object near a random point of the trajectory, slightly ahead
    const auto& anchor =
        samples[static_cast<std::size_t>(rng.uniform() * samples.size() * 0.9)];
    const Vec3 ahead = anchor.pose.rot.rotate(Vec3(8.0 + 10.0 * rng.uniform(),
                                                   6.0 * (rng.uniform() - 0.5), 0.0));
    obj.start = anchor.pose.trans + ahead;
    const double heading = 2.0 * kPi * rng.uniform();
    obj.velocity = spec.object_speed * Vec3(std::cos(heading), std::sin(heading), 0.0);
    for (int k = 0; k < spec.object_cluster; ++k)
      obj.offsets.emplace_back(rng.gaussian(0.5), rng.gaussian(0.5),
                               0.5 + 0.3 * rng.uniform());
    world.dynamic_objects.push_back(std::move(obj));
  }
  return world;
}

namespace {

// Append the point if it falls inside the sensor's field of view.
void render_point(const Vec3& p_world, const Vec3& point_vel_world,
                  const TrajectorySample& state, const NoiseSpec& noise,
                  const SensorSpec& sensor, NoiseRng& rng, RadarScan& scan) {
  const Mat3 r_wb = state.pose.rot.rotation_matrix();
  const Vec3 rel_w = p_world - state.pose.trans;
  const Vec3 rel_b = r_wb.transpose() * rel_w;
  const double range = rel_b.norm();
  if (range < 0.5 || range > sensor.max_range) return;
  const double az = std::atan2(rel_b.y(), rel_b.x());
  const double el = std::atan2(rel_b.z(), std::hypot(rel_b.x(), rel_b.y()));
  if (std::abs(az) > 0.5 * deg2rad(sensor.fov_azimuth_deg)) return;
  if (std::abs(el) > 0.5 * deg2rad(sensor.fov_elevation_deg)) return;

  const Vec3 ray = rel_b / range;
  const Vec3 v_rel_w = point_vel_world - r_wb * state.body_vel;
  double doppler = (rel_w / range).dot(v_rel_w);  // receding-positive range rate
  doppler *= noise.doppler_scale;
  doppler += rng.gaussian(noise.doppler_sigma);
  doppler += noise.z_doppler_bias * std::abs(ray.z());

  const double noisy_range = range + rng.gaussian(noise.range_sigma);
  const double noisy_az = az + rng.gaussian(noise.angular_sigma);
  const double noisy_el = el + rng.gaussian(noise.angular_sigma);

  RadarPoint pt;
  pt.pos = noisy_range * Vec3(std::cos(noisy_el) * std::cos(noisy_az),
                              std::cos(noisy_el) * std::sin(noisy_az),
                              std::sin(noisy_el));
  pt.doppler = doppler;
  pt.power = 20.0;  // constant synthetic return power
  scan.points.push_back(pt);
}

}  // namespace

RadarScan render_scan(const World& world, const TrajectorySample& state,
                      const NoiseSpec& noise, const SensorSpec& sensor,
                      NoiseRng& rng) {
  RadarScan scan;
  scan.t_stamp = state.t;
  for (const Vec3& landmark : world.landmarks)
    render_point(landmark, Vec3::Zero(), state, noise, sensor, rng, scan);
  for (const auto& obj : world.dynamic_objects) {
    const Vec3 center = obj.start + state.t * obj.velocity;
    for (const Vec3& off : obj.offsets)
      render_point(center + off, obj.velocity, state, noise, sensor, rng, scan);
  }
  return scan;
}

std::vector<ImuSample> render_imu(std::span<const TrajectorySample> samples,
                                  const NoiseSpec& noise, NoiseRng& rng) {
  std::vector<ImuSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    ImuSample imu;
    imu.t_stamp = s.t;
    const EulerZYX e = euler_zyx_from_quat(s.pose.rot);
    imu.orientation = quat_from_euler_zyx(
        e.yaw, e.pitch + noise.imu_pitch_bias + rng.gaussian(noise.imu_attitude_sigma),
        e.roll + rng.gaussian(noise.imu_attitude_sigma));
    imu.ang_vel = s.body_rates + Vec3(rng.gaussian(noise.imu_gyro_sigma),
                                      rng.gaussian(noise.imu_gyro_sigma),
                                      rng.gaussian(noise.imu_gyro_sigma));
    // specific force for a slowly maneuvering ground vehicle: gravity only
    imu.lin_acc = s.pose.rot.rotation_matrix().transpose() * Vec3(0, 0, 9.81);
    out.push_back(imu);
  }
  return out;
}

SimDataset simulate(const SimConfig& cfg) {
  const auto samples = sample_trajectory(cfg.trajectory);
  NoiseRng rng(cfg.noise.seed);
  const World world = make_world(samples, cfg.world, rng);

  SimDataset data;
  data.imu = render_imu(samples, cfg.noise, rng);

  const int imu_per_scan = static_cast<int>(
      std::round(cfg.trajectory.imu_rate / cfg.trajectory.radar_rate));
  const int scan_count = static_cast<int>(
      std::round(cfg.trajectory.duration * cfg.trajectory.radar_rate));
  for (int k = 0; k < scan_count; ++k) {
    const auto& state = samples[static_cast<std::size_t>(k * imu_per_scan)];
    RadarScan scan = render_scan(world, state, cfg.noise, cfg.sensor, rng);
    if (scan.points.size() < 50) ++data.degenerate_scans;
    data.scans.push_back(std::move(scan));
  }

  const int imu_count = static_cast<int>(
      std::round(cfg.trajectory.duration * cfg.trajectory.imu_rate));
  data.imu.resize(static_cast<std::size_t>(imu_count));
  data.ground_truth.reserve(static_cast<std::size_t>(imu_count));
  for (int k = 0; k < imu_count; ++k)
    data.ground_truth.push_back(samples[static_cast<std::size_t>(k)].pose);
  return data;
}

}  // namespace radarodo
