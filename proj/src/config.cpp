#include "radarodo/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_map>

namespace radarodo {

MotionModelKind motion_model_from_name(const std::string& name) {
  if (name == "unconstrained") return MotionModelKind::kUnconstrained;
  if (name == "holonomic") return MotionModelKind::kHolonomic;
  if (name == "nonholonomic") return MotionModelKind::kNonHolonomic;
  throw ConfigError("unknown motion model '" + name +
                    "' (expected unconstrained|holonomic|nonholonomic)");
}

std::string motion_model_name(MotionModelKind kind) {
  switch (kind) {
    case MotionModelKind::kUnconstrained: return "unconstrained";
    case MotionModelKind::kHolonomic: return "holonomic";
    case MotionModelKind::kNonHolonomic: return "nonholonomic";
  }
  return "?";
}

namespace {

struct Value {
  std::string raw;
  std::size_t line;

  double number() const {
    try {
      std::size_t used = 0;
      const double v = std::stod(raw, &used);
      if (raw.find_first_not_of(" \t", used) != std::string::npos)
        throw std::invalid_argument(raw);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("line " + std::to_string(line) + ": expected a number, got '" +
                        raw + "'");
    }
  }
  int integer() const {
    const double v = number();
    if (v != std::floor(v))
      throw ConfigError("line " + std::to_string(line) + ": expected an integer");
    return static_cast<int>(v);
  }
  bool boolean() const {
    if (raw == "true") return true;
    if (raw == "false") return false;
    throw ConfigError("line " + std::to_string(line) + ": expected true/false, got '" +
                      raw + "'");
  }
  std::vector<double> numbers() const {
    if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']')
      throw ConfigError("line " + std::to_string(line) + ": expected [a, b, ...]");
    std::vector<double> out;
    std::string item;
    std::istringstream ss(raw.substr(1, raw.size() - 2));
    while (std::getline(ss, item, ',')) {
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": bad list element '" +
                          item + "'");
      }
    }
    return out;
  }
  Vec3 vec3() const {
    const auto v = numbers();
    if (v.size() != 3)
      throw ConfigError("line " + std::to_string(line) + ": expected 3 elements");
    return {v[0], v[1], v[2]};
  }
  Vec4 vec4() const {
    const auto v = numbers();
    if (v.size() != 4)
      throw ConfigError("line " + std::to_string(line) + ": expected 4 elements");
    return {v[0], v[1], v[2], v[3]};
  }
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

PipelineConfig parse_config_text(const std::string& text, const std::string& origin) {
  PipelineConfig cfg;
  Vec3 ext_xyz = Vec3::Zero();
  Vec3 ext_rpy_deg = Vec3::Zero();

  using Setter = std::function<void(const Value&)>;
  const std::unordered_map<std::string, Setter> setters{
      {"model", [&](const Value& v) { cfg.model = motion_model_from_name(v.raw); }},

      {"preprocess.min_range", [&](const Value& v) { cfg.preprocess.min_range = v.number(); }},
      {"preprocess.max_range", [&](const Value& v) { cfg.preprocess.max_range = v.number(); }},
      {"preprocess.min_power", [&](const Value& v) { cfg.preprocess.min_power = v.number(); }},
      {"preprocess.voxel_leaf", [&](const Value& v) { cfg.preprocess.voxel_leaf = v.number(); }},

      {"ransac.enabled", [&](const Value& v) { cfg.ransac.enabled = v.boolean(); }},
      {"ransac.iterations", [&](const Value& v) { cfg.ransac.iterations = v.integer(); }},
      {"ransac.inlier_threshold",
       [&](const Value& v) { cfg.ransac.inlier_threshold = v.number(); }},
      {"ransac.min_inlier_ratio",
       [&](const Value& v) { cfg.ransac.min_inlier_ratio = v.number(); }},
      {"ransac.seed",
       [&](const Value& v) { cfg.ransac.seed = static_cast<std::uint64_t>(v.number()); }},

      {"gicp.max_corr_dist",
       [&](const Value& v) { cfg.odom.gicp.max_corr_dist = v.number(); }},
      {"gicp.k_neighbors", [&](const Value& v) { cfg.odom.gicp.k_neighbors = v.integer(); }},
      {"gicp.max_iter", [&](const Value& v) { cfg.odom.gicp.max_iter = v.integer(); }},
      {"gicp.epsilon_cov", [&](const Value& v) { cfg.odom.gicp.epsilon_cov = v.number(); }},
      {"gicp.fitness_threshold",
       [&](const Value& v) { cfg.odom.gicp.fitness_threshold = v.number(); }},

      {"odom.trans_threshold",
       [&](const Value& v) { cfg.odom.trans_threshold = v.number(); }},
      {"odom.rot_threshold_deg",
       [&](const Value& v) { cfg.odom.rot_threshold_deg = v.number(); }},
      {"odom.window", [&](const Value& v) { cfg.odom.window_size = v.integer(); }},
      {"odom.w_p", [&](const Value& v) { cfg.odom.w_p = v.vec3(); }},
      {"odom.w_o", [&](const Value& v) { cfg.odom.w_o = v.vec4(); }},
      {"odom.tukey_c", [&](const Value& v) { cfg.odom.tukey_c = v.number(); }},
      {"odom.max_iterations",
       [&](const Value& v) { cfg.odom.max_iterations = v.integer(); }},
      {"odom.function_tolerance",
       [&](const Value& v) { cfg.odom.function_tolerance = v.number(); }},
      {"odom.gradient_tolerance",
       [&](const Value& v) { cfg.odom.gradient_tolerance = v.number(); }},
      {"odom.lambda_init", [&](const Value& v) { cfg.odom.lambda_init = v.number(); }},
      {"odom.lambda_max", [&](const Value& v) { cfg.odom.lambda_max = v.number(); }},

      {"extrinsics.xyz", [&](const Value& v) { ext_xyz = v.vec3(); }},
      {"extrinsics.rpy_deg", [&](const Value& v) { ext_rpy_deg = v.vec3(); }},

      {"eval.max_dt", [&](const Value& v) { cfg.eval_max_dt = v.number(); }},
      {"eval.lengths", [&](const Value& v) { cfg.eval_lengths = v.numbers(); }},

      {"pipeline.queue_capacity",
       [&](const Value& v) { cfg.queue_capacity = v.integer(); }},
      {"pipeline.single_thread",
       [&](const Value& v) { cfg.single_thread = v.boolean(); }},

      {"sim.kind",
       [&](const Value& v) {
         if (v.raw == "holonomic")
           cfg.sim.trajectory.kind = VehicleKind::kHolonomic;
         else if (v.raw == "nonholonomic")
           cfg.sim.trajectory.kind = VehicleKind::kNonHolonomic;
         else
           throw ConfigError("line " + std::to_string(v.line) +
                             ": sim.kind must be holonomic|nonholonomic");
       }},
      {"sim.duration", [&](const Value& v) { cfg.sim.trajectory.duration = v.number(); }},
      {"sim.radar_rate",
       [&](const Value& v) { cfg.sim.trajectory.radar_rate = v.number(); }},
      {"sim.imu_rate", [&](const Value& v) { cfg.sim.trajectory.imu_rate = v.number(); }},
      {"sim.speed", [&](const Value& v) { cfg.sim.trajectory.speed = v.number(); }},
      {"sim.lateral_speed",
       [&](const Value& v) { cfg.sim.trajectory.lateral_speed = v.number(); }},
      {"sim.yaw_rate", [&](const Value& v) { cfg.sim.trajectory.yaw_rate = v.number(); }},
      {"sim.yaw_rate_amp",
       [&](const Value& v) { cfg.sim.trajectory.yaw_rate_amp = v.number(); }},
      {"sim.yaw_rate_freq",
       [&](const Value& v) { cfg.sim.trajectory.yaw_rate_freq = v.number(); }},
      {"sim.pitch_amp", [&](const Value& v) { cfg.sim.trajectory.pitch_amp = v.number(); }},
      {"sim.pitch_freq",
       [&](const Value& v) { cfg.sim.trajectory.pitch_freq = v.number(); }},

      {"sim.noise.doppler_sigma",
       [&](const Value& v) { cfg.sim.noise.doppler_sigma = v.number(); }},
      {"sim.noise.doppler_scale",
       [&](const Value& v) { cfg.sim.noise.doppler_scale = v.number(); }},
      {"sim.noise.range_sigma",
       [&](const Value& v) { cfg.sim.noise.range_sigma = v.number(); }},
      {"sim.noise.angular_sigma",
       [&](const Value& v) { cfg.sim.noise.angular_sigma = v.number(); }},
      {"sim.noise.gyro_sigma",
       [&](const Value& v) { cfg.sim.noise.imu_gyro_sigma = v.number(); }},
      {"sim.noise.attitude_sigma",
       [&](const Value& v) { cfg.sim.noise.imu_attitude_sigma = v.number(); }},
      {"sim.noise.pitch_bias",
       [&](const Value& v) { cfg.sim.noise.imu_pitch_bias = v.number(); }},
      {"sim.noise.z_doppler_bias",
       [&](const Value& v) { cfg.sim.noise.z_doppler_bias = v.number(); }},
      {"sim.noise.seed",
       [&](const Value& v) { cfg.sim.noise.seed = static_cast<std::uint64_t>(v.number()); }},

      {"sim.sensor.fov_azimuth_deg",
       [&](const Value& v) { cfg.sim.sensor.fov_azimuth_deg = v.number(); }},
      {"sim.sensor.fov_elevation_deg",
       [&](const Value& v) { cfg.sim.sensor.fov_elevation_deg = v.number(); }},
      {"sim.sensor.max_range",
       [&](const Value& v) { cfg.sim.sensor.max_range = v.number(); }},

      {"sim.world.spacing", [&](const Value& v) { cfg.sim.world.spacing = v.number(); }},
      {"sim.world.jitter", [&](const Value& v) { cfg.sim.world.jitter = v.number(); }},
      {"sim.world.corridor_halfwidth",
       [&](const Value& v) { cfg.sim.world.corridor_halfwidth = v.number(); }},
      {"sim.world.min_height",
       [&](const Value& v) { cfg.sim.world.min_height = v.number(); }},
      {"sim.world.max_height",
       [&](const Value& v) { cfg.sim.world.max_height = v.number(); }},
      {"sim.world.dynamic_objects",
       [&](const Value& v) { cfg.sim.world.dynamic_objects = v.integer(); }},
      {"sim.world.object_speed",
       [&](const Value& v) { cfg.sim.world.object_speed = v.number(); }},
      {"sim.world.object_cluster",
       [&](const Value& v) { cfg.sim.world.object_cluster = v.integer(); }},
  };

  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ": line " + std::to_string(line_no) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end())
      throw ConfigError(origin + ": line " + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
    try {
      it->second(Value{raw, line_no});
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ": " + e.what());
    }
  }

  cfg.extrinsics.radar_to_base.trans = ext_xyz;
  cfg.extrinsics.radar_to_base.rot =
      quat_from_euler_zyx(deg2rad(ext_rpy_deg(2)), deg2rad(ext_rpy_deg(1)),
                          deg2rad(ext_rpy_deg(0)));

  const auto check = [&](bool ok, const char* what) {
    if (!ok) throw ConfigError(origin + ": " + what);
  };
  check(cfg.preprocess.min_range >= 0.0 &&
            cfg.preprocess.min_range < cfg.preprocess.max_range,
        "preprocess range gate must satisfy 0 <= min < max");
  check(cfg.preprocess.voxel_leaf > 0.0, "preprocess.voxel_leaf must be positive");
  check(cfg.ransac.iterations > 0, "ransac.iterations must be positive");
  check(cfg.ransac.inlier_threshold > 0.0, "ransac.inlier_threshold must be positive");
  check(cfg.ransac.min_inlier_ratio >= 0.0 && cfg.ransac.min_inlier_ratio <= 1.0,
        "ransac.min_inlier_ratio must be in [0, 1]");
  check(cfg.odom.trans_threshold > 0.0 && cfg.odom.rot_threshold_deg > 0.0,
        "keyframe thresholds must be positive");
  check(cfg.odom.window_size >= 2, "odom.window must be at least 2");
  check(cfg.odom.w_p.minCoeff() >= 0.0 && cfg.odom.w_o.minCoeff() >= 0.0,
        "residual weights must be non-negative");
  check(cfg.odom.tukey_c > 0.0, "odom.tukey_c must be positive");
  check(cfg.odom.gicp.max_corr_dist > 0.0, "gicp.max_corr_dist must be positive");
  check(cfg.odom.gicp.fitness_threshold > 0.0,
        "gicp.fitness_threshold must be positive");
  check(cfg.eval_max_dt > 0.0, "eval.max_dt must be positive");
  check(cfg.queue_capacity > 0, "pipeline.queue_capacity must be positive");
  return cfg;
}

PipelineConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

}  // namespace radarodo
