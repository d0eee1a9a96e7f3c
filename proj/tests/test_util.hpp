#pragma once

// Shared randomness helpers for the test suites. Deterministic per seed.

#include <random>

#include "radarodo/geometry.hpp"

namespace radarodo::testutil {

inline Vec3 random_vec3(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

inline Quat random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Quat(n(rng), n(rng), n(rng), n(rng));
}

// Random unit direction.
inline Vec3 random_dir(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v{n(rng), n(rng), n(rng)};
  while (v.norm() < 1e-6) v = Vec3{n(rng), n(rng), n(rng)};
  return v.normalized();
}

inline Pose random_pose(std::mt19937_64& rng, double trans_scale = 10.0) {
  return Pose{0.0, random_vec3(rng, trans_scale), random_quat(rng)};
}

}  // namespace radarodo::testutil
