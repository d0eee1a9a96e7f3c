#include "radarodo/radar_scan.hpp"

#include <cstdint>
#include <unordered_map>

namespace radarodo {

RadarScan apply_extrinsics(const RadarScan& scan, const Extrinsics& ext) {
  RadarScan out;
  out.t_stamp = scan.t_stamp;
  out.points.reserve(scan.points.size());
  for (const RadarPoint& p : scan.points) {
    RadarPoint q = p;
    q.pos = ext.radar_to_base.apply(p.pos);
    out.points.push_back(q);
  }
  return out;
}

RadarScan range_power_filter(const RadarScan& scan, double min_range,
                             double max_range, double min_power) {
  RadarScan out;
  out.t_stamp = scan.t_stamp;
  out.points.reserve(scan.points.size());
  for (const RadarPoint& p : scan.points) {
    const double r = p.pos.norm();
    if (r < min_range || r > max_range) continue;
    if (!std::isnan(p.power) && p.power < min_power) continue;
    out.points.push_back(p);
  }
  return out;
}

namespace {

// Collision-free packed voxel key: 21 signed bits per axis.
int64_t voxel_key(const Vec3& p, double inv_leaf) {
  const auto cell = [&](double c) {
    return static_cast<int64_t>(std::floor(c * inv_leaf)) & 0x1FFFFF;
  };
  return (cell(p.x()) << 42) | (cell(p.y()) << 21) | cell(p.z());
}

}  // namespace

std::vector<Vec3> voxel_downsample(std::span<const Vec3> cloud, double leaf) {
  if (!(leaf > 0.0)) throw Error("voxel leaf must be positive");
  const double inv_leaf = 1.0 / leaf;

  struct Accum {
    Vec3 sum = Vec3::Zero();
    int count = 0;
  };
  std::unordered_map<int64_t, std::size_t> slot_of;
  std::vector<Accum> accums;
  std::vector<int64_t> order;  // keys in first-seen order
  slot_of.reserve(cloud.size());

  for (const Vec3& p : cloud) {
    const int64_t key = voxel_key(p, inv_leaf);
    auto [it, inserted] = slot_of.try_emplace(key, accums.size());
    if (inserted) {
      accums.emplace_back();
      order.push_back(key);
    }
    Accum& a = accums[it->second];
    a.sum += p;
    a.count += 1;
  }

  std::vector<Vec3> out;
  out.reserve(accums.size());
  for (const int64_t key : order) {
    const Accum& a = accums[slot_of.at(key)];
    out.push_back(a.sum / a.count);
  }
  return out;
}

}  // namespace radarodo
