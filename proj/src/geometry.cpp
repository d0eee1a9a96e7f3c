#include "radarodo/geometry.hpp"

#include <algorithm>

namespace radarodo {

Quat quat_exp(const Vec3& rotvec) {
  const double angle = rotvec.norm();
  double s;
  if (angle < 1e-12) {
    s = 0.5 - angle * angle / 48.0;  // sin(a/2)/a series
  } else {
    s = std::sin(0.5 * angle) / angle;
  }
  return Quat(std::cos(0.5 * angle), s * rotvec.x(), s * rotvec.y(), s * rotvec.z());
}

Vec3 quat_log(const Quat& q) {
  const Vec3 v(q.x, q.y, q.z);
  const double vn = v.norm();
  const double angle = 2.0 * std::atan2(vn, q.w);  // w >= 0 so angle <= pi
  if (vn < 1e-12) return 2.0 * v;                  // small-angle limit of angle/vn
  return (angle / vn) * v;
}

EulerZYX euler_zyx_from_quat(const Quat& q) {
  const double sp = 2.0 * (q.w * q.y - q.x * q.z);
  const double sp_c = std::clamp(sp, -1.0, 1.0);
  const double pitch = std::asin(sp_c);
  if (std::abs(pitch) > kPi / 2.0 - 1e-3)
    throw GimbalLock("pitch within 1e-3 rad of +-pi/2, yaw/roll are not separable");
  EulerZYX e;
  e.pitch = pitch;
  e.yaw = std::atan2(2.0 * (q.w * q.z + q.x * q.y), 1.0 - 2.0 * (q.y * q.y + q.z * q.z));
  e.roll = std::atan2(2.0 * (q.w * q.x + q.y * q.z), 1.0 - 2.0 * (q.x * q.x + q.y * q.y));
  return e;
}

Quat quat_from_euler_zyx(const EulerZYX& e) {
  const Quat qz(std::cos(0.5 * e.yaw), 0, 0, std::sin(0.5 * e.yaw));
  const Quat qy(std::cos(0.5 * e.pitch), 0, std::sin(0.5 * e.pitch), 0);
  const Quat qx(std::cos(0.5 * e.roll), std::sin(0.5 * e.roll), 0, 0);
  return qz * qy * qx;
}

double yaw_of(const Quat& q) {
  return std::atan2(2.0 * (q.w * q.z + q.x * q.y), 1.0 - 2.0 * (q.y * q.y + q.z * q.z));
}

Quat yaw_free(const Quat& q) {
  const EulerZYX e = euler_zyx_from_quat(q);  // gimbal guard lives here
  return quat_from_euler_zyx(EulerZYX{0.0, e.pitch, e.roll});
}

Quat slerp(const Quat& a, const Quat& b, double u) {
  double d = quat_dot(a, b);
  double sign = 1.0;
  if (d < 0.0) {
    d = -d;
    sign = -1.0;
  }
  if (d > 1.0 - 1e-12) {
    // nearly parallel: normalized lerp (Quat ctor renormalizes)
    return Quat(a.w + u * (sign * b.w - a.w), a.x + u * (sign * b.x - a.x),
                a.y + u * (sign * b.y - a.y), a.z + u * (sign * b.z - a.z));
  }
  const double theta = std::acos(std::clamp(d, -1.0, 1.0));
  const double sa = std::sin((1.0 - u) * theta) / std::sin(theta);
  const double sb = sign * std::sin(u * theta) / std::sin(theta);
  return Quat(sa * a.w + sb * b.w, sa * a.x + sb * b.x, sa * a.y + sb * b.y,
              sa * a.z + sb * b.z);
}

Eigen::Matrix4d left_product_matrix(const Quat& q) {
  Eigen::Matrix4d m;
  m << q.w, -q.x, -q.y, -q.z,
       q.x,  q.w, -q.z,  q.y,
       q.y,  q.z,  q.w, -q.x,
       q.z, -q.y,  q.x,  q.w;
  return m;
}

Eigen::Matrix4d right_product_matrix(const Quat& q) {
  Eigen::Matrix4d m;
  m << q.w, -q.x, -q.y, -q.z,
       q.x,  q.w,  q.z, -q.y,
       q.y, -q.z,  q.w,  q.x,
       q.z,  q.y, -q.x,  q.w;
  return m;
}

Quat imu_orientation_at(std::span<const ImuSample> stream, double t) {
  if (stream.empty()) throw OutOfRange("empty IMU stream");
  if (t < stream.front().t_stamp || t > stream.back().t_stamp)
    throw OutOfRange("time " + std::to_string(t) + " outside IMU stream span [" +
                     std::to_string(stream.front().t_stamp) + ", " +
                     std::to_string(stream.back().t_stamp) + "]");

  const auto it = std::lower_bound(
      stream.begin(), stream.end(), t,
      [](const ImuSample& s, double tt) { return s.t_stamp < tt; });
  if (it->t_stamp == t) return it->orientation;
  const ImuSample& hi = *it;
  const ImuSample& lo = *(it - 1);
  const double u = (t - lo.t_stamp) / (hi.t_stamp - lo.t_stamp);
  return slerp(lo.orientation, hi.orientation, u);
}

}  // namespace radarodo
