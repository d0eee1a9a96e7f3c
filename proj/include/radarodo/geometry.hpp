#pragma once

// Quaternion and pose algebra: manifold boxplus/boxminus, Z-Y-X Euler
// decomposition, and time-indexed IMU attitude interpolation.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

#include "radarodo/errors.hpp"

namespace radarodo {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// Unit quaternion with hemisphere convention w >= 0. Every constructor and
// product re-normalizes and canonicalizes, so componentwise quaternion
// residuals (q - identity) are sign-unambiguous.
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  Quat() = default;
  Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {
    normalize();
  }

  static Quat identity() { return {}; }

  void normalize() {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(n > 0.0) || !std::isfinite(n))
      throw Error("cannot normalize zero or non-finite quaternion");
    double s = 1.0 / n;
    if (w < 0.0) s = -s;  // hemisphere canonicalization
    w *= s; x *= s; y *= s; z *= s;
  }

  Quat inverse() const {
    Quat q;
    q.w = w; q.x = -x; q.y = -y; q.z = -z;
    return q;  // conjugate of a unit quaternion, canonical form preserved
  }

  Quat operator*(const Quat& r) const {
    return Quat(w * r.w - x * r.x - y * r.y - z * r.z,
                w * r.x + x * r.w + y * r.z - z * r.y,
                w * r.y - x * r.z + y * r.w + z * r.x,
                w * r.z + x * r.y - y * r.x + z * r.w);
  }

  Vec3 rotate(const Vec3& v) const {
    const Vec3 u(x, y, z);
    const Vec3 t = 2.0 * u.cross(v);
    return v + w * t + u.cross(t);
  }

  Mat3 rotation_matrix() const {
    Mat3 R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
  }

  // Rotation angle in [0, pi].
  double angle() const { return 2.0 * std::atan2(Vec3(x, y, z).norm(), std::abs(w)); }

  Vec4 coeffs_wxyz() const { return {w, x, y, z}; }
};

inline double quat_dot(const Quat& a, const Quat& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

// Angular distance between the rotations a and b, in [0, pi].
inline double quat_distance(const Quat& a, const Quat& b) {
  return (b.inverse() * a).angle();
}

// Rotation-vector exponential; any magnitude wraps to the canonical hemisphere.
Quat quat_exp(const Vec3& rotvec);

// Logarithm of a unit quaternion as a rotation vector with magnitude <= pi.
Vec3 quat_log(const Quat& q);

// Manifold operators: boxplus(q, d) = q * exp(d), boxminus(a, b) = log(b^-1 * a).
inline Quat quat_boxplus(const Quat& q, const Vec3& delta) { return q * quat_exp(delta); }
inline Vec3 quat_boxminus(const Quat& a, const Quat& b) { return quat_log(b.inverse() * a); }

// Intrinsic Z-Y-X (yaw, pitch, roll) Euler angles, radians.
struct EulerZYX {
  double yaw = 0.0, pitch = 0.0, roll = 0.0;
};

// Throws GimbalLock when |pitch| is within 1e-3 rad of pi/2.
EulerZYX euler_zyx_from_quat(const Quat& q);
Quat quat_from_euler_zyx(const EulerZYX& e);
inline Quat quat_from_euler_zyx(double yaw, double pitch, double roll) {
  return quat_from_euler_zyx(EulerZYX{yaw, pitch, roll});
}

// Yaw component of q under the Z-Y-X convention (no gimbal guard needed).
double yaw_of(const Quat& q);

// Rebuild q with its yaw zeroed, keeping pitch and roll. Throws GimbalLock.
Quat yaw_free(const Quat& q);

// Spherical linear interpolation, u in [0, 1].
Quat slerp(const Quat& a, const Quat& b, double u);

// 4x4 matrices of left/right quaternion multiplication acting on (w,x,y,z)
// coefficient vectors: vec(q*r) = left_product_matrix(q) * vec(r)
//                               = right_product_matrix(r) * vec(q).
Eigen::Matrix4d left_product_matrix(const Quat& q);
Eigen::Matrix4d right_product_matrix(const Quat& q);

// Timestamped rigid transform. Composition follows T_world_b = T_world_a * T_a_b.
struct Pose {
  double t_stamp = 0.0;
  Vec3 trans = Vec3::Zero();
  Quat rot;

  Pose() = default;
  Pose(double t, const Vec3& tr, const Quat& q) : t_stamp(t), trans(tr), rot(q) {}

  Pose compose(const Pose& rhs) const {
    return {rhs.t_stamp, trans + rot.rotate(rhs.trans), rot * rhs.rot};
  }

  Pose inverse() const {
    const Quat qi = rot.inverse();
    return {t_stamp, -qi.rotate(trans), qi};
  }

  Vec3 apply(const Vec3& p) const { return trans + rot.rotate(p); }
};

// One IMU reading: sensor-fused attitude plus body rates and specific force.
struct ImuSample {
  double t_stamp = 0.0;
  Quat orientation;
  Vec3 ang_vel = Vec3::Zero();
  Vec3 lin_acc = Vec3::Zero();
};

// Slerp the fused attitude at time t. Throws OutOfRange when t is outside
// the stream span; exact at sample stamps.
Quat imu_orientation_at(std::span<const ImuSample> stream, double t);

}  // namespace radarodo
