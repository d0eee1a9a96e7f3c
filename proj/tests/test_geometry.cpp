#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "radarodo/geometry.hpp"
#include "test_util.hpp"

using namespace radarodo;

TEST_CASE("boxplus: zero increment is identity") {
  const Quat q = quat_boxplus(Quat::identity(), Vec3::Zero());
  CHECK(q.w == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(quat_distance(q, Quat::identity()) < 1e-12);
}

TEST_CASE("boxplus: z increment of pi/2 gives 90 deg yaw") {
  const Quat q = quat_boxplus(Quat::identity(), Vec3(0, 0, kPi / 2));
  const Quat expect(std::cos(kPi / 4), 0, 0, std::sin(kPi / 4));
  CHECK(quat_distance(q, expect) < 1e-12);
}

TEST_CASE("boxminus: identity and single-axis cases") {
  std::mt19937_64 rng(7);
  const Quat q = testutil::random_quat(rng);
  CHECK(quat_boxminus(q, q).norm() < 1e-12);

  const Quat yaw90 = quat_from_euler_zyx(kPi / 2, 0, 0);
  const Vec3 d = quat_boxminus(yaw90, Quat::identity());
  CHECK(d.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d.y() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d.z() == doctest::Approx(kPi / 2).epsilon(1e-12));
}

TEST_CASE("boxplus/boxminus are mutual inverses on 1000 random pairs") {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Quat p = testutil::random_quat(rng);
    const Quat q = testutil::random_quat(rng);
    const Quat p2 = quat_boxplus(q, quat_boxminus(p, q));
    worst = std::max(worst, quat_distance(p2, p));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("boxminus magnitude never exceeds pi") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 500; ++i) {
    const Vec3 d = quat_boxminus(testutil::random_quat(rng), testutil::random_quat(rng));
    CHECK(d.norm() <= kPi + 1e-12);
  }
}

TEST_CASE("boxplus wraps arbitrarily large increments") {
  const Quat a = quat_boxplus(Quat::identity(), Vec3(0, 0, kPi / 2 + 4 * kPi));
  const Quat b = quat_boxplus(Quat::identity(), Vec3(0, 0, kPi / 2));
  CHECK(quat_distance(a, b) < 1e-9);
}

TEST_CASE("quaternion products stay unit-norm and canonical") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    const Quat q = testutil::random_quat(rng) * testutil::random_quat(rng);
    const double n = std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
    CHECK(std::abs(n - 1.0) < 1e-9);
    CHECK(q.w >= 0.0);
  }
}

TEST_CASE("rotate matches rotation_matrix") {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 200; ++i) {
    const Quat q = testutil::random_quat(rng);
    const Vec3 v = testutil::random_vec3(rng, 5.0);
    CHECK((q.rotate(v) - q.rotation_matrix() * v).norm() < 1e-12);
  }
}

TEST_CASE("left/right product matrices reproduce the Hamilton product") {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    const Quat a = testutil::random_quat(rng);
    const Quat b = testutil::random_quat(rng);
    const Quat ab = a * b;
    // Products canonicalize; compare up to the sign that canonicalization applied.
    Vec4 lhs = left_product_matrix(a) * b.coeffs_wxyz();
    if (lhs(0) < 0) lhs = -lhs;
    Vec4 rhs = right_product_matrix(b) * a.coeffs_wxyz();
    if (rhs(0) < 0) rhs = -rhs;
    CHECK((lhs - ab.coeffs_wxyz()).norm() < 1e-12);
    CHECK((rhs - ab.coeffs_wxyz()).norm() < 1e-12);
  }
}

TEST_CASE("euler: identity and pure yaw") {
  const EulerZYX e = euler_zyx_from_quat(Quat::identity());
  CHECK(e.yaw == doctest::Approx(0.0));
  CHECK(e.pitch == doctest::Approx(0.0));
  CHECK(e.roll == doctest::Approx(0.0));

  const Quat q = quat_from_euler_zyx(0.3, 0, 0);
  const Quat expect(std::cos(0.15), 0, 0, std::sin(0.15));
  CHECK(quat_distance(q, expect) < 1e-12);
}

TEST_CASE("euler round-trip on 1000 random rotations away from gimbal lock") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> yawd(-kPi, kPi), pitchd(-1.4, 1.4),
      rolld(-kPi, kPi);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Quat q = quat_from_euler_zyx(yawd(rng), pitchd(rng), rolld(rng));
    const Quat q2 = quat_from_euler_zyx(euler_zyx_from_quat(q));
    worst = std::max(worst, quat_distance(q2, q));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("euler decomposition throws near gimbal lock") {
  const Quat q = quat_from_euler_zyx(0.2, kPi / 2 - 1e-4, 0.1);
  CHECK_THROWS_AS((void)euler_zyx_from_quat(q), GimbalLock);
}

TEST_CASE("yaw_free keeps pitch/roll and zeros yaw") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> a(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double yaw = a(rng) * 3, pitch = a(rng), roll = a(rng) * 2;
    const Quat q = quat_from_euler_zyx(yaw, pitch, roll);
    const EulerZYX e = euler_zyx_from_quat(yaw_free(q));
    CHECK(std::abs(e.yaw) < 1e-9);
    CHECK(e.pitch == doctest::Approx(pitch).epsilon(1e-9));
    CHECK(e.roll == doctest::Approx(roll).epsilon(1e-9));
  }
}

TEST_CASE("pose compose/inverse: round trip to identity") {
  std::mt19937_64 rng(37);
  for (int i = 0; i < 200; ++i) {
    const Pose p = testutil::random_pose(rng);
    const Pose id = p.compose(p.inverse());
    CHECK(id.trans.norm() < 1e-9);
    CHECK(quat_distance(id.rot, Quat::identity()) < 1e-9);
  }
}

TEST_CASE("pose composition is associative") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 200; ++i) {
    const Pose a = testutil::random_pose(rng);
    const Pose b = testutil::random_pose(rng);
    const Pose c = testutil::random_pose(rng);
    const Pose lhs = a.compose(b).compose(c);
    const Pose rhs = a.compose(b.compose(c));
    CHECK((lhs.trans - rhs.trans).norm() < 1e-9);
    CHECK(quat_distance(lhs.rot, rhs.rot) < 1e-9);
  }
}

static std::vector<ImuSample> two_sample_stream() {
  ImuSample a, b;
  a.t_stamp = 1.0;
  a.orientation = Quat::identity();
  b.t_stamp = 2.0;
  b.orientation = quat_from_euler_zyx(kPi / 2, 0, 0);
  return {a, b};
}

TEST_CASE("imu_orientation_at: exact at sample stamps") {
  const auto stream = two_sample_stream();
  CHECK(quat_distance(imu_orientation_at(stream, 1.0), stream[0].orientation) < 1e-12);
  CHECK(quat_distance(imu_orientation_at(stream, 2.0), stream[1].orientation) < 1e-12);
}

TEST_CASE("imu_orientation_at: midpoint of identity and yaw90 is yaw45") {
  const auto stream = two_sample_stream();
  const Quat mid = imu_orientation_at(stream, 1.5);
  CHECK(quat_distance(mid, quat_from_euler_zyx(kPi / 4, 0, 0)) < 1e-12);
}

TEST_CASE("imu_orientation_at: throws outside the stream span") {
  const auto stream = two_sample_stream();
  CHECK_THROWS_AS((void)imu_orientation_at(stream, 0.99), OutOfRange);
  CHECK_THROWS_AS((void)imu_orientation_at(stream, 2.01), OutOfRange);
}

// Independent oracle: normalized lerp agrees with slerp to 1e-3 for small gaps.
static Quat nlerp(const Quat& a, const Quat& b, double u) {
  double sign = quat_dot(a, b) < 0 ? -1.0 : 1.0;
  return Quat(a.w + u * (sign * b.w - a.w), a.x + u * (sign * b.x - a.x),
              a.y + u * (sign * b.y - a.y), a.z + u * (sign * b.z - a.z));
}

TEST_CASE("imu_orientation_at midpoint matches nlerp oracle for gaps < 10 deg") {
  std::mt19937_64 rng(43);
  for (int i = 0; i < 300; ++i) {
    const Quat a = testutil::random_quat(rng);
    const Quat b = quat_boxplus(a, testutil::random_dir(rng) * deg2rad(9.0));
    ImuSample s0, s1;
    s0.t_stamp = 0.0;
    s0.orientation = a;
    s1.t_stamp = 1.0;
    s1.orientation = b;
    const std::vector<ImuSample> stream{s0, s1};
    const Quat mid = imu_orientation_at(stream, 0.5);
    CHECK(quat_distance(mid, nlerp(a, b, 0.5)) < 1e-3);
  }
}
