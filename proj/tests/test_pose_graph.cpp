#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <functional>

#include "radarodo/pose_graph.hpp"
#include "test_util.hpp"

using namespace radarodo;

namespace {

Pose perturb(std::mt19937_64& rng, const Pose& p, double trans_sigma,
             double rot_sigma_rad) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Pose out = p;
  out.trans += trans_sigma * Vec3(nd(rng), nd(rng), nd(rng));
  out.rot = quat_boxplus(p.rot, rot_sigma_rad * Vec3(nd(rng), nd(rng), nd(rng)));
  return out;
}

// Central finite differences of a residual with respect to one pose tangent.
Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Pose&)>& f,
                            const Pose& x, int residual_dim) {
  const double h = 1e-6;
  Eigen::MatrixXd jac(residual_dim, 6);
  for (int i = 0; i < 6; ++i) {
    Vec3 dt = Vec3::Zero(), dr = Vec3::Zero();
    if (i < 3)
      dt(i) = h;
    else
      dr(i - 3) = h;
    Pose plus = x, minus = x;
    plus.trans += dt;
    minus.trans -= dt;
    plus.rot = quat_boxplus(x.rot, dr);
    minus.rot = quat_boxplus(x.rot, -dr);
    jac.col(i) = (f(plus) - f(minus)) / (2.0 * h);
  }
  return jac;
}

double rel_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd) {
  const double denom = std::max(1.0, fd.cwiseAbs().maxCoeff());
  return (analytic - fd).cwiseAbs().maxCoeff() / denom;
}

GicpConstraintEdge exact_edge(const Pose& a, const Pose& b, int from, int to,
                              double w_gicp = 1.0) {
  GicpConstraintEdge e;
  e.from_id = from;
  e.to_id = to;
  e.rel = a.inverse().compose(b);
  e.w_gicp = w_gicp;
  e.fitness = 0.01;
  return e;
}

}  // namespace

TEST_CASE("propagate_pose: stationary and straight-line cases") {
  Pose prev;
  prev.t_stamp = 1.0;
  EgoVelocity still;
  const Pose same = propagate_pose(prev, still, Quat::identity(), Quat::identity(), 0.1);
  CHECK(same.trans.norm() < 1e-15);
  CHECK(same.t_stamp == doctest::Approx(1.1));

  EgoVelocity fwd;
  fwd.v = Vec3(1, 0, 0);
  const Pose moved = propagate_pose(prev, fwd, Quat::identity(), Quat::identity(), 0.5);
  CHECK((moved.trans - Vec3(0.5, 0, 0)).norm() < 1e-15);
}

TEST_CASE("propagate_pose: body velocity rotates with the previous heading") {
  Pose prev;
  prev.rot = quat_from_euler_zyx(kPi / 2, 0, 0);
  EgoVelocity fwd;
  fwd.v = Vec3(1, 0, 0);
  const Pose moved = propagate_pose(prev, fwd, prev.rot, prev.rot, 1.0);
  CHECK((moved.trans - Vec3(0, 1, 0)).norm() < 1e-12);

  // frame-composition oracle: prev * rel on a random case
  std::mt19937_64 rng(3);
  const Pose p = testutil::random_pose(rng);
  const Quat q_prev = testutil::random_quat(rng);
  const Quat q_curr = testutil::random_quat(rng);
  EgoVelocity v;
  v.v = testutil::random_vec3(rng, 3.0);
  const Pose got = propagate_pose(p, v, q_prev, q_curr, 0.25);
  const Pose expect = p.compose(Pose{0.0, v.v * 0.25, q_prev.inverse() * q_curr});
  CHECK((got.trans - expect.trans).norm() < 1e-12);
  CHECK(quat_distance(got.rot, expect.rot) < 1e-12);
}

TEST_CASE("imu_yaw_update: zero rates leave the attitude alone") {
  std::vector<ImuSample> samples(5);
  for (int i = 0; i < 5; ++i) {
    samples[static_cast<std::size_t>(i)].t_stamp = 0.01 * i;
    samples[static_cast<std::size_t>(i)].orientation = Quat::identity();
  }
  const Quat q = imu_yaw_update(Quat::identity(), samples);
  CHECK(quat_distance(q, Quat::identity()) < 1e-12);
}

TEST_CASE("imu_yaw_update: constant rate integrates exactly") {
  std::vector<ImuSample> samples;
  for (int i = 0; i <= 200; ++i) {
    ImuSample s;
    s.t_stamp = 0.01 * i;  // 2 s span
    s.orientation = Quat::identity();
    s.ang_vel = Vec3(0, 0, 0.1);
    samples.push_back(s);
  }
  const Quat q = imu_yaw_update(Quat::identity(), samples);
  CHECK(yaw_of(q) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("imu_yaw_update: sinusoidal profile matches a fine-step integral") {
  const double amp = 0.5, freq = 0.5, span = 2.0;
  const auto rate = [&](double t) { return amp * std::sin(2 * kPi * freq * t); };

  std::vector<ImuSample> samples;
  const double dt = 1e-3;
  for (int i = 0; i <= static_cast<int>(span / dt); ++i) {
    ImuSample s;
    s.t_stamp = dt * i;
    s.orientation = Quat::identity();  // flat attitude
    s.ang_vel = Vec3(0, 0, rate(s.t_stamp));
    samples.push_back(s);
  }
  const Quat q = imu_yaw_update(Quat::identity(), samples);

  double oracle = 0.0;
  const double fine = 1e-4;
  for (double t = 0.0; t + fine <= span + 1e-12; t += fine)
    oracle += 0.5 * (rate(t) + rate(t + fine)) * fine;
  CHECK(std::abs(yaw_of(q) - oracle) < 1e-6);
}

TEST_CASE("keyframe gate thresholds") {
  OdomConfig cfg;  // 1.0 m / 5 deg
  Pose last;
  Pose cur;
  cur.trans = Vec3(0.3, 0, 0);
  cur.rot = quat_from_euler_zyx(deg2rad(1.0), 0, 0);
  CHECK_FALSE(keyframe_gate(cur, last, cfg));

  cur.trans = Vec3(1.2, 0, 0);
  cur.rot = Quat::identity();
  CHECK(keyframe_gate(cur, last, cfg));

  cur.trans = Vec3::Zero();
  cur.rot = quat_from_euler_zyx(deg2rad(5.1), 0, 0);
  CHECK(keyframe_gate(cur, last, cfg));
}

TEST_CASE("residual_pos: consistent poses, hand case, rotated frame") {
  Pose a, b;
  b.trans = Vec3(1, 0, 0);
  const Vec3 w_p(0.1, 0.1, 0.1);

  auto edge = exact_edge(a, b, 0, 1);
  CHECK(residual_pos(a, b, edge, w_p).norm() < 1e-15);

  edge.rel.trans = Vec3(0.9, 0, 0);
  const Vec3 r = residual_pos(a, b, edge, w_p);
  CHECK(r.x() == doctest::Approx(-0.01).epsilon(1e-12));
  CHECK(std::abs(r.y()) < 1e-15);

  Pose a_yaw;
  a_yaw.rot = quat_from_euler_zyx(kPi / 2, 0, 0);
  Pose b_side;
  b_side.trans = Vec3(0, 1, 0);
  GicpConstraintEdge edge2;
  edge2.rel.trans = Vec3(1, 0, 0);
  edge2.rel.rot = Quat::identity();
  edge2.w_gicp = 1.0;
  CHECK(residual_pos(a_yaw, b_side, edge2, w_p).norm() < 1e-12);
}

TEST_CASE("residual_ori: consistent, 10-degree offset, double cover") {
  std::mt19937_64 rng(7);
  const Pose a = testutil::random_pose(rng);
  Pose b = testutil::random_pose(rng);
  const auto edge = exact_edge(a, b, 0, 1);
  const Vec4 w_o = Vec4::Ones();
  CHECK(residual_ori(a, b, edge, w_o).norm() < 1e-12);

  // b yawed +10 deg beyond the edge prediction
  Pose a0, b10;
  b10.rot = quat_from_euler_zyx(deg2rad(10), 0, 0);
  GicpConstraintEdge ident_edge;
  ident_edge.w_gicp = 1.0;
  const Vec4 r = residual_ori(a0, b10, ident_edge, w_o);
  CHECK(r(0) == doctest::Approx(std::cos(deg2rad(5)) - 1).epsilon(1e-12));
  CHECK(r(3) == doctest::Approx(std::sin(deg2rad(5))).epsilon(1e-12));

  // sign-flipped q_b gives the identical residual
  Pose b_flipped = b10;
  b_flipped.rot.w = -b10.rot.w;  // Quat ctor canonicalizes, flip manually
  b_flipped.rot.x = -b10.rot.x;
  b_flipped.rot.y = -b10.rot.y;
  b_flipped.rot.z = -b10.rot.z;
  const Vec4 r_flip = residual_ori(a0, b_flipped, ident_edge, w_o);
  CHECK((r - r_flip).norm() < 1e-15);
}

TEST_CASE("residual_imu: agreement, yaw-only difference, pitch offset") {
  const Quat imu = quat_from_euler_zyx(0.7, 0.04, -0.02);
  Pose x;
  x.rot = quat_from_euler_zyx(-1.2, 0.04, -0.02);  // same pitch/roll, other yaw
  CHECK(residual_imu(x, imu, 1.0).norm() < 1e-12);

  x.rot = quat_from_euler_zyx(0.3, 0.04 + deg2rad(2), -0.02);
  const Vec4 r = residual_imu(x, imu, 1.0);
  // hand evaluation: yaw-free error quaternion is a pure 2-degree pitch turn
  const Quat err = yaw_free(imu).inverse() * yaw_free(x.rot);
  CHECK(r(0) == doctest::Approx(err.w - 1).epsilon(1e-9));
  CHECK(r(2) == doctest::Approx(err.y).epsilon(1e-9));
  CHECK(err.angle() == doctest::Approx(deg2rad(2)).epsilon(1e-6));
}

TEST_CASE("residual_dyn: consistent, lifted, rigid-transform invariant") {
  std::mt19937_64 rng(11);
  const Pose raw_a = testutil::random_pose(rng);
  const Pose raw_b = testutil::random_pose(rng);
  CHECK(residual_dyn(raw_a, raw_b, raw_a, raw_b) == doctest::Approx(0.0).epsilon(1e-12));

  Pose lifted = raw_b;
  lifted.trans += raw_a.rot.rotate(Vec3(0, 0, 0.3));
  CHECK(residual_dyn(raw_a, lifted, raw_a, raw_b) == doctest::Approx(-0.3).epsilon(1e-9));

  for (int i = 0; i < 100; ++i) {
    const Pose g = testutil::random_pose(rng);
    const Pose xa = testutil::random_pose(rng), xb = testutil::random_pose(rng);
    const double base = residual_dyn(xa, xb, raw_a, raw_b);
    const double moved = residual_dyn(g.compose(xa), g.compose(xb), g.compose(raw_a),
                                      g.compose(raw_b));
    CHECK(moved == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("pos/ori residuals are invariant to a common rigid transform") {
  std::mt19937_64 rng(13);
  const Vec3 w_p(0.1, 0.1, 0.1);
  const Vec4 w_o = Vec4::Ones();
  for (int i = 0; i < 100; ++i) {
    const Pose a = testutil::random_pose(rng);
    const Pose b = testutil::random_pose(rng);
    auto edge = exact_edge(a, b, 0, 1, 2.5);
    edge.rel.trans += Vec3(0.05, -0.02, 0.01);  // make the residuals non-zero
    edge.rel.rot = quat_boxplus(edge.rel.rot, Vec3(0.01, -0.02, 0.03));
    const Pose g = testutil::random_pose(rng);
    const Vec3 rp0 = residual_pos(a, b, edge, w_p);
    const Vec4 ro0 = residual_ori(a, b, edge, w_o);
    const Vec3 rp1 = residual_pos(g.compose(a), g.compose(b), edge, w_p);
    const Vec4 ro1 = residual_ori(g.compose(a), g.compose(b), edge, w_o);
    CHECK((rp0 - rp1).norm() < 1e-9);
    CHECK((ro0 - ro1).norm() < 1e-9);
  }
}

TEST_CASE("residual_imu: invariant under yaw-only transforms, not under tilt") {
  std::mt19937_64 rng(15);
  const Quat imu = quat_from_euler_zyx(0.3, 0.06, -0.04);
  Pose x;
  x.rot = quat_from_euler_zyx(-0.9, 0.02, 0.01);
  const Vec4 base = residual_imu(x, imu, 1.3);

  for (int i = 0; i < 50; ++i) {
    std::uniform_real_distribution<double> yawd(-kPi, kPi);
    const Quat g_yaw = quat_from_euler_zyx(yawd(rng), 0, 0);
    Pose moved = x;
    moved.rot = g_yaw * x.rot;
    const Vec4 r = residual_imu(moved, g_yaw * imu, 1.3);
    CHECK((r - base).norm() < 1e-12);
  }

  const Quat g_tilt = quat_from_euler_zyx(0, 0.2, 0);
  Pose tilted = x;
  tilted.rot = g_tilt * x.rot;
  CHECK((residual_imu(tilted, g_tilt * imu, 1.3) - base).norm() > 1e-6);
}

TEST_CASE("adaptive IMU weight follows the strongest incident edge") {
  std::vector<GicpConstraintEdge> edges;
  CHECK(adaptive_imu_weight(0, edges) == doctest::Approx(10.0));

  GicpConstraintEdge e;
  e.from_id = 0;
  e.to_id = 1;
  e.w_gicp = 1.0;
  edges.push_back(e);
  CHECK(adaptive_imu_weight(0, edges) == doctest::Approx(1.0).epsilon(1e-5));

  edges[0].w_gicp = 100.0;
  CHECK(adaptive_imu_weight(1, edges) == doctest::Approx(0.1));
  CHECK(adaptive_imu_weight(7, edges) == doctest::Approx(10.0));
}

TEST_CASE("analytic Jacobians match central finite differences") {
  std::mt19937_64 rng(17);
  const Vec3 w_p(0.1, 0.1, 0.1);
  const Vec4 w_o(1.0, 1.0, 1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Pose a = testutil::random_pose(rng, 5.0);
    const Pose b = testutil::random_pose(rng, 5.0);
    const Pose raw_a = testutil::random_pose(rng, 5.0);
    const Pose raw_b = testutil::random_pose(rng, 5.0);
    auto edge = exact_edge(a, b, 0, 1, 0.5 + trial * 0.01);
    edge.rel.trans += testutil::random_vec3(rng, 0.2);
    edge.rel.rot = quat_boxplus(edge.rel.rot, testutil::random_vec3(rng, 0.1));
    const Quat imu = testutil::random_quat(rng);
    const double w_imu = 0.5 + 0.01 * trial;

    Eigen::Matrix<double, 3, 6> pos_ja, pos_jb;
    residual_pos(a, b, edge, w_p, &pos_ja, &pos_jb);
    worst = std::max(worst, rel_error(pos_ja, fd_jacobian([&](const Pose& x) {
      return Eigen::VectorXd(residual_pos(x, b, edge, w_p));
    }, a, 3)));
    worst = std::max(worst, rel_error(pos_jb, fd_jacobian([&](const Pose& x) {
      return Eigen::VectorXd(residual_pos(a, x, edge, w_p));
    }, b, 3)));

    Eigen::Matrix<double, 4, 6> ori_ja, ori_jb;
    residual_ori(a, b, edge, w_o, &ori_ja, &ori_jb);
    worst = std::max(worst, rel_error(ori_ja, fd_jacobian([&](const Pose& x) {
      return Eigen::VectorXd(residual_ori(x, b, edge, w_o));
    }, a, 4)));
    worst = std::max(worst, rel_error(ori_jb, fd_jacobian([&](const Pose& x) {
      return Eigen::VectorXd(residual_ori(a, x, edge, w_o));
    }, b, 4)));

    // keep the IMU residual away from the gimbal guard
    Pose a_safe = a;
    a_safe.rot = quat_from_euler_zyx(yaw_of(a.rot), 0.3 * std::sin(trial * 0.7),
                                     0.4 * std::cos(trial * 1.3));
    Eigen::Matrix<double, 4, 6> imu_ja;
    residual_imu(a_safe, imu, w_imu, &imu_ja);
    worst = std::max(worst, rel_error(imu_ja, fd_jacobian([&](const Pose& x) {
      return Eigen::VectorXd(residual_imu(x, imu, w_imu));
    }, a_safe, 4)));

    Eigen::Matrix<double, 1, 6> dyn_ja, dyn_jb;
    residual_dyn(a, b, raw_a, raw_b, &dyn_ja, &dyn_jb);
    worst = std::max(worst, rel_error(dyn_ja, fd_jacobian([&](const Pose& x) {
      Eigen::VectorXd r(1);
      r(0) = residual_dyn(x, b, raw_a, raw_b);
      return r;
    }, a, 1)));
    worst = std::max(worst, rel_error(dyn_jb, fd_jacobian([&](const Pose& x) {
      Eigen::VectorXd r(1);
      r(0) = residual_dyn(a, x, raw_a, raw_b);
      return r;
    }, b, 1)));
  }
  CHECK(worst < 1e-5);
}

namespace {

// Window of keyframes on a ground-truth trajectory with exact pairwise edges.
struct SyntheticWindow {
  WindowState window;
  std::vector<Pose> truth;
};

SyntheticWindow make_synthetic_window(std::mt19937_64& rng, int count,
                                      OdomConfig cfg = {}) {
  SyntheticWindow out{WindowState(cfg), {}};
  Pose p;
  for (int i = 0; i < count; ++i) {
    if (i > 0) {
      Pose step;
      step.trans = Vec3(1.0, 0.1 * std::sin(i * 0.8), 0.02 * std::cos(i * 0.5));
      step.rot = quat_from_euler_zyx(0.1 * std::sin(i * 0.6), 0.02 * std::cos(i),
                                     0.01 * std::sin(i * 1.7));
      p = p.compose(step);
    }
    p.t_stamp = i * 1.0;
    out.truth.push_back(p);

    Keyframe kf;
    kf.id = i;
    kf.pose = p;
    kf.raw_odom_pose = p;
    kf.imu_quat = p.rot;
    std::vector<GicpConstraintEdge> edges;
    for (int j = 0; j < i; ++j)
      edges.push_back(exact_edge(out.truth[static_cast<std::size_t>(j)], p, j, i));
    out.window.insert_keyframe(std::move(kf), std::move(edges));
  }
  (void)rng;
  return out;
}

}  // namespace

TEST_CASE("optimize: a consistent window is a fixed point, bit-identical poses") {
  std::mt19937_64 rng(19);
  auto fixture = make_synthetic_window(rng, 5);
  std::vector<Pose> before;
  for (const auto& kf : fixture.window.keyframes()) before.push_back(kf.pose);

  const auto report = fixture.window.optimize();
  CHECK(report.status == SolveStatus::kTrivial);
  CHECK(report.initial_cost < 1e-20);

  int i = 0;
  for (const auto& kf : fixture.window.keyframes()) {
    CHECK(std::memcmp(kf.pose.trans.data(), before[static_cast<std::size_t>(i)].trans.data(),
                      3 * sizeof(double)) == 0);
    CHECK(kf.pose.rot.w == before[static_cast<std::size_t>(i)].rot.w);
    ++i;
  }
}

TEST_CASE("optimize: recovers perturbed poses against exact edges") {
  std::mt19937_64 rng(23);
  auto fixture = make_synthetic_window(rng, 5);
  auto& win = fixture.window;

  // perturb every pose but the gauge anchor
  {
    int i = 0;
    for (auto& kf : const_cast<std::deque<Keyframe>&>(win.keyframes())) {
      if (i > 0) kf.pose = perturb(rng, kf.pose, 0.1, deg2rad(2.0));
      ++i;
    }
  }

  const auto report = win.optimize();
  CHECK(report.cost_monotonic);
  CHECK(report.final_cost < report.initial_cost);
  CHECK(report.iterations <= 100);

  int i = 0;
  for (const auto& kf : win.keyframes()) {
    CHECK((kf.pose.trans - fixture.truth[static_cast<std::size_t>(i)].trans).norm() <
          0.01);
    CHECK(quat_distance(kf.pose.rot, fixture.truth[static_cast<std::size_t>(i)].rot) <
          deg2rad(0.1));
    ++i;
  }
}

TEST_CASE("optimize: Tukey suppresses one gross-outlier edge") {
  std::mt19937_64 rng(29);
  OdomConfig cfg;
  SyntheticWindow fixture{WindowState(cfg), {}};
  Pose p;
  for (int i = 0; i < 5; ++i) {
    if (i > 0) p = p.compose(Pose{0.0, Vec3(1.2, 0.05 * i, 0.0),
                                  quat_from_euler_zyx(0.05 * i, 0.0, 0.0)});
    p.t_stamp = i;
    fixture.truth.push_back(p);
    Keyframe kf;
    kf.id = i;
    kf.pose = p;
    kf.raw_odom_pose = p;
    kf.imu_quat = p.rot;
    std::vector<GicpConstraintEdge> edges;
    for (int j = 0; j < i; ++j)
      edges.push_back(exact_edge(fixture.truth[static_cast<std::size_t>(j)], p, j, i));
    if (i == 4) edges[1].rel.trans += Vec3(1.0, 0, 0);  // the planted outlier
    fixture.window.insert_keyframe(std::move(kf), std::move(edges));
  }

  auto& win = fixture.window;
  {
    int i = 0;
    for (auto& kf : const_cast<std::deque<Keyframe>&>(win.keyframes())) {
      if (i > 0) kf.pose = perturb(rng, kf.pose, 0.1, deg2rad(1.0));
      ++i;
    }
  }
  const auto report = win.optimize();
  CHECK(report.cost_monotonic);
  int i = 0;
  for (const auto& kf : win.keyframes()) {
    CHECK((kf.pose.trans - fixture.truth[static_cast<std::size_t>(i)].trans).norm() <
          0.05);
    ++i;
  }
}

TEST_CASE("window eviction retires the oldest pose and prunes its edges") {
  std::mt19937_64 rng(31);
  OdomConfig cfg;
  cfg.window_size = 3;
  auto fixture = make_synthetic_window(rng, 3, cfg);
  auto& win = fixture.window;
  CHECK(win.keyframes().size() == 3);
  CHECK(win.retired().empty());

  Keyframe kf;
  kf.id = 3;
  kf.pose = fixture.truth.back();
  kf.raw_odom_pose = kf.pose;
  kf.imu_quat = kf.pose.rot;
  std::vector<GicpConstraintEdge> edges{exact_edge(fixture.truth[2], kf.pose, 2, 3)};
  const auto report = win.insert_keyframe(std::move(kf), std::move(edges));
  CHECK(report.evicted);
  CHECK(win.keyframes().size() == 3);
  REQUIRE(win.retired().size() == 1);
  CHECK((win.retired()[0].trans - fixture.truth[0].trans).norm() < 1e-15);
  for (const auto& e : win.edges()) {
    CHECK(e.from_id != 0);
    CHECK(e.to_id != 0);
  }
}

TEST_CASE("retired poses are bit-stable across subsequent optimizations") {
  std::mt19937_64 rng(37);
  OdomConfig cfg;
  cfg.window_size = 3;
  auto fixture = make_synthetic_window(rng, 3, cfg);
  auto& win = fixture.window;

  Keyframe kf;
  kf.id = 3;
  kf.pose = perturb(rng, fixture.truth.back(), 0.05, deg2rad(1.0));
  kf.raw_odom_pose = fixture.truth.back();
  kf.imu_quat = fixture.truth.back().rot;
  win.insert_keyframe(std::move(kf),
                      {exact_edge(fixture.truth[2], fixture.truth[3], 2, 3)});
  REQUIRE(win.retired().size() == 1);

  std::array<unsigned char, sizeof(double) * 7> before{};
  const Pose& retired = win.retired()[0];
  std::memcpy(before.data(), retired.trans.data(), 3 * sizeof(double));
  std::memcpy(before.data() + 3 * sizeof(double), &retired.rot.w, 4 * sizeof(double));

  (void)win.optimize();
  std::array<unsigned char, sizeof(double) * 7> after{};
  std::memcpy(after.data(), win.retired()[0].trans.data(), 3 * sizeof(double));
  std::memcpy(after.data() + 3 * sizeof(double), &win.retired()[0].rot.w,
              4 * sizeof(double));
  CHECK(before == after);
}

namespace {

std::vector<Vec3> box_scene(std::mt19937_64& rng, int n) {
  std::vector<Vec3> pts;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (static_cast<int>(pts.size()) < n) {
    const double pick = u(rng);
    if (pick < 0.4)
      pts.emplace_back(16 * u(rng) - 8, 16 * u(rng) - 8, 0.0);
    else if (pick < 0.7)
      pts.emplace_back(8.0, 16 * u(rng) - 8, 3 * u(rng));
    else
      pts.emplace_back(16 * u(rng) - 8, -8.0, 3 * u(rng));
  }
  return pts;
}

}  // namespace

TEST_CASE("add_keyframe builds the constraint mesh from clouds") {
  std::mt19937_64 rng(41);
  const auto scene = box_scene(rng, 400);

  OdomConfig cfg;
  cfg.window_size = 3;
  WindowState win(cfg);

  // three keyframes seeing the same static scene from slightly shifted poses
  std::vector<Pose> poses;
  for (int i = 0; i < 3; ++i) {
    Pose p;
    p.t_stamp = i;
    p.trans = Vec3(0.4 * i, 0.1 * i, 0.0);
    p.rot = quat_from_euler_zyx(0.05 * i, 0, 0);
    poses.push_back(p);
  }
  for (int i = 0; i < 3; ++i) {
    std::vector<Vec3> body;
    const Pose inv = poses[static_cast<std::size_t>(i)].inverse();
    for (const Vec3& l : scene) body.push_back(inv.apply(l));
    Keyframe kf;
    kf.id = i;
    kf.pose = poses[static_cast<std::size_t>(i)];
    kf.raw_odom_pose = kf.pose;
    kf.imu_quat = kf.pose.rot;
    kf.cloud = build_gicp_cloud(body);
    const auto report = win.add_keyframe(std::move(kf));
    CHECK(report.edges_added == i);
    CHECK(report.align_failures == 0);
  }
  CHECK(win.edges().size() == 3);
  for (const auto& e : win.edges()) {
    const Pose expect = poses[static_cast<std::size_t>(e.from_id)].inverse().compose(
        poses[static_cast<std::size_t>(e.to_id)]);
    CHECK((e.rel.trans - expect.trans).norm() < 1e-3);
    CHECK(quat_distance(e.rel.rot, expect.rot) < deg2rad(0.1));
    CHECK(e.w_gicp > 0.0);
  }

  // a fourth keyframe triggers eviction at capacity 3
  {
    std::vector<Vec3> body;
    Pose p;
    p.t_stamp = 3;
    p.trans = Vec3(1.2, 0.3, 0.0);
    p.rot = quat_from_euler_zyx(0.15, 0, 0);
    const Pose inv = p.inverse();
    for (const Vec3& l : scene) body.push_back(inv.apply(l));
    Keyframe kf;
    kf.id = 3;
    kf.pose = p;
    kf.raw_odom_pose = p;
    kf.imu_quat = p.rot;
    kf.cloud = build_gicp_cloud(body);
    const auto report = win.add_keyframe(std::move(kf));
    CHECK(report.evicted);
  }
  CHECK(win.keyframes().size() == 3);
  CHECK(win.retired().size() == 1);
}

TEST_CASE("add_keyframe on an empty window stores zero edges") {
  std::mt19937_64 rng(43);
  const auto scene = box_scene(rng, 100);
  OdomConfig cfg;
  WindowState win(cfg);
  Keyframe kf;
  kf.id = 0;
  kf.cloud = build_gicp_cloud(scene);
  const auto report = win.add_keyframe(std::move(kf));
  CHECK(report.edges_added == 0);
  CHECK_FALSE(report.degenerate_window);
  CHECK(win.keyframes().size() == 1);
}
