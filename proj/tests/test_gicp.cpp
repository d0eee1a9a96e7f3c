#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "radarodo/gicp.hpp"
#include "test_util.hpp"

using namespace radarodo;

namespace {

// Structured test scene: ground patch plus two walls and some poles, the
// three surface orientations pin down all six degrees of freedom.
std::vector<Vec3> structured_scene(std::mt19937_64& rng, int n) {
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(n));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (static_cast<int>(pts.size()) < n) {
    const double pick = u(rng);
    if (pick < 0.4) {  // ground z = 0
      pts.emplace_back(20.0 * u(rng) - 10.0, 20.0 * u(rng) - 10.0, 0.0);
    } else if (pick < 0.65) {  // wall x = 10
      pts.emplace_back(10.0, 20.0 * u(rng) - 10.0, 4.0 * u(rng));
    } else if (pick < 0.9) {  // wall y = -10
      pts.emplace_back(20.0 * u(rng) - 10.0, -10.0, 4.0 * u(rng));
    } else {  // poles
      const double px = 16.0 * u(rng) - 8.0, py = 16.0 * u(rng) - 8.0;
      pts.emplace_back(px, py, 3.0 * u(rng));
    }
  }
  return pts;
}

std::vector<Vec3> transform_cloud(const std::vector<Vec3>& pts, const Pose& T) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const Vec3& p : pts) out.push_back(T.apply(p));
  return out;
}

}  // namespace

TEST_CASE("kdtree nearest matches brute force on 100 random points") {
  std::mt19937_64 rng(3);
  std::vector<Vec3> pts;
  for (int i = 0; i < 100; ++i) pts.push_back(testutil::random_vec3(rng, 10.0));
  KdTree3 tree(pts);
  for (int q = 0; q < 200; ++q) {
    const Vec3 query = testutil::random_vec3(rng, 12.0);
    int brute = -1;
    double brute_d2 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 100; ++i) {
      const double d2 = (pts[static_cast<std::size_t>(i)] - query).squaredNorm();
      if (d2 < brute_d2) {
        brute_d2 = d2;
        brute = i;
      }
    }
    double got_d2;
    CHECK(tree.nearest(query, &got_d2) == brute);
    CHECK(got_d2 == doctest::Approx(brute_d2).epsilon(1e-12));
  }
}

TEST_CASE("kdtree knn matches brute force ordering") {
  std::mt19937_64 rng(5);
  std::vector<Vec3> pts;
  for (int i = 0; i < 150; ++i) pts.push_back(testutil::random_vec3(rng, 8.0));
  KdTree3 tree(pts);
  for (int q = 0; q < 50; ++q) {
    const Vec3 query = testutil::random_vec3(rng, 8.0);
    const auto got = tree.knn(query, 7);
    std::vector<std::pair<double, int>> ranked;
    for (int i = 0; i < 150; ++i)
      ranked.emplace_back((pts[static_cast<std::size_t>(i)] - query).squaredNorm(), i);
    std::sort(ranked.begin(), ranked.end());
    REQUIRE(got.size() == 7);
    for (int k = 0; k < 7; ++k)
      CHECK(got[static_cast<std::size_t>(k)] == ranked[static_cast<std::size_t>(k)].second);
  }
}

TEST_CASE("covariances of a planar cloud are squashed along the normal") {
  std::mt19937_64 rng(7);
  std::vector<Vec3> pts;
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 30; ++i) pts.emplace_back(u(rng), u(rng), 0.0);
  const auto cloud = build_gicp_cloud(pts, 20);
  for (const Mat3& cov : cloud.covariances()) {
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 normal = eig.eigenvectors().col(0);
    CHECK(std::abs(std::abs(normal.z()) - 1.0) < 1e-3);
    CHECK(eig.eigenvalues()(0) == doctest::Approx(1e-3).epsilon(1e-6));
    CHECK(eig.eigenvalues()(2) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("neighborhood size clamps to cloud size minus one") {
  std::mt19937_64 rng(9);
  std::vector<Vec3> pts;
  for (int i = 0; i < 12; ++i) pts.push_back(testutil::random_vec3(rng, 3.0));
  const auto cloud = build_gicp_cloud(pts, 20);
  CHECK(cloud.k_used() == 11);

  std::vector<Vec3> tiny(pts.begin(), pts.begin() + 9);
  CHECK_THROWS_AS((void)build_gicp_cloud(tiny, 20), TooFewPoints);
}

TEST_CASE("gicp: self-alignment from identity is exact") {
  std::mt19937_64 rng(11);
  const auto pts = structured_scene(rng, 300);
  const auto cloud = build_gicp_cloud(pts);
  const auto res = gicp_align(cloud, cloud, Pose{});
  CHECK(res.transform.trans.norm() < 1e-9);
  CHECK(quat_distance(res.transform.rot, Quat::identity()) < 1e-9);
  CHECK(res.fitness < 1e-12);
  CHECK(res.cost_monotonic);
}

TEST_CASE("gicp: recovers a half-meter shift from identity guess") {
  std::mt19937_64 rng(13);
  const auto pts = structured_scene(rng, 500);
  const Pose shift{0.0, Vec3(0.5, 0, 0), Quat::identity()};
  const auto source = build_gicp_cloud(pts);
  const auto target = build_gicp_cloud(transform_cloud(pts, shift));
  const auto res = gicp_align(source, target, Pose{});
  CHECK((res.transform.trans - Vec3(0.5, 0, 0)).norm() < 1e-3);
  CHECK(res.transform.rot.angle() < deg2rad(0.1));
}

TEST_CASE("gicp: 10 deg yaw with noise from an 8 deg guess") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> noise(0.0, 0.02);
  double worst_rot = 0.0, worst_fitness = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto pts = structured_scene(rng, 500);
    const Pose T_true{0.0, Vec3::Zero(), quat_from_euler_zyx(deg2rad(10), 0, 0)};
    auto moved = transform_cloud(pts, T_true);
    for (Vec3& p : moved) p += Vec3(noise(rng), noise(rng), noise(rng));
    const auto source = build_gicp_cloud(pts);
    const auto target = build_gicp_cloud(moved);
    const Pose guess{0.0, Vec3::Zero(), quat_from_euler_zyx(deg2rad(8), 0, 0)};
    const auto res = gicp_align(source, target, guess);
    worst_rot = std::max(worst_rot,
                         quat_distance(res.transform.rot, T_true.rot));
    worst_fitness = std::max(worst_fitness, res.fitness);
    CHECK(res.cost_monotonic);
  }
  CHECK(worst_rot < deg2rad(0.5));
  CHECK(worst_fitness < 4e-3);
}

TEST_CASE("gicp: equivariance under a common pre-transform") {
  std::mt19937_64 rng(19);
  const auto pts = structured_scene(rng, 400);
  const Pose T_true{0.0, Vec3(0.3, -0.2, 0.05),
                    quat_from_euler_zyx(deg2rad(4), deg2rad(1), 0)};
  const auto source = build_gicp_cloud(pts);
  const auto target = build_gicp_cloud(transform_cloud(pts, T_true));
  const Pose guess{0.0, Vec3(0.25, -0.15, 0.0), quat_from_euler_zyx(deg2rad(3.5), 0, 0)};
  const auto base = gicp_align(source, target, guess);

  const Pose pre{0.0, Vec3(1.0, 2.0, 0.2), quat_from_euler_zyx(0.4, 0.02, -0.03)};
  // moving the source by pre^-1 and composing the guess accordingly must give
  // the composed result
  const auto source_moved = build_gicp_cloud(transform_cloud(pts, pre));
  const auto res = gicp_align(source_moved, target, guess.compose(pre.inverse()));
  const Pose recomposed = res.transform.compose(pre);
  CHECK((recomposed.trans - base.transform.trans).norm() < 1e-6);
  CHECK(quat_distance(recomposed.rot, base.transform.rot) < 1e-6);
}

TEST_CASE("gicp: zero pairs at the guess throws") {
  std::mt19937_64 rng(23);
  const auto pts = structured_scene(rng, 100);
  const auto cloud = build_gicp_cloud(pts);
  const Pose far{0.0, Vec3(1000, 0, 0), Quat::identity()};
  CHECK_THROWS_AS((void)gicp_align(cloud, cloud, far), NoCorrespondences);
}

TEST_CASE("constraint weight: threshold and epsilon floor") {
  const auto at_threshold = constraint_weight(3.5);
  REQUIRE(at_threshold.has_value());
  CHECK(*at_threshold == doctest::Approx(1.0 / 7.000001).epsilon(1e-12));

  CHECK_FALSE(constraint_weight(3.6).has_value());
  CHECK(*constraint_weight(0.0) == doctest::Approx(1e6).epsilon(1e-12));
}

TEST_CASE("constraint weight is strictly decreasing in fitness") {
  double prev = std::numeric_limits<double>::infinity();
  for (double f = 0.0; f <= 3.5; f += 0.01) {
    const auto w = constraint_weight(f);
    REQUIRE(w.has_value());
    CHECK(*w < prev);
    prev = *w;
  }
}
