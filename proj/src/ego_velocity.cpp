#include "radarodo/ego_velocity.hpp"

#include <random>

namespace radarodo {

MotionModel make_motion_model(MotionModelKind kind, const Quat& q_prev,
                              const Quat& q_curr) {
  const EulerZYX inc = euler_zyx_from_quat(q_prev.inverse() * q_curr);
  MotionModel m;
  m.kind = kind;
  m.pitch_inc = inc.pitch;
  m.roll_inc = inc.roll;
  m.yaw_inc = inc.yaw;
  return m;
}

DopplerSystem doppler_rows(const RadarScan& scan) {
  if (scan.points.empty()) throw DegenerateScan("scan holds no usable points");
  DopplerSystem sys;
  sys.rays.resize(static_cast<Eigen::Index>(scan.points.size()), 3);
  sys.doppler.resize(static_cast<Eigen::Index>(scan.points.size()));
  for (Eigen::Index i = 0; i < sys.doppler.size(); ++i) {
    const RadarPoint& p = scan.points[static_cast<std::size_t>(i)];
    const double r = p.pos.norm();
    if (!(r > 0.0)) throw DegenerateScan("zero-range point in scan");
    sys.rays.row(i) = (p.pos / r).transpose();
    sys.doppler(i) = p.doppler;
  }
  return sys;
}

Vec3 solve_unconstrained(const Eigen::MatrixX3d& rays, const Eigen::VectorXd& rhs) {
  if (rays.rows() < 3) throw RankDeficient("need at least 3 rays");
  const Mat3 ata = rays.transpose() * rays;
  Eigen::SelfAdjointEigenSolver<Mat3> eig(ata);
  const double sv_min = std::sqrt(std::max(0.0, eig.eigenvalues()(0)));
  if (sv_min <= 1e-6)
    throw RankDeficient("ray directions near-coplanar (sigma_min = " +
                        std::to_string(sv_min) + ")");
  const Vec3 atb = rays.transpose() * rhs;
  const Eigen::LDLT<Mat3> ldlt(ata);
  if (ldlt.info() == Eigen::Success) {
    const Vec3 v = ldlt.solve(atb);
    if (v.allFinite()) return v;
  }
  // ill-conditioned normal equations: fall back to SVD of the row matrix
  return rays.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
}

EgoVelocity solve_holonomic(const Eigen::MatrixX3d& rays, const Eigen::VectorXd& rhs,
                            double pitch_inc, double roll_inc) {
  if (rays.rows() < 2) throw RankDeficient("need at least 2 rays");
  const double ct = std::cos(pitch_inc), st = std::sin(pitch_inc);
  const double cp = std::cos(roll_inc), sp = std::sin(roll_inc);

  Eigen::MatrixX2d reduced(rays.rows(), 2);
  reduced.col(0) = rays.col(0) * ct + rays.col(2) * st;
  reduced.col(1) = rays.col(1) * cp + rays.col(2) * sp;

  const Eigen::JacobiSVD<Eigen::MatrixX2d> svd(
      reduced, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double sv_max = svd.singularValues()(0);
  const double sv_min = svd.singularValues()(1);
  if (!(sv_min > 0.0) || sv_max / sv_min > 1e8)
    throw RankDeficient("reduced holonomic design matrix is ill-conditioned");
  const Eigen::Vector2d planar = svd.solve(rhs);

  EgoVelocity out;
  out.v = Vec3(ct * planar(0), cp * planar(1), st * planar(0) + sp * planar(1));
  out.inlier_count = static_cast<int>(rays.rows());
  out.inlier_ratio = 1.0;
  out.residual_rms = std::sqrt((rays * out.v - rhs).squaredNorm() / rays.rows());
  return out;
}

EgoVelocity solve_nonholonomic(const Eigen::MatrixX3d& rays,
                               const Eigen::VectorXd& rhs, double pitch_inc,
                               double yaw_inc) {
  if (rays.rows() < 1) throw RankDeficient("need at least 1 ray");
  const double ct = std::cos(pitch_inc), st = std::sin(pitch_inc);
  const Vec3 dir(ct * std::cos(yaw_inc), ct * std::sin(yaw_inc), st);

  const Eigen::VectorXd a = rays * dir;
  const double aa = a.squaredNorm();
  if (std::sqrt(aa) < 1e-9)
    throw DegenerateDirection("all rays orthogonal to the motion direction");
  const double speed = a.dot(rhs) / aa;

  EgoVelocity out;
  out.v = speed * dir;
  out.inlier_count = static_cast<int>(rays.rows());
  out.inlier_ratio = 1.0;
  out.residual_rms = std::sqrt((a * speed - rhs).squaredNorm() / rays.rows());
  return out;
}

namespace {

int minimal_sample_size(MotionModelKind kind) {
  switch (kind) {
    case MotionModelKind::kUnconstrained: return 3;
    case MotionModelKind::kHolonomic: return 2;
    case MotionModelKind::kNonHolonomic: return 1;
  }
  return 3;
}

Vec3 fit_model(const MotionModel& model, const Eigen::MatrixX3d& rays,
               const Eigen::VectorXd& rhs) {
  switch (model.kind) {
    case MotionModelKind::kUnconstrained:
      return solve_unconstrained(rays, rhs);
    case MotionModelKind::kHolonomic:
      return solve_holonomic(rays, rhs, model.pitch_inc, model.roll_inc).v;
    case MotionModelKind::kNonHolonomic:
      return solve_nonholonomic(rays, rhs, model.pitch_inc, model.yaw_inc).v;
  }
  throw Error("unreachable");
}

void gather(const Eigen::MatrixX3d& rays, const Eigen::VectorXd& rhs,
            const std::vector<int>& idx, Eigen::MatrixX3d& rays_out,
            Eigen::VectorXd& rhs_out) {
  rays_out.resize(static_cast<Eigen::Index>(idx.size()), 3);
  rhs_out.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    rays_out.row(static_cast<Eigen::Index>(k)) = rays.row(idx[k]);
    rhs_out(static_cast<Eigen::Index>(k)) = rhs(idx[k]);
  }
}

}  // namespace

RansacResult ransac_estimate(const RadarScan& scan, const MotionModel& model,
                             const RansacConfig& cfg) {
  const DopplerSystem sys = doppler_rows(scan);
  // Sensor Doppler is receding-positive; the projection model wants the
  // projection of the vehicle velocity onto the ray, which has the opposite
  // sign for static targets.
  const Eigen::VectorXd rhs = -sys.doppler;
  const int n = static_cast<int>(rhs.size());
  const int k = minimal_sample_size(model.kind);
  if (n < k)
    throw DegenerateScan("scan smaller than the minimal sample (" +
                         std::to_string(n) + " < " + std::to_string(k) + ")");

  const auto finish = [&](const std::vector<int>& support) {
    Eigen::MatrixX3d rays_in;
    Eigen::VectorXd rhs_in;
    gather(sys.rays, rhs, support, rays_in, rhs_in);
    EgoVelocity est;
    est.v = fit_model(model, rays_in, rhs_in);
    est.inlier_count = static_cast<int>(support.size());
    est.inlier_ratio = static_cast<double>(support.size()) / n;
    est.residual_rms =
        std::sqrt((rays_in * est.v - rhs_in).squaredNorm() / rays_in.rows());
    RansacResult out;
    out.velocity = est;
    out.inlier_mask.assign(static_cast<std::size_t>(n), false);
    for (int i : support) out.inlier_mask[static_cast<std::size_t>(i)] = true;
    return out;
  };

  if (!cfg.enabled) {
    std::vector<int> all(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    return finish(all);
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<int> best_support;
  Eigen::MatrixX3d sample_rays(k, 3);
  Eigen::VectorXd sample_rhs(k);
  std::vector<int> sample(static_cast<std::size_t>(k));

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    // distinct random indices
    for (int s = 0; s < k; ++s) {
      int idx;
      bool dup;
      do {
        idx = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
        dup = false;
        for (int t = 0; t < s; ++t) dup |= (sample[static_cast<std::size_t>(t)] == idx);
      } while (dup);
      sample[static_cast<std::size_t>(s)] = idx;
      sample_rays.row(s) = sys.rays.row(idx);
      sample_rhs(s) = rhs(idx);
    }

    Vec3 hyp;
    try {
      hyp = fit_model(model, sample_rays, sample_rhs);
    } catch (const Error&) {
      continue;  // degenerate sample
    }

    std::vector<int> support;
    support.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double resid = sys.rays.row(i).dot(hyp) - rhs(i);
      if (std::abs(resid) < cfg.inlier_threshold) support.push_back(i);
    }
    if (support.size() > best_support.size()) best_support = std::move(support);
  }

  if (static_cast<double>(best_support.size()) / n < cfg.min_inlier_ratio)
    throw NoConsensus("best inlier ratio " +
                      std::to_string(static_cast<double>(best_support.size()) / n) +
                      " below " + std::to_string(cfg.min_inlier_ratio));
  return finish(best_support);
}

}  // namespace radarodo
