#include "radarodo/gicp.hpp"

namespace radarodo {

GicpCloud build_gicp_cloud(std::span<const Vec3> points, int k_neighbors,
                           double epsilon_cov) {
  if (points.size() < 10)
    throw TooFewPoints("cloud has " + std::to_string(points.size()) +
                       " points, need at least 10");
  std::vector<Vec3> pts(points.begin(), points.end());
  KdTree3 tree(pts);

  const int k = std::min<int>(k_neighbors, static_cast<int>(points.size()) - 1);
  std::vector<Mat3> covs(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    // neighborhood includes the point itself
    const auto nn = tree.knn(pts[i], k + 1);
    Vec3 mean = Vec3::Zero();
    for (int j : nn) mean += tree.points()[static_cast<std::size_t>(j)];
    mean /= static_cast<double>(nn.size());
    Mat3 cov = Mat3::Zero();
    for (int j : nn) {
      const Vec3 d = tree.points()[static_cast<std::size_t>(j)] - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(nn.size());

    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);  // ascending eigenvalues
    const Mat3 basis = eig.eigenvectors();
    const Vec3 regularized(epsilon_cov, 1.0, 1.0);
    covs[i] = basis * regularized.asDiagonal() * basis.transpose();
  }
  return GicpCloud(std::move(pts), std::move(covs), k);
}

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

struct Correspondence {
  int src = 0, tgt = 0;
  double dist_sq = 0.0;
};

std::vector<Correspondence> match(const GicpCloud& source, const GicpCloud& target,
                                  const Pose& T, double max_corr_dist) {
  std::vector<Correspondence> pairs;
  pairs.reserve(source.size());
  const double max_d2 = max_corr_dist * max_corr_dist;
  for (std::size_t i = 0; i < source.size(); ++i) {
    double d2;
    const int j = target.index().nearest(T.apply(source.points()[i]), &d2);
    if (j >= 0 && d2 <= max_d2)
      pairs.push_back({static_cast<int>(i), j, d2});
  }
  return pairs;
}

double mahalanobis_cost(const GicpCloud& source, const GicpCloud& target,
                        const std::vector<Correspondence>& pairs,
                        const std::vector<Mat3>& metrics, const Pose& T) {
  double cost = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const Vec3 d = target.points()[static_cast<std::size_t>(pairs[k].tgt)] -
                   T.apply(source.points()[static_cast<std::size_t>(pairs[k].src)]);
    cost += d.dot(metrics[k] * d);
  }
  return cost;
}

}  // namespace

GicpResult gicp_align(const GicpCloud& source, const GicpCloud& target,
                      const Pose& guess, const GicpConfig& cfg) {
  GicpResult result;
  Pose T = guess;
  T.t_stamp = 0.0;

  std::vector<Mat3> metrics;
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    const auto pairs = match(source, target, T, cfg.max_corr_dist);
    if (pairs.empty()) {
      if (iter == 0)
        throw NoCorrespondences("no target point within " +
                                std::to_string(cfg.max_corr_dist) + " m of the guess");
      break;
    }

    // fixed metric for this iteration: M = (C_tgt + R C_src R^T)^-1
    const Mat3 R = T.rot.rotation_matrix();
    metrics.resize(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const Mat3 combined =
          target.covariances()[static_cast<std::size_t>(pairs[k].tgt)] +
          R * source.covariances()[static_cast<std::size_t>(pairs[k].src)] *
              R.transpose();
      metrics[k] = combined.inverse();
    }

    Eigen::Matrix<double, 6, 6> hessian = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> gradient = Eigen::Matrix<double, 6, 1>::Zero();
    double cost = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const Vec3 p_moved =
          T.apply(source.points()[static_cast<std::size_t>(pairs[k].src)]);
      const Vec3 d = target.points()[static_cast<std::size_t>(pairs[k].tgt)] - p_moved;
      Eigen::Matrix<double, 3, 6> jac;
      jac.leftCols<3>() = -Mat3::Identity();
      jac.rightCols<3>() = skew(p_moved);
      hessian += jac.transpose() * metrics[k] * jac;
      gradient += jac.transpose() * metrics[k] * d;
      cost += d.dot(metrics[k] * d);
    }

    Eigen::Matrix<double, 6, 1> delta =
        hessian.ldlt().solve(-gradient);
    if (!delta.allFinite()) {
      result.cost_monotonic = false;
      break;
    }

    // step halving against this iteration's fixed correspondences and metric
    Pose T_new;
    double new_cost = 0.0;
    bool accepted = false;
    for (int halving = 0; halving < 10; ++halving) {
      T_new.trans = quat_exp(delta.tail<3>()).rotate(T.trans) + delta.head<3>();
      T_new.rot = quat_exp(delta.tail<3>()) * T.rot;
      new_cost = mahalanobis_cost(source, target, pairs, metrics, T_new);
      if (new_cost <= cost + 1e-12) {
        accepted = true;
        break;
      }
      delta *= 0.5;
    }
    result.iterations = iter + 1;
    if (!accepted) break;  // cannot decrease further along this direction
    T = T_new;
    if (delta.norm() < cfg.update_tolerance) {
      result.converged = true;
      break;
    }
  }

  // fitness: plain mean squared Euclidean distance over final matches
  const auto final_pairs = match(source, target, T, cfg.max_corr_dist);
  if (final_pairs.empty()) {
    result.fitness = std::numeric_limits<double>::infinity();
  } else {
    double sum = 0.0;
    for (const auto& pr : final_pairs) sum += pr.dist_sq;
    result.fitness = sum / static_cast<double>(final_pairs.size());
  }
  result.transform = T;
  return result;
}

std::optional<double> constraint_weight(double fitness, double fitness_threshold) {
  if (!(fitness >= 0.0)) throw Error("fitness must be non-negative");
  if (fitness > fitness_threshold) return std::nullopt;
  return 1.0 / (2.0 * fitness + 1e-6);
}

}  // namespace radarodo
