#pragma once

// Generalized-ICP alignment of two radar clouds: plane-regularized per-point
// covariances, distribution-to-distribution cost, Gauss-Newton on SE(3) with
// step halving, and the fitness-derived constraint weight.

#include <optional>
#include <span>
#include <vector>

#include "radarodo/kdtree.hpp"

namespace radarodo {

struct GicpConfig {
  double max_corr_dist = 2.0;  // m
  int k_neighbors = 20;
  int max_iter = 50;
  double epsilon_cov = 1e-3;
  double fitness_threshold = 3.5;    // f_th, m^2
  double update_tolerance = 1e-6;    // convergence on |delta|
};

// Immutable cloud prepared for GICP: points, regularized covariances and a
// nearest-neighbor index. Shareable across concurrent alignments.
class GicpCloud {
 public:
  GicpCloud() = default;
  GicpCloud(std::vector<Vec3> points, std::vector<Mat3> covariances, int k_used)
      : index_(std::move(points)), covs_(std::move(covariances)), k_used_(k_used) {}

  const std::vector<Vec3>& points() const { return index_.points(); }
  const std::vector<Mat3>& covariances() const { return covs_; }
  const KdTree3& index() const { return index_; }
  int k_used() const { return k_used_; }
  std::size_t size() const { return index_.size(); }

 private:
  KdTree3 index_;
  std::vector<Mat3> covs_;
  int k_used_ = 0;
};

// Covariance of each point's k-nearest neighborhood, eigenvalues replaced by
// (epsilon_cov, 1, 1) along the original eigenvectors. k is clamped to
// size-1. Throws TooFewPoints below 10 points.
GicpCloud build_gicp_cloud(std::span<const Vec3> points, int k_neighbors = 20,
                           double epsilon_cov = 1e-3);

struct GicpResult {
  Pose transform;  // source -> target
  double fitness = 0.0;  // mean squared correspondence distance, m^2
  bool converged = false;
  int iterations = 0;
  bool cost_monotonic = true;  // accepted steps never increased the cost
};

// Aligns source onto target starting from guess. Correspondences are nearest
// neighbors within cfg.max_corr_dist. Throws NoCorrespondences when the guess
// produces zero pairs; non-convergence is reported through the flag.
GicpResult gicp_align(const GicpCloud& source, const GicpCloud& target,
                      const Pose& guess, const GicpConfig& cfg = {});

// w = 1/(2f + 1e-6), or nullopt when f exceeds the discard threshold.
std::optional<double> constraint_weight(double fitness, double fitness_threshold = 3.5);

}  // namespace radarodo
