#include "radarodo/evaluation.hpp"

#include <algorithm>

namespace radarodo {

Trajectory make_trajectory(std::vector<Pose> poses) {
  if (poses.size() < 2) throw TooShort("trajectory needs at least 2 poses");
  for (std::size_t i = 1; i < poses.size(); ++i)
    if (poses[i].t_stamp <= poses[i - 1].t_stamp)
      throw ParseError("trajectory timestamps not monotonic", i + 1);
  return Trajectory{std::move(poses)};
}

std::vector<PosePair> associate(const Trajectory& est, const Trajectory& gt,
                                double max_dt) {
  struct Candidate {
    double dt;
    std::size_t ei, gi;
  };
  std::vector<Candidate> candidates;
  for (std::size_t ei = 0; ei < est.poses.size(); ++ei) {
    const double t = est.poses[ei].t_stamp;
    const auto lo = std::lower_bound(
        gt.poses.begin(), gt.poses.end(), t - max_dt,
        [](const Pose& p, double v) { return p.t_stamp < v; });
    for (auto it = lo; it != gt.poses.end() && it->t_stamp <= t + max_dt; ++it)
      candidates.push_back(
          {std::abs(it->t_stamp - t), ei,
           static_cast<std::size_t>(std::distance(gt.poses.begin(), it))});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.dt != b.dt) return a.dt < b.dt;
    if (a.ei != b.ei) return a.ei < b.ei;
    return a.gi < b.gi;
  });

  std::vector<bool> est_used(est.poses.size(), false), gt_used(gt.poses.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  for (const auto& c : candidates) {
    if (est_used[c.ei] || gt_used[c.gi]) continue;
    est_used[c.ei] = true;
    gt_used[c.gi] = true;
    matches.emplace_back(c.ei, c.gi);
  }
  if (matches.empty())
    throw NoOverlap("no estimate/ground-truth stamps within " + std::to_string(max_dt) +
                    " s of each other");
  std::sort(matches.begin(), matches.end());

  std::vector<PosePair> pairs;
  pairs.reserve(matches.size());
  for (const auto& [ei, gi] : matches) pairs.push_back({est.poses[ei], gt.poses[gi]});
  return pairs;
}

Pose align_se3(std::span<const PosePair> pairs) {
  if (pairs.size() < 3) throw DegenerateAlignment("need at least 3 pose pairs");
  Vec3 mean_est = Vec3::Zero(), mean_gt = Vec3::Zero();
  for (const auto& p : pairs) {
    mean_est += p.est.trans;
    mean_gt += p.gt.trans;
  }
  mean_est /= static_cast<double>(pairs.size());
  mean_gt /= static_cast<double>(pairs.size());

  Mat3 cross = Mat3::Zero();
  for (const auto& p : pairs)
    cross += (p.est.trans - mean_est) * (p.gt.trans - mean_gt).transpose();
  const Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(1) < 1e-9 * std::max(1.0, svd.singularValues()(0)))
    throw DegenerateAlignment("positions are collinear");
  Mat3 flip = Mat3::Identity();
  flip(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
  const Mat3 rot = svd.matrixV() * flip * svd.matrixU().transpose();

  Eigen::Quaterniond eq(rot);
  Pose T;
  T.rot = Quat(eq.w(), eq.x(), eq.y(), eq.z());
  T.trans = mean_gt - rot * mean_est;
  return T;
}

AbsoluteErrors absolute_errors(std::span<const PosePair> pairs,
                               const std::optional<Pose>& alignment) {
  if (pairs.empty()) throw TooShort("no pose pairs");
  AbsoluteErrors out;
  double sq = 0.0;
  Vec3 axis_sq = Vec3::Zero();
  for (const auto& p : pairs) {
    const Vec3 mapped = alignment ? alignment->apply(p.est.trans) : p.est.trans;
    const Vec3 e = p.gt.trans - mapped;
    sq += e.squaredNorm();
    axis_sq += e.cwiseProduct(e);
  }
  const double n = static_cast<double>(pairs.size());
  out.t_abs = std::sqrt(sq / n);
  out.x = std::sqrt(axis_sq.x() / n);
  out.y = std::sqrt(axis_sq.y() / n);
  out.z = std::sqrt(axis_sq.z() / n);
  return out;
}

RelativeErrors relative_errors(std::span<const PosePair> pairs,
                               std::span<const double> lengths) {
  if (pairs.size() < 2) throw TooShort("need at least 2 pose pairs");
  std::vector<double> arc(pairs.size(), 0.0);
  for (std::size_t i = 1; i < pairs.size(); ++i)
    arc[i] = arc[i - 1] + (pairs[i].gt.trans - pairs[i - 1].gt.trans).norm();

  const double max_len = *std::max_element(lengths.begin(), lengths.end());
  if (arc.back() < max_len)
    throw TooShort("trajectory covers " + std::to_string(arc.back()) +
                   " m, need " + std::to_string(max_len) + " m");

  RelativeErrors out;
  double t_sum = 0.0, r_sum = 0.0;
  for (const double length : lengths) {
    double t_sq = 0.0, r_sq = 0.0;
    int count = 0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (j < i) j = i;
      while (j < pairs.size() && arc[j] - arc[i] < length) ++j;
      if (j >= pairs.size()) break;
      const Pose d_gt = pairs[i].gt.inverse().compose(pairs[j].gt);
      const Pose d_est = pairs[i].est.inverse().compose(pairs[j].est);
      const Pose err = d_gt.inverse().compose(d_est);
      t_sq += err.trans.squaredNorm();
      const double ang = rad2deg(err.rot.angle());
      r_sq += ang * ang;
      ++count;
    }
    RelativeErrors::PerLength pl;
    pl.length = length;
    pl.samples = count;
    if (count > 0) {
      pl.t_rel_pct = std::sqrt(t_sq / count) / length * 100.0;
      pl.r_rel_deg_per_m = std::sqrt(r_sq / count) / length;
    }
    t_sum += pl.t_rel_pct;
    r_sum += pl.r_rel_deg_per_m;
    out.per_length.push_back(pl);
  }
  out.t_rel_pct = t_sum / static_cast<double>(lengths.size());
  out.r_rel_deg_per_m = r_sum / static_cast<double>(lengths.size());
  return out;
}

}  // namespace radarodo
