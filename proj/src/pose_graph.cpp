#include "radarodo/pose_graph.hpp"

#include <algorithm>
#include <unordered_map>

namespace radarodo {

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

// Left/right Hamilton product matrices on raw (w,x,y,z) coefficient vectors.
// Bilinear in the coefficients, so they apply to non-canonical chains too.
Eigen::Matrix4d lmat(const Vec4& q) {
  Eigen::Matrix4d m;
  m << q(0), -q(1), -q(2), -q(3),
       q(1),  q(0), -q(3),  q(2),
       q(2),  q(3),  q(0), -q(1),
       q(3), -q(2),  q(1),  q(0);
  return m;
}

Eigen::Matrix4d rmat(const Vec4& q) {
  Eigen::Matrix4d m;
  m << q(0), -q(1), -q(2), -q(3),
       q(1),  q(0),  q(3), -q(2),
       q(2), -q(3),  q(0),  q(1),
       q(3),  q(2), -q(1),  q(0);
  return m;
}

// d vec(exp(delta))/d delta at delta = 0.
Eigen::Matrix<double, 4, 3> exp_jacobian() {
  Eigen::Matrix<double, 4, 3> e = Eigen::Matrix<double, 4, 3>::Zero();
  e.block<3, 3>(1, 0) = 0.5 * Mat3::Identity();
  return e;
}

}  // namespace

Pose propagate_pose(const Pose& prev, const EgoVelocity& v_ego, const Quat& q_prev,
                    const Quat& q_curr, double dt) {
  if (!(dt > 0.0)) throw Error("propagate_pose needs dt > 0");
  const Pose rel{prev.t_stamp + dt, v_ego.v * dt, q_prev.inverse() * q_curr};
  return prev.compose(rel);
}

Quat imu_yaw_update(const Quat& prev_quat, std::span<const ImuSample> samples) {
  if (samples.empty()) return prev_quat;
  const double yaw0 = yaw_of(prev_quat);

  // world yaw rate from the body-z rate through the sampled attitude
  const auto yaw_rate = [](const ImuSample& s) {
    const EulerZYX e = euler_zyx_from_quat(s.orientation);
    return s.ang_vel.z() * std::cos(e.roll) / std::cos(e.pitch);
  };

  double dpsi = 0.0;
  double prev_rate = yaw_rate(samples[0]);
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const double rate = yaw_rate(samples[i]);
    dpsi += 0.5 * (rate + prev_rate) * (samples[i].t_stamp - samples[i - 1].t_stamp);
    prev_rate = rate;
  }

  const EulerZYX last = euler_zyx_from_quat(samples.back().orientation);
  return quat_from_euler_zyx(yaw0 + dpsi, last.pitch, last.roll);
}

bool keyframe_gate(const Pose& current, const Pose& last_kf, const OdomConfig& cfg) {
  const double dist = (current.trans - last_kf.trans).norm();
  const double angle = quat_distance(current.rot, last_kf.rot);
  return dist >= cfg.trans_threshold || angle >= deg2rad(cfg.rot_threshold_deg);
}

Vec3 residual_pos(const Pose& xa, const Pose& xb, const GicpConstraintEdge& edge,
                  const Vec3& w_p, Eigen::Matrix<double, 3, 6>* jac_a,
                  Eigen::Matrix<double, 3, 6>* jac_b) {
  const Mat3 rat = xa.rot.rotation_matrix().transpose();
  const Vec3 rel_est = rat * (xb.trans - xa.trans);
  const Vec3 weights = w_p * edge.w_gicp;
  const Vec3 r = weights.cwiseProduct(edge.rel.trans - rel_est);
  if (jac_a) {
    jac_a->leftCols<3>() = weights.asDiagonal() * rat;
    jac_a->rightCols<3>() = -(weights.asDiagonal() * skew(rel_est));
  }
  if (jac_b) {
    jac_b->leftCols<3>() = -(weights.asDiagonal() * rat);
    jac_b->rightCols<3>().setZero();
  }
  return r;
}

Vec4 residual_ori(const Pose& xa, const Pose& xb, const GicpConstraintEdge& edge,
                  const Vec4& w_o, Eigen::Matrix<double, 4, 6>* jac_a,
                  Eigen::Matrix<double, 4, 6>* jac_b) {
  const Quat q_gicp_inv = edge.rel.rot.inverse();
  const Quat q_ainv_b = xa.rot.inverse() * xb.rot;
  const Vec4 q_err = lmat(q_gicp_inv.coeffs_wxyz()) * q_ainv_b.coeffs_wxyz();
  // hemisphere canonicalization before the componentwise subtraction
  const double sign = q_err(0) < 0.0 ? -1.0 : 1.0;
  const Vec4 weights = w_o * edge.w_gicp;
  const Vec4 identity(1, 0, 0, 0);
  const Vec4 r = weights.cwiseProduct(sign * q_err - identity);

  static const Eigen::Matrix<double, 4, 3> expj = exp_jacobian();
  if (jac_a) {
    jac_a->leftCols<3>().setZero();
    jac_a->rightCols<3>() =
        -sign * (weights.asDiagonal() *
                 (lmat(q_gicp_inv.coeffs_wxyz()) * rmat(q_ainv_b.coeffs_wxyz()) * expj));
  }
  if (jac_b) {
    jac_b->leftCols<3>().setZero();
    jac_b->rightCols<3>() = sign * (weights.asDiagonal() * (lmat(q_err) * expj));
  }
  return r;
}

Vec4 residual_imu(const Pose& xa, const Quat& imu_quat, double w_imu,
                  Eigen::Matrix<double, 4, 6>* jac_a) {
  const Quat q_imu_yf_inv = yaw_free(imu_quat).inverse();

  // yaw-free pose attitude built as Rz(-yaw) * q so the chain stays
  // differentiable through the yaw extraction
  const Vec4 c = xa.rot.coeffs_wxyz();
  const double g1 = 2.0 * (c(0) * c(3) + c(1) * c(2));
  const double g2 = 1.0 - 2.0 * (c(2) * c(2) + c(3) * c(3));
  const double psi = std::atan2(g1, g2);
  (void)euler_zyx_from_quat(xa.rot);  // gimbal guard, consistent with yaw_free

  const Vec4 qz(std::cos(-psi / 2), 0.0, 0.0, std::sin(-psi / 2));
  const Vec4 qa_yf = lmat(qz) * c;
  const Vec4 q_err = lmat(q_imu_yf_inv.coeffs_wxyz()) * qa_yf;
  const double sign = q_err(0) < 0.0 ? -1.0 : 1.0;
  const Vec4 identity(1, 0, 0, 0);
  const Vec4 r = w_imu * (sign * q_err - identity);

  if (jac_a) {
    static const Eigen::Matrix<double, 4, 3> expj = exp_jacobian();
    const Eigen::Matrix<double, 4, 3> dc = lmat(c) * expj;  // d vec(q_a) / d delta

    const double denom = g1 * g1 + g2 * g2;
    Eigen::RowVector4d dg1, dg2;
    dg1 << 2 * c(3), 2 * c(2), 2 * c(1), 2 * c(0);
    dg2 << 0, 0, -4 * c(2), -4 * c(3);
    const Eigen::RowVector4d dpsi_dc = (g2 * dg1 - g1 * dg2) / denom;
    const Eigen::RowVector3d dpsi = dpsi_dc * dc;

    const Vec4 dqz_dpsi(0.5 * std::sin(-psi / 2), 0.0, 0.0,
                        -0.5 * std::cos(-psi / 2));
    const Eigen::Matrix<double, 4, 3> dqa_yf = lmat(qz) * dc + (lmat(dqz_dpsi) * c) * dpsi;

    jac_a->leftCols<3>().setZero();
    jac_a->rightCols<3>() =
        sign * w_imu * (lmat(q_imu_yf_inv.coeffs_wxyz()) * dqa_yf);
  }
  return r;
}

double residual_dyn(const Pose& xa, const Pose& xb, const Pose& raw_a,
                    const Pose& raw_b, Eigen::Matrix<double, 1, 6>* jac_a,
                    Eigen::Matrix<double, 1, 6>* jac_b) {
  const Vec3 t_odom =
      raw_a.rot.rotation_matrix().transpose() * (raw_b.trans - raw_a.trans);
  const Mat3 rat = xa.rot.rotation_matrix().transpose();
  const Vec3 rel_est = rat * (xb.trans - xa.trans);
  const double r = t_odom.z() - rel_est.z();
  if (jac_a) {
    jac_a->leftCols<3>() = rat.row(2);
    jac_a->rightCols<3>() = -skew(rel_est).row(2);
  }
  if (jac_b) {
    jac_b->leftCols<3>() = -rat.row(2);
    jac_b->rightCols<3>().setZero();
  }
  return r;
}

double adaptive_imu_weight(int kf_id, std::span<const GicpConstraintEdge> edges) {
  double best = 0.0;
  for (const auto& e : edges)
    if (e.from_id == kf_id || e.to_id == kf_id) best = std::max(best, e.w_gicp);
  return std::clamp(1.0 / (best + 1e-6), 0.1, 10.0);
}

// ---------------------------------------------------------------------------
// Window maintenance

AddReport WindowState::add_keyframe(Keyframe kf) {
  AddReport report;
  std::vector<GicpConstraintEdge> new_edges;
  for (const Keyframe& other : keyframes_) {
    const Pose guess = other.pose.inverse().compose(kf.pose);
    EdgeDiag diag;
    diag.from_id = other.id;
    diag.to_id = kf.id;
    GicpResult res;
    try {
      res = gicp_align(kf.cloud, other.cloud, guess, cfg_.gicp);
    } catch (const Error&) {
      ++report.align_failures;
      diag.fitness = std::numeric_limits<double>::quiet_NaN();
      report.edge_diags.push_back(diag);
      continue;
    }
    diag.fitness = res.fitness;
    diag.converged = res.converged;
    const auto weight = constraint_weight(res.fitness, cfg_.gicp.fitness_threshold);
    if (weight) {
      diag.kept = true;
      diag.weight = *weight;
      new_edges.push_back({other.id, kf.id, res.transform, *weight, res.fitness});
    } else {
      ++report.edges_discarded;
    }
    report.edge_diags.push_back(diag);
  }
  return finish_insert(std::move(kf), std::move(new_edges), std::move(report));
}

AddReport WindowState::insert_keyframe(Keyframe kf,
                                       std::vector<GicpConstraintEdge> edges) {
  for (const auto& e : edges)
    if (e.from_id >= e.to_id || e.to_id != kf.id)
      throw Error("edge ids must satisfy from < to == new keyframe id");
  return finish_insert(std::move(kf), std::move(edges), AddReport{});
}

AddReport WindowState::finish_insert(Keyframe kf,
                                     std::vector<GicpConstraintEdge> new_edges,
                                     AddReport report) {
  if (!keyframes_.empty() && kf.id <= keyframes_.back().id)
    throw Error("keyframe ids must be strictly increasing");

  report.degenerate_window = !keyframes_.empty() && new_edges.empty();
  report.edges_added = static_cast<int>(new_edges.size());

  keyframes_.push_back(std::move(kf));
  edges_.insert(edges_.end(), new_edges.begin(), new_edges.end());

  if (static_cast<int>(keyframes_.size()) > cfg_.window_size) {
    const int evicted_id = keyframes_.front().id;
    retired_.push_back(keyframes_.front().pose);
    keyframes_.pop_front();
    std::erase_if(edges_, [evicted_id](const GicpConstraintEdge& e) {
      return e.from_id == evicted_id || e.to_id == evicted_id;
    });
    report.evicted = true;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Tukey-robustified Levenberg-Marquardt on the window

namespace {

enum class BlockType : int { kPos = 0, kOri = 1, kImu = 2, kDyn = 3 };
constexpr int kNumBlockTypes = 4;

struct Block {
  BlockType type;
  int a = -1, b = -1;  // window indices; b unused for imu blocks
  const GicpConstraintEdge* edge = nullptr;
  double w_imu = 0.0;
  int dim = 0;
};

struct BlockEval {
  Eigen::Matrix<double, 4, 1> r = Eigen::Matrix<double, 4, 1>::Zero();
  Eigen::Matrix<double, 4, 6> ja = Eigen::Matrix<double, 4, 6>::Zero();
  Eigen::Matrix<double, 4, 6> jb = Eigen::Matrix<double, 4, 6>::Zero();
};

void evaluate_block(const Block& blk, const std::vector<Pose>& poses,
                    const std::deque<Keyframe>& kfs, const OdomConfig& cfg,
                    bool want_jac, BlockEval& out) {
  Eigen::Matrix<double, 3, 6> j3a, j3b;
  Eigen::Matrix<double, 4, 6> j4a, j4b;
  Eigen::Matrix<double, 1, 6> j1a, j1b;
  switch (blk.type) {
    case BlockType::kPos: {
      const Vec3 r = residual_pos(poses[static_cast<std::size_t>(blk.a)],
                                  poses[static_cast<std::size_t>(blk.b)], *blk.edge,
                                  cfg.w_p, want_jac ? &j3a : nullptr,
                                  want_jac ? &j3b : nullptr);
      out.r.head<3>() = r;
      if (want_jac) {
        out.ja.topRows<3>() = j3a;
        out.jb.topRows<3>() = j3b;
      }
      break;
    }
    case BlockType::kOri: {
      out.r = residual_ori(poses[static_cast<std::size_t>(blk.a)],
                           poses[static_cast<std::size_t>(blk.b)], *blk.edge, cfg.w_o,
                           want_jac ? &j4a : nullptr, want_jac ? &j4b : nullptr);
      if (want_jac) {
        out.ja = j4a;
        out.jb = j4b;
      }
      break;
    }
    case BlockType::kImu: {
      out.r = residual_imu(poses[static_cast<std::size_t>(blk.a)],
                           kfs[static_cast<std::size_t>(blk.a)].imu_quat, blk.w_imu,
                           want_jac ? &j4a : nullptr);
      if (want_jac) out.ja = j4a;
      break;
    }
    case BlockType::kDyn: {
      const double r = residual_dyn(
          poses[static_cast<std::size_t>(blk.a)], poses[static_cast<std::size_t>(blk.b)],
          kfs[static_cast<std::size_t>(blk.a)].raw_odom_pose,
          kfs[static_cast<std::size_t>(blk.b)].raw_odom_pose,
          want_jac ? &j1a : nullptr, want_jac ? &j1b : nullptr);
      out.r(0) = r;
      if (want_jac) {
        out.ja.topRows<1>() = j1a;
        out.jb.topRows<1>() = j1b;
      }
      break;
    }
  }
}

// Tukey biweight on sigma-normalized block norms.
struct TukeyScale {
  double c_sigma[kNumBlockTypes] = {1, 1, 1, 1};

  double rho(double u, BlockType t) const {
    const double cs = c_sigma[static_cast<int>(t)];
    if (u >= cs) return cs * cs / 6.0;
    const double q = 1.0 - (u / cs) * (u / cs);
    return cs * cs / 6.0 * (1.0 - q * q * q);
  }
  double weight(double u, BlockType t) const {
    const double cs = c_sigma[static_cast<int>(t)];
    if (u >= cs) return 0.0;
    const double q = 1.0 - (u / cs) * (u / cs);
    return q * q;
  }
};

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// Robust scale of a set of residual-block norms: MAD around the median of
// the live blocks. Blocks that are already at numerical zero (converged in a
// previous solve) say nothing about the working scale and would otherwise
// drag sigma down until every active block saturates the kernel.
double robust_sigma(const std::vector<double>& norms) {
  const double max_u = norms.empty() ? 0.0 : *std::max_element(norms.begin(), norms.end());
  std::vector<double> live;
  for (const double u : norms)
    if (u > std::max(1e-12, 1e-6 * max_u)) live.push_back(u);
  if (live.empty()) return std::max(1e-9, max_u);
  const double med = median_of(live);
  std::vector<double> dev(live.size());
  for (std::size_t i = 0; i < live.size(); ++i) dev[i] = std::abs(live[i] - med);
  const double mad = median_of(std::move(dev));
  return std::max({1.4826 * mad, 0.3 * med, 1e-6 * max_u, 1e-9});
}

}  // namespace

SolveReport WindowState::optimize() {
  SolveReport report;
  const int m = static_cast<int>(keyframes_.size());
  if (m < 2) return report;

  // residual blocks
  std::vector<Block> blocks;
  std::unordered_map<int, int> window_index;
  for (int i = 0; i < m; ++i)
    window_index[keyframes_[static_cast<std::size_t>(i)].id] = i;
  for (const auto& e : edges_) {
    const int a = window_index.at(e.from_id);
    const int b = window_index.at(e.to_id);
    blocks.push_back({BlockType::kPos, a, b, &e, 0.0, 3});
    blocks.push_back({BlockType::kOri, a, b, &e, 0.0, 4});
  }
  for (int i = 0; i < m; ++i) {
    const double w_imu =
        adaptive_imu_weight(keyframes_[static_cast<std::size_t>(i)].id, edges_);
    blocks.push_back({BlockType::kImu, i, -1, nullptr, w_imu, 4});
  }
  for (int i = 0; i + 1 < m; ++i)
    blocks.push_back({BlockType::kDyn, i, i + 1, nullptr, 0.0, 1});

  std::vector<Pose> current;
  current.reserve(static_cast<std::size_t>(m));
  for (const auto& kf : keyframes_) current.push_back(kf.pose);

  std::vector<BlockEval> evals(blocks.size());
  const auto block_norms = [&](const std::vector<Pose>& poses, bool want_jac,
                               std::vector<double>& norms) {
    norms.resize(blocks.size());
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      evaluate_block(blocks[k], poses, keyframes_, cfg_, want_jac, evals[k]);
      norms[k] = evals[k].r.head(blocks[k].dim).norm();
    }
  };

  // freeze the robust scale per block type from the entry residuals
  std::vector<double> norms;
  block_norms(current, false, norms);
  TukeyScale scale;
  for (int t = 0; t < kNumBlockTypes; ++t) {
    std::vector<double> of_type;
    for (std::size_t k = 0; k < blocks.size(); ++k)
      if (static_cast<int>(blocks[k].type) == t) of_type.push_back(norms[k]);
    scale.c_sigma[t] = cfg_.tukey_c * robust_sigma(of_type);
  }

  const auto robust_cost = [&](const std::vector<double>& ns) {
    double cost = 0.0;
    for (std::size_t k = 0; k < blocks.size(); ++k)
      cost += scale.rho(ns[k], blocks[k].type);
    return cost;
  };

  double cost = robust_cost(norms);
  report.initial_cost = cost;
  report.final_cost = cost;
  if (cost < 1e-30) return report;  // already a fixed point, no writes

  const int free_params = 6 * (m - 1);  // pose 0 anchors the gauge
  const auto param_offset = [](int pose_idx) { return 6 * (pose_idx - 1); };

  double lambda = cfg_.lambda_init;
  std::vector<Pose> candidate(current.size());
  std::vector<double> cand_norms;
  bool diverged = false;

  for (int iter = 0; iter < cfg_.max_iterations && !diverged; ++iter) {
    report.iterations = iter + 1;
    block_norms(current, true, norms);
    cost = robust_cost(norms);
    // numerically zero relative to where the solve started
    if (cost <= 1e-16 * (report.initial_cost + 1.0)) {
      report.status = SolveStatus::kFunctionTolerance;
      break;
    }

    Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(free_params, free_params);
    Eigen::VectorXd gradient = Eigen::VectorXd::Zero(free_params);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      const Block& blk = blocks[k];
      const double w = scale.weight(norms[k], blk.type);
      if (w == 0.0) continue;
      const auto r = evals[k].r.head(blk.dim);
      const auto add_pose = [&](int pose_idx, const auto& jac_full) {
        if (pose_idx <= 0) return;  // gauge anchor
        const auto jac = jac_full.topRows(blk.dim);
        const int off = param_offset(pose_idx);
        gradient.segment<6>(off) += w * jac.transpose() * r;
        hessian.block<6, 6>(off, off) += w * jac.transpose() * jac;
      };
      add_pose(blk.a, evals[k].ja);
      if (blk.b >= 0) add_pose(blk.b, evals[k].jb);
      if (blk.a > 0 && blk.b > 0) {
        const auto ja = evals[k].ja.topRows(blk.dim);
        const auto jb = evals[k].jb.topRows(blk.dim);
        const Eigen::Matrix<double, 6, 6> cross = w * ja.transpose() * jb;
        hessian.block<6, 6>(param_offset(blk.a), param_offset(blk.b)) += cross;
        hessian.block<6, 6>(param_offset(blk.b), param_offset(blk.a)) +=
            cross.transpose();
      }
    }

    if (gradient.lpNorm<Eigen::Infinity>() < cfg_.gradient_tolerance) {
      report.status = SolveStatus::kGradientTolerance;
      break;
    }

    // Jacobi scaling: the GICP weights span many orders of magnitude and
    // would otherwise sink the factorization's accuracy
    const double max_diag = std::max(hessian.diagonal().maxCoeff(), 1e-300);
    Eigen::VectorXd scaling(free_params);
    for (int i = 0; i < free_params; ++i)
      scaling(i) = 1.0 / std::sqrt(std::max(hessian.diagonal()(i), 1e-12 * max_diag));
    const Eigen::MatrixXd scaled_h =
        scaling.asDiagonal() * hessian * scaling.asDiagonal();
    const Eigen::VectorXd scaled_g = scaling.asDiagonal() * gradient;

    // LM inner loop: grow lambda until a step decreases the robust cost
    bool accepted = false;
    int rejections = 0;
    while (!accepted) {
      Eigen::MatrixXd damped = scaled_h;
      damped.diagonal() += lambda * (scaled_h.diagonal() + Eigen::VectorXd::Constant(
                                                               free_params, 1e-12));
      const Eigen::VectorXd delta =
          scaling.asDiagonal() * damped.ldlt().solve(-scaled_g);

      double new_cost = std::numeric_limits<double>::infinity();
      if (delta.allFinite()) {
        candidate = current;
        for (int p = 1; p < m; ++p) {
          const int off = param_offset(p);
          candidate[static_cast<std::size_t>(p)].trans += delta.segment<3>(off);
          candidate[static_cast<std::size_t>(p)].rot = quat_boxplus(
              candidate[static_cast<std::size_t>(p)].rot, delta.segment<3>(off + 3));
        }
        try {
          block_norms(candidate, false, cand_norms);
          new_cost = robust_cost(cand_norms);
        } catch (const Error&) {
          new_cost = std::numeric_limits<double>::infinity();  // reject
        }
      }

      if (new_cost <= cost) {
        accepted = true;
        current = candidate;
        ++report.accepted_steps;
        lambda = std::max(lambda / 10.0, 1e-12);
        const double decrease = cost - new_cost;
        cost = new_cost;
        // a tiny decrease only means convergence when the step was not
        // throttled by a freshly inflated lambda
        if (rejections == 0 &&
            decrease <= cfg_.function_tolerance * std::max(cost, 1e-30)) {
          report.status = SolveStatus::kFunctionTolerance;
          report.final_cost = cost;
          goto done;
        }
      } else {
        // a sub-rounding increase means the cost is at its numerical floor
        if (new_cost - cost <= 1e-12 * std::max(cost, 1e-30)) {
          report.status = SolveStatus::kFunctionTolerance;
          goto done;
        }
        ++rejections;
        lambda *= 10.0;
        if (lambda > cfg_.lambda_max) {
          report.status = SolveStatus::kDiverged;
          diverged = true;
          break;
        }
      }
    }
    if (report.iterations == cfg_.max_iterations && !diverged)
      report.status = SolveStatus::kMaxIterations;
  }

done:
  report.final_cost = cost;
  for (int i = 0; i < m; ++i)
    keyframes_[static_cast<std::size_t>(i)].pose = current[static_cast<std::size_t>(i)];
  return report;
}

}  // namespace radarodo
