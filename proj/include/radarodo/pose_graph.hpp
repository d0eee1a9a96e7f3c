#pragma once

// Sliding-window pose-graph odometry: pose propagation from ego-velocity and
// IMU orientation, keyframe gating, the all-pairs GICP constraint mesh, four
// residual types with analytic Jacobians, and Tukey-robustified
// Levenberg-Marquardt optimization on the SE(3) manifold.

#include <deque>
#include <span>
#include <vector>

#include "radarodo/ego_velocity.hpp"
#include "radarodo/geometry.hpp"
#include "radarodo/gicp.hpp"

namespace radarodo {

struct OdomConfig {
  double trans_threshold = 1.0;    // m, keyframe gate
  double rot_threshold_deg = 5.0;  // deg, keyframe gate
  int window_size = 10;
  Vec3 w_p = Vec3(0.1, 0.1, 0.1);
  Vec4 w_o = Vec4::Ones();
  double tukey_c = 4.685;
  int max_iterations = 100;
  double function_tolerance = 1e-6;
  double gradient_tolerance = 1e-10;
  double lambda_init = 1e-4;
  double lambda_max = 1e8;
  GicpConfig gicp;
};

// Initial pose estimate: body-frame translation v*dt composed with the
// IMU-derived rotation increment q_prev^-1 * q_curr.
Pose propagate_pose(const Pose& prev, const EgoVelocity& v_ego, const Quat& q_prev,
                    const Quat& q_curr, double dt);

// Advance yaw by trapezoidal integration of the body-z rate mapped through
// the sampled attitude; pitch and roll are taken from the last sample's
// fused orientation. Samples must be time-ordered.
Quat imu_yaw_update(const Quat& prev_quat, std::span<const ImuSample> samples);

// True when motion since the last keyframe exceeds either threshold.
bool keyframe_gate(const Pose& current, const Pose& last_kf, const OdomConfig& cfg);

struct Keyframe {
  int id = 0;
  Pose pose;           // optimization state, mutable while in the window
  GicpCloud cloud;     // body-frame filtered cloud
  Pose raw_odom_pose;  // direct-odometry pose at creation, never updated
  Quat imu_quat;       // fused attitude interpolated at the keyframe stamp
};

struct GicpConstraintEdge {
  int from_id = 0;  // pose a
  int to_id = 0;    // pose b, from_id < to_id
  Pose rel;         // frame b expressed in frame a (t_GICP, q_GICP)
  double w_gicp = 1.0;
  double fitness = 0.0;
};

// --- Residuals. Jacobians are with respect to the 6-vector tangent
// [dt(3), dtheta(3)] of each pose, update t += dt, q = q * exp(dtheta).

Vec3 residual_pos(const Pose& xa, const Pose& xb, const GicpConstraintEdge& edge,
                  const Vec3& w_p, Eigen::Matrix<double, 3, 6>* jac_a = nullptr,
                  Eigen::Matrix<double, 3, 6>* jac_b = nullptr);

Vec4 residual_ori(const Pose& xa, const Pose& xb, const GicpConstraintEdge& edge,
                  const Vec4& w_o, Eigen::Matrix<double, 4, 6>* jac_a = nullptr,
                  Eigen::Matrix<double, 4, 6>* jac_b = nullptr);

// Pitch/roll consistency with the IMU: both quaternions are rebuilt with yaw
// zeroed before the componentwise difference. Throws GimbalLock.
Vec4 residual_imu(const Pose& xa, const Quat& imu_quat, double w_imu,
                  Eigen::Matrix<double, 4, 6>* jac_a = nullptr);

// Vertical-dynamics consistency: z row of the mismatch between the
// raw-odometry relative translation and the estimated one.
double residual_dyn(const Pose& xa, const Pose& xb, const Pose& raw_a,
                    const Pose& raw_b, Eigen::Matrix<double, 1, 6>* jac_a = nullptr,
                    Eigen::Matrix<double, 1, 6>* jac_b = nullptr);

// w_imu = clamp(1/(W + 1e-6), 0.1, 10) with W the strongest incident GICP
// weight (0 when the keyframe has no surviving edges).
double adaptive_imu_weight(int kf_id, std::span<const GicpConstraintEdge> edges);

struct EdgeDiag {
  int from_id = 0, to_id = 0;
  double fitness = 0.0;
  double weight = 0.0;  // 0 when discarded
  bool kept = false;
  bool converged = false;
};

struct AddReport {
  int edges_added = 0;
  int edges_discarded = 0;  // fitness above threshold
  int align_failures = 0;   // alignment errors, skipped
  bool degenerate_window = false;  // no surviving edge; odometry-only linkage
  bool evicted = false;
  std::vector<EdgeDiag> edge_diags;
};

enum class SolveStatus {
  kTrivial,            // zero cost at entry, nothing to do
  kConverged,          // update norm below tolerance
  kFunctionTolerance,
  kGradientTolerance,
  kMaxIterations,
  kDiverged,           // lambda at ceiling, window left at last accepted state
};

struct SolveReport {
  SolveStatus status = SolveStatus::kTrivial;
  int iterations = 0;
  int accepted_steps = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool cost_monotonic = true;  // over accepted steps
};

// The sliding window itself. Owned by one optimizer stage; adds and solves
// are serialized. Retired poses are append-only.
class WindowState {
 public:
  explicit WindowState(OdomConfig cfg) : cfg_(std::move(cfg)) {}

  // Aligns the new keyframe's cloud against every cloud in the window,
  // stores surviving edges, evicts (and retires) the oldest keyframe when
  // the window would exceed its size. Alignment errors skip the edge, never
  // fail the add.
  AddReport add_keyframe(Keyframe kf);

  // Insertion with externally computed edges (no GICP). Same eviction rules.
  AddReport insert_keyframe(Keyframe kf, std::vector<GicpConstraintEdge> edges);

  // Tukey-robustified LM over the in-window poses; the oldest pose is held
  // fixed as the gauge anchor.
  SolveReport optimize();

  const std::deque<Keyframe>& keyframes() const { return keyframes_; }
  std::span<const GicpConstraintEdge> edges() const { return edges_; }
  const std::vector<Pose>& retired() const { return retired_; }

  // Move retired poses out for incremental writing.
  std::vector<Pose> drain_retired() {
    std::vector<Pose> out;
    out.swap(retired_);
    return out;
  }

  const OdomConfig& config() const { return cfg_; }

 private:
  AddReport finish_insert(Keyframe kf, std::vector<GicpConstraintEdge> new_edges,
                          AddReport report);

  OdomConfig cfg_;
  std::deque<Keyframe> keyframes_;
  std::vector<GicpConstraintEdge> edges_;
  std::vector<Pose> retired_;
};

}  // namespace radarodo
