#include "radarodo/pipeline.hpp"

#include <json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <mutex>
#include <thread>

#include "radarodo/scan_io.hpp"

namespace radarodo {

namespace {

using nlohmann::json;

template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(T item) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) return;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
  }

  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::mutex mutex_;
  std::condition_variable not_full_, not_empty_;
  std::deque<T> items_;
  std::size_t capacity_;
  bool closed_ = false;
};

// Sliding IMU buffer over the streaming CSV reader; old samples are dropped
// once the consumer is past them.
class ImuWindow {
 public:
  explicit ImuWindow(const std::string& path) : reader_(path) {}

  Quat orientation_at(double t) {
    ensure_until(t);
    if (buf_.empty() || t < buf_.front().t_stamp || t > buf_.back().t_stamp)
      throw OutOfRange("IMU stream does not cover scan time " + std::to_string(t));
    const auto hi = std::lower_bound(
        buf_.begin(), buf_.end(), t,
        [](const ImuSample& s, double tt) { return s.t_stamp < tt; });
    if (hi->t_stamp == t) return hi->orientation;
    const auto lo = hi - 1;
    const double u = (t - lo->t_stamp) / (hi->t_stamp - lo->t_stamp);
    return slerp(lo->orientation, hi->orientation, u);
  }

  // Samples with t0 <= t_stamp <= t1.
  std::vector<ImuSample> segment(double t0, double t1) {
    ensure_until(t1);
    std::vector<ImuSample> out;
    for (const auto& s : buf_)
      if (s.t_stamp >= t0 - 1e-12 && s.t_stamp <= t1 + 1e-12) out.push_back(s);
    return out;
  }

  void drop_before(double t) {
    while (buf_.size() > 2 && buf_[1].t_stamp < t) buf_.pop_front();
  }

 private:
  void ensure_until(double t) {
    while (!eof_ && (buf_.empty() || buf_.back().t_stamp < t)) {
      auto s = reader_.next();
      if (!s) {
        eof_ = true;
        break;
      }
      buf_.push_back(*s);
    }
  }

  ImuCsvReader reader_;
  std::deque<ImuSample> buf_;
  bool eof_ = false;
};

struct StageMsg {
  double t = 0.0;
  double dt = 0.0;  // since the previous scan, 0 for the first
  std::vector<Vec3> cloud;  // filtered + voxel-downsampled, body frame
  EgoVelocity ego;
  bool ego_ok = false;
  double ego_residual = 0.0;
  Quat fused_att;
  std::vector<ImuSample> imu_segment;
};

// Ordered trajectory sink; runs as its own thread in pipelined mode.
class TrajectoryWriter {
 public:
  TrajectoryWriter(const std::string& est_path, const std::string& raw_path,
                   bool threaded)
      : threaded_(threaded) {
    if (!est_path.empty()) est_.emplace(est_path);
    if (!raw_path.empty()) raw_.emplace(raw_path);
    if (threaded_) worker_ = std::thread([this] { drain(); });
  }

  ~TrajectoryWriter() { finish(); }

  void write_est(const Pose& p) { submit({false, p}); }
  void write_raw(const Pose& p) { submit({true, p}); }

  void finish() {
    if (finished_) return;
    finished_ = true;
    if (threaded_) {
      {
        std::lock_guard lock(mutex_);
        closed_ = true;
      }
      ready_.notify_all();
      worker_.join();
    }
  }

 private:
  struct Msg {
    bool raw;
    Pose pose;
  };

  void submit(Msg msg) {
    if (!threaded_) {
      emit(msg);
      return;
    }
    {
      std::lock_guard lock(mutex_);
      queue_.push_back(msg);
    }
    ready_.notify_one();
  }

  void emit(const Msg& msg) {
    if (msg.raw) {
      if (raw_) raw_->write(msg.pose);
    } else if (est_) {
      est_->write(msg.pose);
    }
  }

  void drain() {
    std::unique_lock lock(mutex_);
    while (true) {
      ready_.wait(lock, [&] { return !queue_.empty() || closed_; });
      while (!queue_.empty()) {
        const Msg msg = queue_.front();
        queue_.pop_front();
        lock.unlock();
        emit(msg);
        lock.lock();
      }
      if (closed_) return;
    }
  }

  bool threaded_;
  std::optional<TumWriter> est_, raw_;
  std::thread worker_;
  std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<Msg> queue_;
  bool closed_ = false;
  bool finished_ = false;
};

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::kTrivial: return "trivial";
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kFunctionTolerance: return "function_tolerance";
    case SolveStatus::kGradientTolerance: return "gradient_tolerance";
    case SolveStatus::kMaxIterations: return "max_iterations";
    case SolveStatus::kDiverged: return "diverged";
  }
  return "?";
}

// Stage 1: parse, calibrate, filter, estimate ego-velocity.
class CloudStage {
 public:
  CloudStage(const PipelineConfig& cfg, const RunOptions& opts)
      : cfg_(cfg), reader_(opts.radar_path), imu_(opts.imu_path) {}

  std::optional<StageMsg> next() {
    auto raw = reader_.next();
    if (!raw) return std::nullopt;

    RadarScan scan = apply_extrinsics(*raw, cfg_.extrinsics);
    scan = range_power_filter(scan, cfg_.preprocess.min_range,
                              cfg_.preprocess.max_range, cfg_.preprocess.min_power);

    StageMsg msg;
    msg.t = scan.t_stamp;
    msg.dt = first_ ? 0.0 : scan.t_stamp - prev_t_;
    msg.fused_att = imu_.orientation_at(scan.t_stamp);
    msg.imu_segment = imu_.segment(first_ ? scan.t_stamp : prev_t_, scan.t_stamp);

    MotionModel model;
    model.kind = cfg_.model;
    if (!first_) model = make_motion_model(cfg_.model, prev_fused_, msg.fused_att);

    try {
      const auto res = ransac_estimate(scan, model, cfg_.ransac);
      msg.ego = res.velocity;
      msg.ego_ok = true;
      // full-scan residual, not just the consensus set: the model-mismatch
      // signal (e.g. a non-holonomic model on lateral motion)
      const auto sys = doppler_rows(scan);
      msg.ego_residual = std::sqrt((sys.rays * res.velocity.v + sys.doppler)
                                       .squaredNorm() /
                                   static_cast<double>(sys.doppler.size()));
    } catch (const Error&) {
      msg.ego_ok = false;
    }

    std::vector<Vec3> positions;
    positions.reserve(scan.points.size());
    for (const auto& p : scan.points) positions.push_back(p.pos);
    msg.cloud = voxel_downsample(positions, cfg_.preprocess.voxel_leaf);

    imu_.drop_before(prev_t_);
    prev_t_ = scan.t_stamp;
    prev_fused_ = msg.fused_att;
    first_ = false;
    return msg;
  }

 private:
  const PipelineConfig& cfg_;
  RadarJsonlReader reader_;
  ImuWindow imu_;
  bool first_ = true;
  double prev_t_ = 0.0;
  Quat prev_fused_;
};

// Stage 2: propagation, keyframing, constraint mesh, window optimization.
class OdometryStage {
 public:
  OdometryStage(const PipelineConfig& cfg, const RunOptions& opts,
                TrajectoryWriter& writer, RunSummary& summary)
      : cfg_(cfg), window_(cfg.odom), writer_(writer), summary_(summary) {
    if (!opts.diagnostics_path.empty()) {
      diag_ = std::fopen(opts.diagnostics_path.c_str(), "w");
      if (!diag_) throw Error("cannot open diagnostics file: " + opts.diagnostics_path);
    }
    emit_raw_ = !opts.raw_out_path.empty();
  }

  ~OdometryStage() {
    if (diag_) std::fclose(diag_);
  }

  void consume(StageMsg msg) {
    ++summary_.scans;
    if (first_) {
      q_est_ = msg.fused_att;
      est_pose_ = Pose{msg.t, Vec3::Zero(), q_est_};
      odom_pose_ = est_pose_;
      first_ = false;
    } else {
      const Quat q_prev = q_est_;
      q_est_ = imu_yaw_update(q_est_, msg.imu_segment);
      if (msg.ego_ok) {
        last_vel_ = msg.ego;
      } else {
        ++summary_.ego_failures;  // coast on the previous velocity
      }
      if (msg.ego_ok && msg.ego_residual > cfg_.ransac.inlier_threshold) {
        ++summary_.elevated_residual_scans;
        std::fprintf(stderr,
                     "warning: elevated ego-velocity residual %.3f m/s at t=%.3f "
                     "(model %s)\n",
                     msg.ego_residual, msg.t, motion_model_name(cfg_.model).c_str());
      }
      odom_pose_ = propagate_pose(odom_pose_, last_vel_, q_prev, q_est_, msg.dt);
      est_pose_ = propagate_pose(est_pose_, last_vel_, q_prev, q_est_, msg.dt);
    }
    if (emit_raw_) writer_.write_raw(odom_pose_);

    const bool want_kf =
        !have_kf_ || keyframe_gate(est_pose_, last_kf_pose_, cfg_.odom);
    if (!want_kf) return;

    GicpCloud cloud;
    try {
      cloud = build_gicp_cloud(msg.cloud, cfg_.odom.gicp.k_neighbors,
                               cfg_.odom.gicp.epsilon_cov);
    } catch (const TooFewPoints&) {
      ++summary_.skipped_keyframes;
      return;
    }

    Keyframe kf;
    kf.id = next_id_++;
    kf.pose = est_pose_;
    kf.cloud = std::move(cloud);
    kf.raw_odom_pose = odom_pose_;
    kf.imu_quat = msg.fused_att;

    const auto t0 = std::chrono::steady_clock::now();
    const AddReport add = window_.add_keyframe(std::move(kf));
    const SolveReport solve = window_.optimize();
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();

    ++summary_.keyframes;
    summary_.edges_added += add.edges_added;
    summary_.edges_discarded += add.edges_discarded;
    if (add.degenerate_window) ++summary_.degenerate_windows;
    if (solve.status == SolveStatus::kDiverged) ++summary_.solver_diverged;
    summary_.max_solver_iterations =
        std::max(summary_.max_solver_iterations, solve.iterations);
    summary_.all_costs_monotonic &= solve.cost_monotonic;
    for (const auto& d : add.edge_diags)
      if (d.kept) summary_.max_kept_fitness = std::max(summary_.max_kept_fitness, d.fitness);

    if (diag_) {
      const int kf_id = next_id_ - 1;
      for (const auto& d : add.edge_diags) {
        json j{{"type", "edge"},       {"kf", kf_id},
               {"from", d.from_id},    {"to", d.to_id},
               {"fitness", d.fitness}, {"weight", d.weight},
               {"kept", d.kept},       {"converged", d.converged}};
        std::fprintf(diag_, "%s\n", j.dump().c_str());
      }
      json j{{"type", "solve"},
             {"kf", kf_id},
             {"iterations", solve.iterations},
             {"accepted_steps", solve.accepted_steps},
             {"initial_cost", solve.initial_cost},
             {"final_cost", solve.final_cost},
             {"status", status_name(solve.status)},
             {"monotonic", solve.cost_monotonic},
             {"edges_added", add.edges_added},
             {"edges_discarded", add.edges_discarded},
             {"degenerate", add.degenerate_window},
             {"wall_ms", wall_ms}};
      std::fprintf(diag_, "%s\n", j.dump().c_str());
    }

    est_pose_ = window_.keyframes().back().pose;
    last_kf_pose_ = est_pose_;
    have_kf_ = true;
    for (const Pose& retired : window_.drain_retired()) writer_.write_est(retired);
  }

  void finish() {
    for (const Pose& retired : window_.drain_retired()) writer_.write_est(retired);
    for (const auto& kf : window_.keyframes()) writer_.write_est(kf.pose);
  }

 private:
  const PipelineConfig& cfg_;
  WindowState window_;
  TrajectoryWriter& writer_;
  RunSummary& summary_;
  std::FILE* diag_ = nullptr;
  bool emit_raw_ = false;

  bool first_ = true;
  bool have_kf_ = false;
  int next_id_ = 0;
  Quat q_est_;
  Pose est_pose_, odom_pose_, last_kf_pose_;
  EgoVelocity last_vel_;
};

}  // namespace

RunSummary run_pipeline(const PipelineConfig& cfg, const RunOptions& opts) {
  RunSummary summary;
  TrajectoryWriter writer(opts.out_path, opts.raw_out_path, !cfg.single_thread);
  OdometryStage odometry(cfg, opts, writer, summary);

  if (cfg.single_thread) {
    CloudStage cloud(cfg, opts);
    while (auto msg = cloud.next()) odometry.consume(std::move(*msg));
  } else {
    BoundedQueue<StageMsg> queue(static_cast<std::size_t>(cfg.queue_capacity));
    std::exception_ptr producer_error;
    std::thread producer([&] {
      try {
        CloudStage cloud(cfg, opts);
        while (auto msg = cloud.next()) queue.push(std::move(*msg));
      } catch (...) {
        producer_error = std::current_exception();
      }
      queue.close();
    });
    while (auto msg = queue.pop()) odometry.consume(std::move(*msg));
    producer.join();
    if (producer_error) {
      writer.finish();
      std::rethrow_exception(producer_error);
    }
  }

  odometry.finish();
  writer.finish();
  return summary;
}

}  // namespace radarodo
