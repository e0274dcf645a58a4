#pragma once

// Time-stepped planar simulator. Each tick the terrain model turns screw
// commands into per-segment velocities, the rigid planar twist that best fits
// those velocities (least squares over all segment centers) moves the head
// frame, and joints slew toward their targets under a rate limit.

#include "screwsnake/chain_kinematics.hpp"
#include "screwsnake/corridor.hpp"
#include "screwsnake/mconfig.hpp"
#include "screwsnake/terrain.hpp"
#include "screwsnake/types.hpp"

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace screwsnake {

enum class Mode { Tunneling, MConfig, Conforming, Teleop };

const char* to_string(Mode mode);
Mode mode_from_string(const std::string& name);

class SimulationFault : public Error {
 public:
  SimulationFault(std::size_t segment, const std::string& what)
      : Error("segment " + std::to_string(segment) + ": " + what), segment_(segment) {}
  std::size_t segment() const { return segment_; }

 private:
  std::size_t segment_;
};

class InsufficientArc : public Error {
 public:
  explicit InsufficientArc(double swept)
      : Error("trajectory sweeps only " + std::to_string(swept * 180.0 / kPi<double>) +
              " degrees of heading; at least 90 are needed"),
        swept_(swept) {}
  double swept() const { return swept_; }

 private:
  double swept_;
};

/// World pose of the head segment frame plus the chain's joint state.
struct PoseState {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;  // (-pi, pi]
  JointState joints;
  Mode mode = Mode::Tunneling;
};

struct SimCommand {
  Eigen::VectorXd joint_targets;  // planar angles; compliant joints ignore them
  Eigen::VectorXd screw_omegas;   // rad/s per segment
};

struct SimSettings {
  double dt = 0.01;
  double joint_rate_limit = 1.0;  // rad/s
  double incline_deg = 0.0;       // scenario-wide incline outside corridors
  double velocity_noise_sd = 0.0; // m/s, added to realized segment velocities
  std::uint64_t seed = 0;
};

void validate(const SimSettings& settings);

/// cos(incline) propulsion multiplier.
double incline_factor(double incline_deg);

struct StepResult {
  PoseState state;
  std::vector<SegmentVelocity> realized;
  Eigen::VectorXd omegas;  // applied (clamped) screw rates
  BodyTwist twist;         // head frame
  int saturated = 0;
};

/// Least-squares rigid planar twist (vx, vy, yaw rate about the origin of the
/// points' frame) fitting velocities observed at the given points.
template <typename Scalar>
BodyTwistT<Scalar> fit_rigid_twist(const Eigen::Matrix<Scalar, 2, Eigen::Dynamic>& points,
                                   const Eigen::Matrix<Scalar, 2, Eigen::Dynamic>& velocities,
                                   Frame frame) {
  const Eigen::Index n = points.cols();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 3> a(2 * n, 3);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> b(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.row(2 * i) << Scalar(1), Scalar(0), -points(1, i);
    a.row(2 * i + 1) << Scalar(0), Scalar(1), points(0, i);
    b.template segment<2>(2 * i) = velocities.col(i);
  }
  const Eigen::Matrix<Scalar, 3, 1> sol = a.colPivHouseholderQr().solve(b);
  return {frame, sol[0], sol[1], sol[2]};
}

/// Advances one tick for every mode except corridor conforming, which needs
/// the corridor-aware Simulator.
StepResult step(const ChainGeometry& geom, const PoseState& state, const SimCommand& cmd,
                const TerrainProfile& terrain, const SimSettings& settings,
                std::mt19937_64* noise = nullptr);

/// World pose of the mode's reference frame: the M-center frame in
/// M-configuration, the head segment frame otherwise.
PlanarFrame<double> reference_pose(const ChainGeometry& geom, const PoseState& state);

struct LogRow {
  double t = 0.0;
  PlanarFrame<double> reference;
  PoseState state;
  std::vector<SegmentVelocity> realized;
  Eigen::VectorXd omegas;
};

class TrajectoryLog {
 public:
  TrajectoryLog() = default;
  TrajectoryLog(double dt, std::size_t n_segments) : dt_(dt), n_segments_(n_segments) {}

  /// Rows must advance by exactly one dt.
  void append(LogRow row);
  const std::vector<LogRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }
  std::size_t size() const { return rows_.size(); }
  double dt() const { return dt_; }
  std::size_t n_segments() const { return n_segments_; }

  void write_csv(std::ostream& out) const;

 private:
  double dt_ = 0.01;
  std::size_t n_segments_ = 4;
  std::vector<LogRow> rows_;
};

struct CircleFit {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
  double rms = 0.0;
};

/// Algebraic (Kasa) least-squares circle through the columns of `points`.
CircleFit fit_circle(const Eigen::Matrix2Xd& points);

struct TurnRadiusFit {
  double radius = 0.0;
  double rms = 0.0;
  double swept = 0.0;  // |heading change| [rad]
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
};

/// Circle fit of the reference positions; needs at least 90 degrees of heading change.
TurnRadiusFit fit_turn_radius(const TrajectoryLog& log);

/// Total heading change of the reference frame over the log, unwrapped.
double swept_heading(const TrajectoryLog& log);

struct CorridorStatus {
  int wall_violations = 0;
  double max_wall_excess = 0.0;  // largest centerline offset beyond the allowed clearance
  bool reached_exit = false;
  double head_arc_length = 0.0;
};

/// Stateful simulator. Owns the noise generator and, in conforming mode, the
/// path memory the compliant chain follows.
class Simulator {
 public:
  Simulator(ChainGeometry geom, TerrainProfile terrain, SimSettings settings, PoseState initial,
            std::optional<CorridorSpec> corridor = std::nullopt);

  StepResult advance(const SimCommand& cmd);

  const PoseState& state() const { return state_; }
  double time() const { return static_cast<double>(steps_) * settings_.dt; }
  const ChainGeometry& geometry() const { return geom_; }
  const TerrainProfile& terrain() const { return terrain_; }
  const SimSettings& settings() const { return settings_; }
  const CorridorStatus& corridor_status() const { return corridor_status_; }
  const std::optional<CorridorSpec>& corridor() const { return corridor_; }

  /// Joint points in world coordinates from the head tip to the tail end.
  std::vector<Eigen::Vector2d> chain_outline() const;

  /// Switches mode in place, keeping the current world pose.
  void set_mode(Mode mode);

 private:
  StepResult advance_conforming(const SimCommand& cmd);
  void place_in_corridor();
  Eigen::Vector2d head_joint_on_trail() const;
  void advance_head_joint(double distance);
  void rebuild_chain_from_trail();
  void update_state_from_chain(double dt);
  void check_walls();

  ChainGeometry geom_;
  TerrainProfile terrain_;
  SimSettings settings_;
  PoseState state_;
  std::optional<CorridorSpec> corridor_;
  std::mt19937_64 rng_;
  std::uint64_t steps_ = 0;

  // Conforming mode: links_[0] is the head tip, links_[k] is U-joint k - 1 for
  // k in [1, n - 1], links_[n] the tail end. The trail holds past tip
  // positions, oldest first; the head joint sits on trail segment j1_index_.
  std::vector<Eigen::Vector2d> links_;
  std::deque<Eigen::Vector2d> trail_;
  std::size_t j1_index_ = 0;
  double j1_param_ = 0.0;
  double head_deflection_ = 0.0;
  CorridorStatus corridor_status_;
};

}  // namespace screwsnake
