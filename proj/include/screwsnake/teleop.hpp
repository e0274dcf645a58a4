#pragma once

// Teleoperation gateway: clamps pilot frames to a box inside the joint limits,
// turns them into per-node bus setpoints according to the active mode, and
// reports robot state back. Time is virtual and advances one bus period per
// tick.

#include "screwsnake/bus.hpp"
#include "screwsnake/locomotion.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace screwsnake {

struct ClampPolicy {
  double device_limit = 80.0 * kPi<double> / 180.0;  // per axis, deflection [rad]
  double joint_limit = 90.0 * kPi<double> / 180.0;
};

void validate(const ClampPolicy& policy);

struct JointCommand {
  double pitch = 0.0;  // deflection [rad]
  double yaw = 0.0;    // deflection [rad]
};

struct TeleopFrame {
  std::uint64_t seq = 0;
  double t_ms = 0.0;
  std::vector<JointCommand> joints;
  double screw = 0.0;  // fraction of full screw rate, [-1, 1]
  std::optional<Mode> mode;
  std::optional<double> radius_m;  // M_CONFIG turn radius; absent means straight
};

struct ClampResult {
  std::vector<JointCommand> joints;
  std::vector<bool> flags;  // pitch, yaw per joint

  bool any() const;
};

/// Clamps every axis to +-device_limit. Throws InvalidInput on non-finite values.
ClampResult clamp(const TeleopFrame& frame, const ClampPolicy& policy);

/// Thrown for wire messages that cannot be turned into a frame.
class ProtocolError : public Error {
 public:
  ProtocolError(std::string code, const std::string& detail) : Error(detail), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

TeleopFrame parse_frame(const nlohmann::json& message);
nlohmann::json to_json(const TeleopFrame& frame);

struct StateUpdate {
  double t_ms = 0.0;
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
  std::vector<JointCommand> joints;  // measured
  std::vector<bool> clamped;         // flags of the last applied frame
  std::vector<SegmentVelocity> speeds;
  int misses = 0;
  Mode mode = Mode::Teleop;
  bool hold = false;
  std::uint64_t drops = 0;
  std::uint64_t seq = 0;  // last applied frame
};

nlohmann::json to_json(const StateUpdate& update);
StateUpdate parse_state(const nlohmann::json& message);
nlohmann::json error_message(const std::string& code, const std::string& detail);
nlohmann::json policy_message(const ClampPolicy& policy, std::size_t n_joints, double loop_rate,
                              double state_rate);

struct RuntimeConfig {
  ChainGeometry geom;
  TerrainProfile terrain = ideal_screw_medium();
  BusModel bus;
  ClampPolicy policy;
  double hold_after_ms = 500.0;
  int state_every_ticks = 2;
  double velocity_noise_sd = 0.0;
  std::uint64_t seed = 0;
};

enum class SubmitStatus { Queued, Dropped, Rejected };

struct SubmitResult {
  SubmitStatus status = SubmitStatus::Queued;
  std::string code;
  std::string detail;
};

/// Single-pilot session wired to a bus and a simulator.
class TeleopRuntime {
 public:
  explicit TeleopRuntime(RuntimeConfig config);

  /// Claims the pilot seat. False when another pilot holds it.
  bool connect(int client);
  void disconnect(int client);
  std::optional<int> pilot() const { return pilot_; }

  /// Queues a frame for the next tick; the newest valid frame wins.
  SubmitResult submit(int client, const TeleopFrame& frame);

  /// Advances one bus period. Returns a state update every state_every_ticks ticks.
  std::optional<StateUpdate> tick();

  StateUpdate snapshot() const;
  double now_ms() const { return bus_.now(); }
  double period_ms() const { return config_.bus.period_ms(); }
  double state_rate_hz() const { return config_.bus.loop_rate / config_.state_every_ticks; }
  bool holding() const { return hold_; }
  std::uint64_t drops() const { return drops_; }
  std::uint64_t applied() const { return applied_; }
  /// Dispatch-to-feedback time of the most recent applied frame: from the bus
  /// cycle that carried it to the last node's sensor reply for that cycle.
  std::optional<double> last_command_latency_ms() const { return last_latency_; }
  const Simulator& simulator() const { return sim_; }
  const VirtualBus& bus() const { return bus_; }
  const RuntimeConfig& config() const { return config_; }
  Mode mode() const { return mode_; }

 private:
  void apply(const TeleopFrame& frame);

  RuntimeConfig config_;
  VirtualBus bus_;
  Simulator sim_;
  Mode mode_ = Mode::Teleop;
  std::optional<int> pilot_;
  std::optional<TeleopFrame> pending_;
  std::uint64_t last_seq_ = 0;
  bool have_seq_ = false;
  double last_frame_ms_ = 0.0;
  bool hold_ = true;
  std::uint64_t drops_ = 0;
  std::uint64_t applied_ = 0;
  std::uint64_t applied_seq_ = 0;
  std::vector<bool> clamp_flags_;
  std::uint64_t ticks_ = 0;
  std::vector<SegmentVelocity> last_speeds_;
  std::optional<std::uint64_t> pending_latency_cycle_;
  std::vector<double> latency_replies_;
  std::optional<double> last_latency_;
};

}  // namespace screwsnake
