#pragma once

// Simulated daisy-chain control network. The desktop runs a fixed-rate loop
// that sends every node its setpoint; each node answers with a sensor frame
// and regulates its U-joint with two PID loops. Everything runs in virtual
// milliseconds.

#include "screwsnake/types.hpp"

#include <climits>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <queue>
#include <variant>
#include <vector>

namespace screwsnake {

struct BusModel {
  double base_rtt = 8.85;   // ms
  double per_hop = 0.31;    // ms per node
  double loop_rate = 75.0;  // Hz
  double jitter_sd = 0.11;  // ms, round trip

  double period_ms() const { return 1000.0 / loop_rate; }
};

void validate(const BusModel& model);

/// Round-trip time to the n-th node: base_rtt + per_hop * n.
double rtt(const BusModel& model, std::size_t n_segments);

inline constexpr int kUnboundedSegments = INT_MAX;

/// Largest n with rtt(n) below the loop period; kUnboundedSegments when per_hop is 0
/// and the base fits.
int max_segments(const BusModel& model);

struct SchedulingRow {
  std::size_t n = 0;
  double rtt = 0.0;
  double period = 0.0;
  bool feasible = false;
};

std::vector<SchedulingRow> scheduling_report(const BusModel& model, std::size_t max_n);
void write_scheduling_report(std::ostream& out, const BusModel& model, std::size_t max_n);

enum class MessageKind { Setpoint, Sensor };

const char* to_string(MessageKind kind);

/// Joint-axis targets as deflections, plus the screw rate.
struct SetpointPayload {
  double yaw = 0.0;
  double pitch = 0.0;
  double screw_omega = 0.0;
};

struct SensorPayload {
  double yaw = 0.0;
  double pitch = 0.0;
  double screw_omega = 0.0;
  Eigen::Vector3d orientation = Eigen::Vector3d::Zero();  // roll, pitch, yaw [rad]
  Eigen::Vector3d motor_current = Eigen::Vector3d::Zero();  // yaw, pitch, screw [A]; not simulated
  double temperature = 0.0;                                // degC; not simulated
};

struct BusMessage {
  MessageKind kind = MessageKind::Setpoint;
  std::size_t segment_id = 0;
  std::variant<SetpointPayload, SensorPayload> payload;
  double send_time = 0.0;
  double deliver_time = 0.0;
  std::uint64_t cycle = 0;
  bool deadline_missed = false;
};

void validate(const BusMessage& message);

struct PidGains {
  double kp = 10.0;  // Nm/rad
  double ki = 0.0;
  double kd = 0.0;
  double output_limit = 2.1;  // Nm, continuous actuator torque
};

class Pid {
 public:
  explicit Pid(PidGains gains = {});
  /// Torque for the given error, clamped to the output limit. The integrator
  /// only accumulates while the output is unsaturated or the error unwinds it.
  double update(double error, double dt);
  void reset();
  const PidGains& gains() const { return gains_; }
  double integral() const { return integral_; }

 private:
  PidGains gains_;
  double integral_ = 0.0;
  double prev_error_ = 0.0;
  bool has_prev_ = false;
};

/// First-order velocity-limited joint: rate = clamp(gain * torque, +-rate_limit).
struct JointPlant {
  double gain = 1.0;        // (rad/s)/Nm
  double rate_limit = 1.0;  // rad/s
};

class SegmentNode {
 public:
  SegmentNode(std::size_t segment_id, PidGains gains = {}, JointPlant plant = {});

  void receive(const SetpointPayload& setpoint);
  /// One regulation step of `dt` seconds on both joint axes.
  void regulate(double dt);
  SensorPayload sensor() const;

  std::size_t segment_id() const { return id_; }
  double yaw() const { return yaw_; }
  double pitch() const { return pitch_; }
  double yaw_rate() const { return yaw_rate_; }
  const SetpointPayload& setpoint() const { return setpoint_; }
  double last_torque(int axis) const { return torque_[axis]; }
  void set_orientation(const Eigen::Vector3d& rpy) { orientation_ = rpy; }
  void set_joint(double yaw, double pitch);

 private:
  std::size_t id_;
  Pid yaw_pid_;
  Pid pitch_pid_;
  JointPlant plant_;
  SetpointPayload setpoint_;
  double yaw_ = 0.0;
  double pitch_ = 0.0;
  double yaw_rate_ = 0.0;
  double pitch_rate_ = 0.0;
  double torque_[2] = {0.0, 0.0};
  Eigen::Vector3d orientation_ = Eigen::Vector3d::Zero();
};

struct TickResult {
  std::vector<BusMessage> delivered;
  int deadline_misses = 0;
};

/// Discrete-event daisy chain. Node k sits k + 1 hops from the desktop; one-way
/// latency is half the round trip plus Gaussian jitter derived from
/// (seed, segment, cycle, direction), so runs are reproducible and a node's
/// timing does not depend on how many nodes follow it.
class VirtualBus {
 public:
  VirtualBus(BusModel model, std::size_t n_segments, std::uint64_t seed, PidGains gains = {},
             JointPlant plant = {});

  /// Setpoint sent to `segment` at the next desktop cycle and every cycle after.
  void command(std::size_t segment, const SetpointPayload& setpoint);

  /// Advances virtual time by dt_ms, processing events in time order.
  TickResult advance(double dt_ms);

  double now() const { return now_; }
  std::uint64_t cycles() const { return cycle_; }
  std::size_t size() const { return nodes_.size(); }
  const BusModel& model() const { return model_; }
  SegmentNode& node(std::size_t i);
  const SegmentNode& node(std::size_t i) const;
  /// Last sensor frame the desktop received from each node.
  const std::vector<SensorPayload>& latest_sensors() const { return latest_; }
  const std::vector<BusMessage>& trace() const { return trace_; }
  int deadline_misses() const { return misses_; }
  /// Round trips measured at the desktop: (segment, ms).
  const std::vector<std::pair<std::size_t, double>>& round_trips() const { return round_trips_; }
  void set_trace_enabled(bool on) { trace_enabled_ = on; }

  void write_trace_csv(std::ostream& out) const;

  /// Jittered one-way latency of a message on a link.
  double one_way_latency(std::size_t segment, std::uint64_t cycle, MessageKind kind) const;

 private:
  struct Event {
    double time;
    std::uint64_t order;
    int type;  // 0 = cycle start, 1 = delivery
    BusMessage message;
    bool operator>(const Event& o) const {
      return time != o.time ? time > o.time : order > o.order;
    }
  };

  void schedule(BusMessage msg);
  void start_cycle(double t, TickResult& result);
  void deliver(const BusMessage& msg, TickResult& result);

  BusModel model_;
  std::uint64_t seed_;
  std::vector<SegmentNode> nodes_;
  std::vector<SetpointPayload> staged_;
  std::vector<SensorPayload> latest_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  std::map<std::pair<std::size_t, int>, double> last_delivery_;
  std::vector<BusMessage> trace_;
  std::vector<std::pair<std::size_t, double>> round_trips_;
  double now_ = 0.0;
  std::uint64_t cycle_ = 0;
  std::uint64_t order_ = 0;
  int misses_ = 0;
  bool trace_enabled_ = true;
};

/// Runs `samples` desktop cycles and returns the round trips to the farthest node.
std::vector<double> sample_round_trips(const BusModel& model, std::size_t n_segments,
                                       std::size_t samples, std::uint64_t seed);

/// Deadline misses over `cycles` desktop cycles with n nodes.
int count_deadline_misses(const BusModel& model, std::size_t n_segments, std::size_t cycles,
                          std::uint64_t seed);

}  // namespace screwsnake
