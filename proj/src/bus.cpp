#include "screwsnake/bus.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

namespace screwsnake {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

void validate(const BusModel& m) {
  if (!(m.base_rtt > 0)) throw InvalidInput("base_rtt must be positive");
  if (!(m.per_hop >= 0)) throw InvalidInput("per_hop must be non-negative");
  if (!(m.loop_rate > 0)) throw InvalidInput("loop_rate must be positive");
  if (!(m.jitter_sd >= 0)) throw InvalidInput("jitter_sd must be non-negative");
}

double rtt(const BusModel& m, std::size_t n) {
  validate(m);
  if (n < 1) throw InvalidInput("rtt needs at least one segment");
  return m.base_rtt + m.per_hop * static_cast<double>(n);
}

int max_segments(const BusModel& m) {
  validate(m);
  const double period = m.period_ms();
  if (!(m.base_rtt + m.per_hop < period)) return 0;
  if (m.per_hop == 0.0) return kUnboundedSegments;
  int n = static_cast<int>(std::floor((period - m.base_rtt) / m.per_hop));
  while (n > 0 && !(rtt(m, static_cast<std::size_t>(n)) < period)) --n;
  while (rtt(m, static_cast<std::size_t>(n + 1)) < period) ++n;
  return n;
}

std::vector<SchedulingRow> scheduling_report(const BusModel& m, std::size_t max_n) {
  std::vector<SchedulingRow> rows;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const double r = rtt(m, n);
    rows.push_back({n, r, m.period_ms(), r < m.period_ms()});
  }
  return rows;
}

void write_scheduling_report(std::ostream& out, const BusModel& m, std::size_t max_n) {
  const int max_n_feasible = max_segments(m);
  out << std::fixed << std::setprecision(3);
  out << "loop_rate_hz: " << m.loop_rate << "\n";
  out << "period_ms: " << m.period_ms() << "\n";
  out << "base_rtt_ms: " << m.base_rtt << "\n";
  out << "per_hop_ms: " << m.per_hop << "\n";
  if (max_n_feasible == kUnboundedSegments)
    out << "max_segments: unbounded\n";
  else
    out << "max_segments: " << max_n_feasible << "\n";
  out << "rows:\n";
  for (const auto& r : scheduling_report(m, max_n))
    out << "  - {n: " << r.n << ", rtt_ms: " << r.rtt << ", period_ms: " << r.period
        << ", feasible: " << (r.feasible ? "true" : "false") << "}\n";
  out.unsetf(std::ios::floatfield);
}

const char* to_string(MessageKind kind) { return kind == MessageKind::Setpoint ? "SETPOINT" : "SENSOR"; }

void validate(const BusMessage& msg) {
  if (!(msg.deliver_time >= msg.send_time)) throw InvalidInput("message delivered before it was sent");
  const bool setpoint = std::holds_alternative<SetpointPayload>(msg.payload);
  if (setpoint != (msg.kind == MessageKind::Setpoint))
    throw InvalidInput("message payload does not match its kind");
}

// ---------------------------------------------------------------------------

Pid::Pid(PidGains gains) : gains_(gains) {
  if (!(gains.output_limit > 0)) throw InvalidInput("PID output limit must be positive");
}

double Pid::update(double error, double dt) {
  if (!(dt > 0)) throw InvalidInput("PID step needs dt > 0");
  const double p = gains_.kp * error;
  const double d = has_prev_ ? gains_.kd * (error - prev_error_) / dt : 0.0;
  prev_error_ = error;
  has_prev_ = true;
  const double candidate = integral_ + error * dt;
  const double unsat = p + gains_.ki * candidate + d;
  if (std::abs(unsat) <= gains_.output_limit || unsat * error < 0) integral_ = candidate;
  return std::clamp(p + gains_.ki * integral_ + d, -gains_.output_limit, gains_.output_limit);
}

void Pid::reset() {
  integral_ = 0.0;
  prev_error_ = 0.0;
  has_prev_ = false;
}

SegmentNode::SegmentNode(std::size_t segment_id, PidGains gains, JointPlant plant)
    : id_(segment_id), yaw_pid_(gains), pitch_pid_(gains), plant_(plant) {}

void SegmentNode::receive(const SetpointPayload& sp) { setpoint_ = sp; }

void SegmentNode::set_joint(double yaw, double pitch) {
  yaw_ = yaw;
  pitch_ = pitch;
  yaw_pid_.reset();
  pitch_pid_.reset();
}

void SegmentNode::regulate(double dt) {
  auto axis = [&](Pid& pid, double target, double& angle, double& rate, double& torque) {
    torque = pid.update(target - angle, dt);
    rate = std::clamp(plant_.gain * torque, -plant_.rate_limit, plant_.rate_limit);
    angle += rate * dt;
  };
  axis(yaw_pid_, setpoint_.yaw, yaw_, yaw_rate_, torque_[0]);
  axis(pitch_pid_, setpoint_.pitch, pitch_, pitch_rate_, torque_[1]);
}

SensorPayload SegmentNode::sensor() const {
  SensorPayload s;
  s.yaw = yaw_;
  s.pitch = pitch_;
  s.screw_omega = setpoint_.screw_omega;
  s.orientation = orientation_;
  return s;
}

// ---------------------------------------------------------------------------

VirtualBus::VirtualBus(BusModel model, std::size_t n_segments, std::uint64_t seed, PidGains gains,
                       JointPlant plant)
    : model_(model), seed_(seed) {
  validate(model_);
  if (n_segments < 1) throw InvalidInput("bus needs at least one segment");
  for (std::size_t i = 0; i < n_segments; ++i) nodes_.emplace_back(i, gains, plant);
  staged_.assign(n_segments, SetpointPayload{});
  latest_.assign(n_segments, SensorPayload{});
  queue_.push({0.0, order_++, 0, {}});
}

SegmentNode& VirtualBus::node(std::size_t i) {
  check_segment_index(i, nodes_.size());
  return nodes_[i];
}

const SegmentNode& VirtualBus::node(std::size_t i) const {
  check_segment_index(i, nodes_.size());
  return nodes_[i];
}

void VirtualBus::command(std::size_t segment, const SetpointPayload& sp) {
  check_segment_index(segment, nodes_.size());
  staged_[segment] = sp;
}

double VirtualBus::one_way_latency(std::size_t segment, std::uint64_t cycle, MessageKind kind) const {
  const double mean = 0.5 * rtt(model_, segment + 1);
  if (model_.jitter_sd == 0.0) return mean;
  std::uint64_t key = splitmix64(seed_);
  key = splitmix64(key ^ static_cast<std::uint64_t>(segment));
  key = splitmix64(key ^ cycle);
  key = splitmix64(key ^ static_cast<std::uint64_t>(kind == MessageKind::Setpoint ? 1 : 2));
  std::mt19937_64 gen(key);
  std::normal_distribution<double> gauss(0.0, model_.jitter_sd / std::sqrt(2.0));
  return std::max(0.0, mean + gauss(gen));
}

void VirtualBus::schedule(BusMessage msg) {
  const auto link = std::make_pair(msg.segment_id, static_cast<int>(msg.kind));
  auto it = last_delivery_.find(link);
  if (it != last_delivery_.end()) msg.deliver_time = std::max(msg.deliver_time, it->second);
  last_delivery_[link] = msg.deliver_time;
  queue_.push({msg.deliver_time, order_++, 1, std::move(msg)});
}

void VirtualBus::start_cycle(double t, TickResult&) {
  const std::uint64_t c = cycle_++;
  const double dt_s = model_.period_ms() / 1000.0;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    nodes_[k].regulate(dt_s);
    BusMessage msg;
    msg.kind = MessageKind::Setpoint;
    msg.segment_id = k;
    msg.payload = staged_[k];
    msg.send_time = t;
    msg.deliver_time = t + one_way_latency(k, c, MessageKind::Setpoint);
    msg.cycle = c;
    schedule(std::move(msg));
  }
  queue_.push({static_cast<double>(c + 1) * model_.period_ms(), order_++, 0, {}});
}

void VirtualBus::deliver(const BusMessage& msg, TickResult& result) {
  BusMessage done = msg;
  const double cycle_start = static_cast<double>(msg.cycle) * model_.period_ms();
  if (msg.kind == MessageKind::Setpoint) {
    SegmentNode& n = nodes_[msg.segment_id];
    n.receive(std::get<SetpointPayload>(msg.payload));
    BusMessage reply;
    reply.kind = MessageKind::Sensor;
    reply.segment_id = msg.segment_id;
    reply.payload = n.sensor();
    reply.send_time = msg.deliver_time;
    reply.deliver_time =
        msg.deliver_time + one_way_latency(msg.segment_id, msg.cycle, MessageKind::Sensor);
    reply.cycle = msg.cycle;
    schedule(std::move(reply));
  } else {
    latest_[msg.segment_id] = std::get<SensorPayload>(msg.payload);
    round_trips_.emplace_back(msg.segment_id, msg.deliver_time - cycle_start);
    if (msg.deliver_time > cycle_start + model_.period_ms()) {
      done.deadline_missed = true;
      ++misses_;
      ++result.deadline_misses;
    }
  }
  if (trace_enabled_) trace_.push_back(done);
  result.delivered.push_back(std::move(done));
}

TickResult VirtualBus::advance(double dt_ms) {
  if (!(dt_ms > 0)) throw InvalidInput("bus tick needs dt > 0");
  TickResult result;
  const double end = now_ + dt_ms;
  while (!queue_.empty() && queue_.top().time < end) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    if (ev.type == 0)
      start_cycle(ev.time, result);
    else
      deliver(ev.message, result);
  }
  now_ = end;
  return result;
}

void VirtualBus::write_trace_csv(std::ostream& out) const {
  out << "send_time,deliver_time,kind,segment_id,deadline_missed\n" << std::setprecision(10);
  for (const auto& m : trace_)
    out << m.send_time << ',' << m.deliver_time << ',' << to_string(m.kind) << ',' << m.segment_id
        << ',' << (m.deadline_missed ? 1 : 0) << "\n";
}

std::vector<double> sample_round_trips(const BusModel& model, std::size_t n_segments,
                                       std::size_t samples, std::uint64_t seed) {
  VirtualBus bus(model, n_segments, seed);
  bus.set_trace_enabled(false);
  std::vector<double> out;
  std::size_t seen = 0;
  while (out.size() < samples) {
    bus.advance(model.period_ms());
    const auto& trips = bus.round_trips();
    for (; seen < trips.size(); ++seen)
      if (trips[seen].first == n_segments - 1) out.push_back(trips[seen].second);
  }
  out.resize(samples);
  return out;
}

int count_deadline_misses(const BusModel& model, std::size_t n_segments, std::size_t cycles,
                          std::uint64_t seed) {
  VirtualBus bus(model, n_segments, seed);
  bus.set_trace_enabled(false);
  int misses = 0;
  // Run past the last cycle so its replies land, but only count cycles < `cycles`.
  const double horizon = static_cast<double>(cycles) * model.period_ms() + 4 * rtt(model, n_segments);
  while (bus.now() < horizon) {
    for (const auto& m : bus.advance(model.period_ms()).delivered)
      if (m.deadline_missed && m.cycle < cycles) ++misses;
  }
  return misses;
}

}  // namespace screwsnake
