#include "screwsnake/teleop.hpp"

#include "screwsnake/mconfig.hpp"

#include <algorithm>
#include <cmath>

namespace screwsnake {

using nlohmann::json;

namespace {

double number_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ProtocolError("bad_frame", std::string("missing field '") + key + "'");
  if (it->is_null()) throw ProtocolError("non_finite", std::string("field '") + key + "' is not finite");
  if (!it->is_number()) throw ProtocolError("bad_frame", std::string("field '") + key + "' must be a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw ProtocolError("non_finite", std::string("field '") + key + "' is not finite");
  return v;
}

struct Prepared {
  std::uint64_t seq = 0;
  Mode mode = Mode::Teleop;
  std::vector<SetpointPayload> setpoints;
  std::vector<bool> flags;
};

Prepared prepare(const RuntimeConfig& cfg, Mode current, const TeleopFrame& frame) {
  const ChainGeometry& g = cfg.geom;
  const std::size_t n = g.n_segments;
  const std::size_t nj = g.n_joints();
  Prepared p;
  p.seq = frame.seq;
  p.mode = frame.mode.value_or(current);
  if (!std::isfinite(frame.screw)) throw ProtocolError("non_finite", "screw fraction is not finite");
  if (frame.screw < -1.0 || frame.screw > 1.0)
    throw ProtocolError("bad_frame", "screw fraction must lie in [-1, 1]");
  ClampResult c;
  try {
    c = clamp(frame, cfg.policy);
  } catch (const InvalidInput& e) {
    throw ProtocolError("non_finite", e.what());
  }
  p.setpoints.assign(n, SetpointPayload{});
  switch (p.mode) {
    case Mode::Teleop: {
      if (c.joints.size() != nj)
        throw ProtocolError("bad_frame", "TELEOP frames need " + std::to_string(nj) + " joints");
      for (std::size_t k = 0; k < nj; ++k) {
        p.setpoints[k].yaw = c.joints[k].yaw;
        p.setpoints[k].pitch = c.joints[k].pitch;
      }
      for (std::size_t i = 0; i < n; ++i)
        p.setpoints[i].screw_omega = g.handedness[i] * frame.screw * g.omega_max;
      break;
    }
    case Mode::Tunneling: {
      const double d = c.joints.empty() ? 0.0 : c.joints[0].yaw;
      for (std::size_t k = 0; k < nj; ++k) p.setpoints[k].yaw = d;
      for (std::size_t i = 0; i < n; ++i)
        p.setpoints[i].screw_omega = g.handedness[i] * frame.screw * g.omega_max;
      break;
    }
    case Mode::MConfig: {
      const double d = c.joints.empty() ? 0.0 : std::abs(c.joints[0].yaw);
      const TurnRadius r = frame.radius_m ? TurnRadius::of(*frame.radius_m) : TurnRadius::straight();
      MConfigSetpoints sp;
      try {
        sp = mconfig_setpoints(g, kPi<double> - d, r, frame.screw);
      } catch (const UnsupportedConfiguration& e) {
        throw ProtocolError("unsupported", e.what());
      } catch (const InvalidInput& e) {
        throw ProtocolError("bad_frame", e.what());
      }
      for (std::size_t k = 0; k < nj; ++k)
        p.setpoints[k].yaw = deflection_of(sp.joint_angles[static_cast<Eigen::Index>(k)]);
      for (std::size_t i = 0; i < n; ++i)
        p.setpoints[i].screw_omega = sp.screw_omegas[static_cast<Eigen::Index>(i)];
      break;
    }
    case Mode::Conforming:
      throw ProtocolError("unsupported", "corridor conforming is not available over teleop");
  }
  p.flags = c.flags;
  return p;
}

}  // namespace

void validate(const ClampPolicy& p) {
  if (!(p.device_limit > 0)) throw InvalidInput("device_limit must be positive");
  if (!(p.device_limit < p.joint_limit)) throw InvalidInput("device_limit must be below joint_limit");
}

bool ClampResult::any() const { return std::find(flags.begin(), flags.end(), true) != flags.end(); }

ClampResult clamp(const TeleopFrame& frame, const ClampPolicy& policy) {
  validate(policy);
  ClampResult out;
  const double lim = policy.device_limit;
  for (const auto& j : frame.joints) {
    if (!std::isfinite(j.pitch) || !std::isfinite(j.yaw))
      throw InvalidInput("frame " + std::to_string(frame.seq) + " carries a non-finite joint angle");
    const JointCommand c{std::clamp(j.pitch, -lim, lim), std::clamp(j.yaw, -lim, lim)};
    out.flags.push_back(c.pitch != j.pitch);
    out.flags.push_back(c.yaw != j.yaw);
    out.joints.push_back(c);
  }
  return out;
}

TeleopFrame parse_frame(const json& m) {
  if (!m.is_object()) throw ProtocolError("bad_frame", "message must be an object");
  auto type = m.find("type");
  if (type == m.end() || !type->is_string()) throw ProtocolError("bad_frame", "missing message type");
  if (*type != "frame") throw ProtocolError("bad_type", "unexpected message type " + type->dump());
  TeleopFrame f;
  auto seq = m.find("seq");
  if (seq == m.end() || !seq->is_number_integer() || seq->get<std::int64_t>() < 0)
    throw ProtocolError("bad_frame", "seq must be a non-negative integer");
  f.seq = seq->get<std::uint64_t>();
  f.t_ms = number_field(m, "t_ms");
  auto joints = m.find("joints");
  if (joints == m.end() || !joints->is_array()) throw ProtocolError("bad_frame", "joints must be an array");
  for (const auto& j : *joints) {
    if (!j.is_object()) throw ProtocolError("bad_frame", "joint entries must be objects");
    f.joints.push_back({number_field(j, "pitch_rad"), number_field(j, "yaw_rad")});
  }
  f.screw = number_field(m, "screw");
  auto mode = m.find("mode");
  if (mode != m.end() && !mode->is_null()) {
    if (!mode->is_string()) throw ProtocolError("bad_frame", "mode must be a string");
    const std::string name = mode->get<std::string>();
    if (name != "TUNNELING" && name != "M_CONFIG" && name != "TELEOP")
      throw ProtocolError("bad_frame", "mode must be TUNNELING, M_CONFIG or TELEOP");
    f.mode = mode_from_string(name);
  }
  auto radius = m.find("radius_m");
  if (radius != m.end() && !radius->is_null()) f.radius_m = number_field(m, "radius_m");
  return f;
}

json to_json(const TeleopFrame& f) {
  json joints = json::array();
  for (const auto& j : f.joints) joints.push_back({{"pitch_rad", j.pitch}, {"yaw_rad", j.yaw}});
  json m = {{"type", "frame"}, {"seq", f.seq}, {"t_ms", f.t_ms}, {"joints", joints}, {"screw", f.screw}};
  if (f.mode) m["mode"] = to_string(*f.mode);
  if (f.radius_m) m["radius_m"] = *f.radius_m;
  return m;
}

json to_json(const StateUpdate& s) {
  json joints = json::array();
  for (const auto& j : s.joints) joints.push_back({{"pitch_rad", j.pitch}, {"yaw_rad", j.yaw}});
  json speeds = json::array();
  for (const auto& v : s.speeds) speeds.push_back({{"axial_mps", v.axial}, {"radial_mps", v.radial}});
  return {{"type", "state"},
          {"t_ms", s.t_ms},
          {"pose", {{"x", s.x}, {"y", s.y}, {"psi", s.psi}}},
          {"joints", joints},
          {"clamped", s.clamped},
          {"speeds", speeds},
          {"misses", s.misses},
          {"mode", to_string(s.mode)},
          {"hold", s.hold},
          {"drops", s.drops},
          {"seq", s.seq}};
}

StateUpdate parse_state(const json& m) {
  if (!m.is_object() || m.value("type", "") != "state") throw ProtocolError("bad_type", "not a state message");
  StateUpdate s;
  s.t_ms = m.at("t_ms").get<double>();
  s.x = m.at("pose").at("x").get<double>();
  s.y = m.at("pose").at("y").get<double>();
  s.psi = m.at("pose").at("psi").get<double>();
  for (const auto& j : m.at("joints")) s.joints.push_back({j.at("pitch_rad").get<double>(), j.at("yaw_rad").get<double>()});
  s.clamped = m.at("clamped").get<std::vector<bool>>();
  for (const auto& v : m.at("speeds")) s.speeds.push_back({v.at("axial_mps").get<double>(), v.at("radial_mps").get<double>()});
  s.misses = m.at("misses").get<int>();
  s.mode = mode_from_string(m.value("mode", "TELEOP"));
  s.hold = m.value("hold", false);
  s.drops = m.value("drops", std::uint64_t{0});
  s.seq = m.value("seq", std::uint64_t{0});
  return s;
}

json error_message(const std::string& code, const std::string& detail) {
  return {{"type", "error"}, {"code", code}, {"detail", detail}};
}

json policy_message(const ClampPolicy& p, std::size_t n_joints, double loop_rate, double state_rate) {
  return {{"type", "policy"},
          {"device_limit_rad", p.device_limit},
          {"joint_limit_rad", p.joint_limit},
          {"n_joints", n_joints},
          {"loop_rate_hz", loop_rate},
          {"state_rate_hz", state_rate}};
}

// ---------------------------------------------------------------------------

namespace {

SimSettings runtime_sim_settings(const RuntimeConfig& c) {
  SimSettings s;
  s.dt = c.bus.period_ms() / 1000.0;
  s.velocity_noise_sd = c.velocity_noise_sd;
  s.seed = c.seed;
  return s;
}

PoseState runtime_initial_state(const RuntimeConfig& c) {
  PoseState s;
  s.mode = Mode::Teleop;
  s.joints = JointState::straight(c.geom.n_joints());
  return s;
}

}  // namespace

TeleopRuntime::TeleopRuntime(RuntimeConfig config)
    : config_(std::move(config)),
      bus_(config_.bus, config_.geom.n_segments, config_.seed),
      sim_(config_.geom, config_.terrain, runtime_sim_settings(config_), runtime_initial_state(config_)) {
  validate(config_.policy);
  bus_.set_trace_enabled(false);
  if (config_.policy.joint_limit > config_.geom.joint_limit + 1e-12)
    throw InvalidInput("clamp policy joint limit exceeds the robot's joint limit");
  if (config_.state_every_ticks < 1) throw InvalidInput("state_every_ticks must be at least 1");
  if (!(config_.hold_after_ms > 0)) throw InvalidInput("hold_after_ms must be positive");
  clamp_flags_.assign(2 * config_.geom.n_joints(), false);
  last_speeds_.assign(config_.geom.n_segments, SegmentVelocity{});
}

bool TeleopRuntime::connect(int client) {
  if (pilot_ && *pilot_ != client) return false;
  pilot_ = client;
  last_frame_ms_ = bus_.now();
  return true;
}

void TeleopRuntime::disconnect(int client) {
  if (pilot_ && *pilot_ == client) {
    pilot_.reset();
    pending_.reset();
    hold_ = true;
  }
}

SubmitResult TeleopRuntime::submit(int client, const TeleopFrame& frame) {
  if (!pilot_ || *pilot_ != client) return {SubmitStatus::Rejected, "occupied", "another pilot holds the session"};
  if (have_seq_ && frame.seq <= last_seq_) {
    ++drops_;
    return {SubmitStatus::Dropped, "stale", "seq " + std::to_string(frame.seq) + " does not advance past " +
                                                std::to_string(last_seq_)};
  }
  const Mode base = pending_ && pending_->mode ? *pending_->mode : mode_;
  TeleopFrame resolved = frame;
  resolved.mode = frame.mode.value_or(base);
  try {
    (void)prepare(config_, base, resolved);
  } catch (const ProtocolError& e) {
    return {SubmitStatus::Rejected, e.code(), e.what()};
  }
  last_seq_ = frame.seq;
  have_seq_ = true;
  last_frame_ms_ = bus_.now();
  pending_ = resolved;
  return {};
}

void TeleopRuntime::apply(const TeleopFrame& frame) {
  const Prepared p = prepare(config_, mode_, frame);
  for (std::size_t k = 0; k < p.setpoints.size(); ++k) bus_.command(k, p.setpoints[k]);
  if (p.mode != mode_) {
    mode_ = p.mode;
    sim_.set_mode(mode_);
  }
  clamp_flags_ = p.flags;
  clamp_flags_.resize(2 * config_.geom.n_joints(), false);
  applied_seq_ = p.seq;
  ++applied_;
  hold_ = false;
  pending_latency_cycle_ = bus_.cycles();
  latency_replies_.clear();
}

std::optional<StateUpdate> TeleopRuntime::tick() {
  if (pending_) {
    apply(*pending_);
    pending_.reset();
  }
  if (!pilot_ || bus_.now() - last_frame_ms_ > config_.hold_after_ms) hold_ = true;

  const TickResult r = bus_.advance(config_.bus.period_ms());
  if (pending_latency_cycle_) {
    for (const auto& m : r.delivered) {
      if (m.kind == MessageKind::Sensor && m.cycle == *pending_latency_cycle_)
        latency_replies_.push_back(m.deliver_time);
    }
    if (latency_replies_.size() == bus_.size()) {
      const double start = static_cast<double>(*pending_latency_cycle_) * config_.bus.period_ms();
      last_latency_ = *std::max_element(latency_replies_.begin(), latency_replies_.end()) - start;
      pending_latency_cycle_.reset();
    }
  }

  const auto& sensors = bus_.latest_sensors();
  const std::size_t n = config_.geom.n_segments;
  SimCommand cmd;
  cmd.joint_targets.resize(static_cast<Eigen::Index>(config_.geom.n_joints()));
  cmd.screw_omegas.resize(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k + 1 < n; ++k)
    cmd.joint_targets[static_cast<Eigen::Index>(k)] = angle_from_deflection(sensors[k].yaw);
  for (std::size_t i = 0; i < n; ++i) cmd.screw_omegas[static_cast<Eigen::Index>(i)] = sensors[i].screw_omega;
  last_speeds_ = sim_.advance(cmd).realized;

  ++ticks_;
  if (ticks_ % static_cast<std::uint64_t>(config_.state_every_ticks) == 0) return snapshot();
  return std::nullopt;
}

StateUpdate TeleopRuntime::snapshot() const {
  StateUpdate s;
  const PoseState& st = sim_.state();
  s.t_ms = bus_.now();
  s.x = st.x;
  s.y = st.y;
  s.psi = st.psi;
  const auto& sensors = bus_.latest_sensors();
  for (std::size_t k = 0; k < config_.geom.n_joints(); ++k)
    s.joints.push_back({sensors[k].pitch, deflection_of(st.joints.planar[static_cast<Eigen::Index>(k)])});
  s.clamped = clamp_flags_;
  s.speeds = last_speeds_;
  s.misses = bus_.deadline_misses();
  s.mode = mode_;
  s.hold = hold_;
  s.drops = drops_;
  s.seq = applied_seq_;
  return s;
}

}  // namespace screwsnake
