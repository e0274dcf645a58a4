#include "screwsnake/scenario.hpp"

#include "screwsnake/mconfig.hpp"
#include "screwsnake/tunneling.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace screwsnake {

using nlohmann::json;

namespace {

constexpr double kDeg = kPi<double> / 180.0;

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

double number(const json& obj, const std::string& path, const std::string& key, double fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) throw ConfigError(join(path, key), "must be a number");
  return it->get<double>();
}

double required_number(const json& obj, const std::string& path, const std::string& key) {
  if (!obj.contains(key)) throw ConfigError(join(path, key), "is required");
  return number(obj, path, key, 0.0);
}

Eigen::Vector2d point(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(path, "must be an [x, y] pair of numbers");
  return {v[0].get<double>(), v[1].get<double>()};
}

ChainGeometry parse_geometry(const json& g, const std::string& path) {
  check_keys(g, path, {"n_segments", "l", "r_s", "v_lead_max", "omega_max", "joint_limit_deg", "handedness"});
  ChainGeometry geom;
  if (g.contains("n_segments")) {
    const json& n = g["n_segments"];
    if (!n.is_number_integer() || n.get<std::int64_t>() < 1) throw ConfigError(join(path, "n_segments"), "must be a positive integer");
    geom = ChainGeometry::with_segments(n.get<std::size_t>());
  }
  geom.l = number(g, path, "l", geom.l);
  geom.r_s = number(g, path, "r_s", geom.r_s);
  geom.v_lead_max = number(g, path, "v_lead_max", geom.v_lead_max);
  geom.omega_max = number(g, path, "omega_max", geom.omega_max);
  geom.joint_limit = number(g, path, "joint_limit_deg", geom.joint_limit / kDeg) * kDeg;
  if (g.contains("handedness")) {
    const json& h = g["handedness"];
    if (!h.is_array()) throw ConfigError(join(path, "handedness"), "must be an array of +1/-1");
    geom.handedness.clear();
    for (const auto& v : h) {
      if (!v.is_number_integer()) throw ConfigError(join(path, "handedness"), "entries must be +1 or -1");
      geom.handedness.push_back(v.get<int>());
    }
  }
  try {
    validate(geom);
  } catch (const InvalidInput& e) {
    throw ConfigError(path, e.what());
  }
  return geom;
}

TerrainProfile parse_terrain(const json& t, const std::string& path, const std::filesystem::path& config_dir) {
  try {
    if (t.is_string()) return resolve_terrain(t.get<std::string>(), config_dir);
    check_keys(t, path, {"name", "kappa_axial", "slip", "lateral_damping", "provenance"});
    TerrainProfile p;
    p.name = t.value("name", "inline");
    p.kappa_axial = required_number(t, path, "kappa_axial");
    p.slip = required_number(t, path, "slip");
    p.lateral_damping = number(t, path, "lateral_damping", 0.0);
    p.provenance = t.value("provenance", "inline scenario terrain");
    validate(p);
    return p;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
}

CorridorSpec parse_corridor(const json& c, const std::string& path) {
  check_keys(c, path, {"preset", "width", "robot_diameter", "start", "heading_deg", "pieces", "points", "incline_deg"});
  CorridorSpec spec;
  if (c.contains("preset")) {
    if (c["preset"] != "zigzag_incline") throw ConfigError(join(path, "preset"), "unknown preset (expected zigzag_incline)");
    spec = zigzag_incline_corridor();
  } else if (c.contains("points")) {
    const json& pts = c["points"];
    if (!pts.is_array()) throw ConfigError(join(path, "points"), "must be an array");
    for (std::size_t i = 0; i < pts.size(); ++i)
      spec.centerline.push_back(point(pts[i], join(path, "points") + "[" + std::to_string(i) + "]"));
    if (c.contains("incline_deg")) {
      const json& inc = c["incline_deg"];
      if (inc.is_number()) {
        spec.incline_deg.assign(spec.centerline.size() > 0 ? spec.centerline.size() - 1 : 0, inc.get<double>());
      } else if (inc.is_array()) {
        for (const auto& v : inc) {
          if (!v.is_number()) throw ConfigError(join(path, "incline_deg"), "entries must be numbers");
          spec.incline_deg.push_back(v.get<double>());
        }
      } else {
        throw ConfigError(join(path, "incline_deg"), "must be a number or an array");
      }
    }
  } else if (c.contains("pieces")) {
    const Eigen::Vector2d start = c.contains("start") ? point(c["start"], join(path, "start")) : Eigen::Vector2d::Zero();
    CorridorBuilder b(start, number(c, path, "heading_deg", 0.0) * kDeg, 0.22);
    const json& pieces = c["pieces"];
    if (!pieces.is_array()) throw ConfigError(join(path, "pieces"), "must be an array");
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      const std::string pp = join(path, "pieces") + "[" + std::to_string(i) + "]";
      const json& p = pieces[i];
      check_keys(p, pp, {"straight", "arc_radius", "angle_deg", "incline_deg"});
      const double incline = number(p, pp, "incline_deg", 0.0);
      if (p.contains("straight")) {
        b.straight(required_number(p, pp, "straight"), incline);
      } else if (p.contains("arc_radius")) {
        b.arc(required_number(p, pp, "arc_radius"), required_number(p, pp, "angle_deg") * kDeg, incline);
      } else {
        throw ConfigError(pp, "needs either 'straight' or 'arc_radius'");
      }
    }
    spec = b.build();
  } else {
    throw ConfigError(path, "needs 'preset', 'points' or 'pieces'");
  }
  spec.width = number(c, path, "width", spec.width);
  spec.robot_diameter = number(c, path, "robot_diameter", spec.robot_diameter);
  try {
    validate(spec);
  } catch (const InvalidInput& e) {
    throw ConfigError(path, e.what());
  }
  return spec;
}

ScheduledCommand parse_command(const json& c, const std::string& path) {
  check_keys(c, path, {"t", "radius_m", "speed", "theta_m_deg", "joints_deg"});
  ScheduledCommand out;
  out.t = number(c, path, "t", 0.0);
  if (c.contains("radius_m") && !c["radius_m"].is_null()) {
    if (!c["radius_m"].is_number()) throw ConfigError(join(path, "radius_m"), "must be a number or null");
    out.radius_m = c["radius_m"].get<double>();
  }
  out.speed = number(c, path, "speed", 0.0);
  if (!(out.speed >= -1.0 && out.speed <= 1.0)) throw ConfigError(join(path, "speed"), "must lie in [-1, 1]");
  out.theta_m_deg = number(c, path, "theta_m_deg", out.theta_m_deg);
  if (c.contains("joints_deg")) {
    const json& j = c["joints_deg"];
    if (!j.is_array()) throw ConfigError(join(path, "joints_deg"), "must be an array of numbers");
    for (const auto& v : j) {
      if (!v.is_number()) throw ConfigError(join(path, "joints_deg"), "must be an array of numbers");
      out.joints_deg.push_back(v.get<double>());
    }
  }
  return out;
}

}  // namespace

Scenario parse_scenario(const json& doc, const std::filesystem::path& config_dir) {
  check_keys(doc, "", {"name", "mode", "geometry", "terrain", "dt", "duration", "seed", "noise_sd",
                       "incline_deg", "joint_rate_limit", "start_in_pose", "initial",
                       "commands", "corridor", "stop_at_exit"});
  Scenario s;
  s.name = doc.value("name", s.name);
  if (!doc.contains("mode") || !doc["mode"].is_string()) throw ConfigError("mode", "is required (TUNNELING, M_CONFIG, CONFORMING or TELEOP)");
  try {
    s.mode = mode_from_string(doc["mode"].get<std::string>());
  } catch (const InvalidInput& e) {
    throw ConfigError("mode", e.what());
  }
  if (doc.contains("geometry")) s.geometry = parse_geometry(doc["geometry"], "geometry");
  if (doc.contains("terrain")) s.terrain = parse_terrain(doc["terrain"], "terrain", config_dir);
  s.settings.dt = number(doc, "", "dt", s.settings.dt);
  s.duration = number(doc, "", "duration", s.duration);
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_integer() || doc["seed"].get<std::int64_t>() < 0)
      throw ConfigError("seed", "must be a non-negative integer");
    s.settings.seed = doc["seed"].get<std::uint64_t>();
  }
  s.settings.velocity_noise_sd = number(doc, "", "noise_sd", 0.0);
  s.settings.incline_deg = number(doc, "", "incline_deg", 0.0);
  s.settings.joint_rate_limit = number(doc, "", "joint_rate_limit", s.settings.joint_rate_limit);
  try {
    validate(s.settings);
  } catch (const InvalidInput& e) {
    throw ConfigError("dt/noise_sd/incline_deg/joint_rate_limit", e.what());
  }
  if (!(s.duration >= 0) || !std::isfinite(s.duration)) throw ConfigError("duration", "must be a non-negative number of seconds");
  if (doc.contains("start_in_pose")) {
    if (!doc["start_in_pose"].is_boolean()) throw ConfigError("start_in_pose", "must be true or false");
    s.start_in_pose = doc["start_in_pose"].get<bool>();
  }
  if (doc.contains("stop_at_exit")) {
    if (!doc["stop_at_exit"].is_boolean()) throw ConfigError("stop_at_exit", "must be true or false");
    s.stop_at_exit = doc["stop_at_exit"].get<bool>();
  }
  if (doc.contains("initial")) {
    const json& i = doc["initial"];
    check_keys(i, "initial", {"x", "y", "psi_deg"});
    s.x0 = number(i, "initial", "x", 0.0);
    s.y0 = number(i, "initial", "y", 0.0);
    s.psi0 = wrap_angle(number(i, "initial", "psi_deg", 0.0) * kDeg);
  }
  if (doc.contains("commands")) {
    const json& cmds = doc["commands"];
    if (!cmds.is_array()) throw ConfigError("commands", "must be an array");
    for (std::size_t i = 0; i < cmds.size(); ++i) {
      const std::string path = "commands[" + std::to_string(i) + "]";
      s.commands.push_back(parse_command(cmds[i], path));
      if (i == 0 && s.commands[0].t != 0.0) throw ConfigError(path + ".t", "the first command must start at t = 0");
      if (i > 0 && !(s.commands[i].t > s.commands[i - 1].t))
        throw ConfigError(path + ".t", "command times must increase");
    }
  }
  if (doc.contains("corridor")) s.corridor = parse_corridor(doc["corridor"], "corridor");
  if (s.mode == Mode::Conforming && !s.corridor) throw ConfigError("corridor", "is required in CONFORMING mode");
  for (std::size_t i = 0; i < s.commands.size(); ++i) {
    try {
      (void)to_sim_command(s, s.commands[i]);
    } catch (const ConfigError& e) {
      throw ConfigError("commands[" + std::to_string(i) + "]." + e.path(), e.detail());
    } catch (const Error& e) {
      throw ConfigError("commands[" + std::to_string(i) + "]", e.what());
    }
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path, const std::filesystem::path& config_dir) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open scenario file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), std::string("not valid JSON: ") + e.what());
  }
  return parse_scenario(doc, config_dir);
}

const ScheduledCommand& command_at(const Scenario& s, double t) {
  static const ScheduledCommand idle{};
  if (s.commands.empty()) return idle;
  std::size_t k = 0;
  while (k + 1 < s.commands.size() && s.commands[k + 1].t <= t + 1e-12) ++k;
  return s.commands[k];
}

SimCommand to_sim_command(const Scenario& s, const ScheduledCommand& c) {
  const ChainGeometry& g = s.geometry;
  const auto nj = static_cast<Eigen::Index>(g.n_joints());
  const TurnRadius radius = c.radius_m ? TurnRadius::of(*c.radius_m) : TurnRadius::straight();
  SimCommand out;
  switch (s.mode) {
    case Mode::Tunneling: {
      const TunnelingSetpoints sp = tunneling_setpoints(g, {radius, c.speed});
      return {sp.joint_angles, sp.screw_omegas};
    }
    case Mode::MConfig: {
      const MConfigSetpoints sp = mconfig_setpoints(g, c.theta_m_deg * kDeg, radius, c.speed);
      return {sp.joint_angles, sp.screw_omegas};
    }
    case Mode::Conforming:
    case Mode::Teleop: {
      out.screw_omegas.resize(static_cast<Eigen::Index>(g.n_segments));
      for (std::size_t i = 0; i < g.n_segments; ++i)
        out.screw_omegas[static_cast<Eigen::Index>(i)] = g.handedness[i] * c.speed * g.omega_max;
      if (s.mode == Mode::Conforming) return out;
      if (c.joints_deg.size() != static_cast<std::size_t>(nj))
        throw ConfigError("joints_deg", "TELEOP commands need one deflection per joint");
      out.joint_targets.resize(nj);
      for (Eigen::Index k = 0; k < nj; ++k) {
        const double d = c.joints_deg[static_cast<std::size_t>(k)] * kDeg;
        if (std::abs(d) > g.joint_limit + 1e-12) throw ConfigError("joints_deg", "deflection exceeds the joint limit");
        out.joint_targets[k] = angle_from_deflection(d);
      }
      return out;
    }
  }
  return out;
}

ScenarioResult run_scenario(const Scenario& s) {
  std::vector<SimCommand> cache;
  for (const auto& c : s.commands) cache.push_back(to_sim_command(s, c));
  SimCommand idle;
  idle.screw_omegas = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.geometry.n_segments));

  PoseState init;
  init.mode = s.mode;
  init.x = s.x0;
  init.y = s.y0;
  init.psi = s.psi0;
  init.joints = JointState::straight(s.geometry.n_joints());
  if (s.start_in_pose && !cache.empty() && cache[0].joint_targets.size() != 0)
    init.joints = JointState::from_angles(cache[0].joint_targets);
  Simulator sim(s.geometry, s.terrain, s.settings, init, s.corridor);

  ScenarioResult out;
  out.log = TrajectoryLog(s.settings.dt, s.geometry.n_segments);
  const auto steps = static_cast<long>(std::llround(s.duration / s.settings.dt));
  auto row_of = [&](const StepResult* r) {
    LogRow row;
    row.t = sim.time();
    row.state = sim.state();
    row.reference = reference_pose(sim.geometry(), sim.state());
    if (r) {
      row.realized = r->realized;
      row.omegas = r->omegas;
    } else {
      row.realized.assign(s.geometry.n_segments, SegmentVelocity{});
      row.omegas = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.geometry.n_segments));
    }
    return row;
  };

  int saturated_steps = 0;
  double path_length = 0.0;
  std::optional<double> exit_time;
  if (steps > 0) out.log.append(row_of(nullptr));
  std::size_t k = 0;
  for (long i = 0; i < steps; ++i) {
    const double t = sim.time();
    while (k + 1 < s.commands.size() && s.commands[k + 1].t <= t + 1e-12) ++k;
    const SimCommand& cmd = cache.empty() ? idle : cache[k];
    const Eigen::Vector2d before = out.log.rows().back().reference.origin;
    const StepResult r = sim.advance(cmd);
    if (r.saturated) ++saturated_steps;
    out.log.append(row_of(&r));
    path_length += (out.log.rows().back().reference.origin - before).norm();
    if (s.corridor && s.mode == Mode::Conforming && sim.corridor_status().reached_exit) {
      exit_time = sim.time();
      if (s.stop_at_exit) break;
    }
  }

  json summary;
  summary["name"] = s.name;
  summary["mode"] = to_string(s.mode);
  summary["terrain"] = s.terrain.name;
  summary["dt"] = s.settings.dt;
  summary["seed"] = s.settings.seed;
  summary["duration"] = sim.time();
  summary["steps"] = out.log.empty() ? 0 : out.log.size() - 1;
  summary["saturated_steps"] = saturated_steps;
  const PlanarFrame<double> final_ref = reference_pose(sim.geometry(), sim.state());
  summary["final_pose"] = {{"x", final_ref.origin.x()}, {"y", final_ref.origin.y()}, {"psi", final_ref.heading}};
  summary["path_length"] = path_length;
  summary["mean_speed"] = sim.time() > 0 ? path_length / sim.time() : 0.0;
  if (!out.log.empty()) {
    const auto& a = out.log.rows().front().reference;
    const auto& b = out.log.rows().back().reference;
    summary["displacement"] = (b.origin - a.origin).norm();
    summary["swept_heading_deg"] = swept_heading(out.log) / kDeg;
  } else {
    summary["displacement"] = 0.0;
    summary["swept_heading_deg"] = 0.0;
  }
  summary["fitted_radius"] = nullptr;
  summary["fit_rms"] = nullptr;
  if (!out.log.empty() && std::abs(swept_heading(out.log)) >= kPi<double> / 2) {
    const TurnRadiusFit fit = fit_turn_radius(out.log);
    summary["fitted_radius"] = fit.radius;
    summary["fit_rms"] = fit.rms;
  }
  if (s.corridor) {
    const CorridorStatus& cs = sim.corridor_status();
    summary["corridor"] = {{"length", s.corridor->length()},
                           {"reached_exit", cs.reached_exit},
                           {"exit_time", exit_time ? json(*exit_time) : json(nullptr)},
                           {"wall_violations", cs.wall_violations},
                           {"max_wall_excess", cs.max_wall_excess},
                           {"head_arc_length", cs.head_arc_length}};
  }
  out.summary = summary;
  return out;
}

}  // namespace screwsnake
