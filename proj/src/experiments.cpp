#include "screwsnake/experiments.hpp"

#include <cmath>

namespace screwsnake {

namespace {

LogRow make_row(const Simulator& sim, const StepResult* r) {
  LogRow row;
  row.t = sim.time();
  row.state = sim.state();
  row.reference = reference_pose(sim.geometry(), sim.state());
  const std::size_t n = sim.geometry().n_segments;
  if (r) {
    row.realized = r->realized;
    row.omegas = r->omegas;
  } else {
    row.realized.assign(n, SegmentVelocity{});
    row.omegas = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  }
  return row;
}

template <typename Stop>
OpenLoopRun run(Simulator& sim, const SimCommand& cmd, double max_duration, Stop stop) {
  OpenLoopRun out;
  out.log = TrajectoryLog(sim.settings().dt, sim.geometry().n_segments);
  out.log.append(make_row(sim, nullptr));
  const auto steps = static_cast<long>(std::llround(max_duration / sim.settings().dt));
  for (long i = 0; i < steps; ++i) {
    const StepResult r = sim.advance(cmd);
    if (r.saturated) ++out.saturated_steps;
    out.log.append(make_row(sim, &r));
    if (stop(out.log)) break;
  }
  return out;
}

}  // namespace

OpenLoopRun run_open_loop(Simulator& sim, const SimCommand& cmd, double duration) {
  return run(sim, cmd, duration, [](const TrajectoryLog&) { return false; });
}

OpenLoopRun run_until_swept(Simulator& sim, const SimCommand& cmd, double sweep,
                            double max_duration) {
  double total = 0.0;
  return run(sim, cmd, max_duration, [&](const TrajectoryLog& log) {
    const auto& rows = log.rows();
    total += wrap_angle(rows.back().reference.heading - rows[rows.size() - 2].reference.heading);
    return std::abs(total) >= sweep;
  });
}

PoseState mconfig_initial_state(const ChainGeometry& geom, double theta_m) {
  PoseState s;
  s.mode = Mode::MConfig;
  s.joints = JointState::from_angles(mconfig_joint_angles(geom, theta_m));
  return s;
}

TunnelingTurnResult tunneling_turn(const ChainGeometry& geom, const TerrainProfile& terrain,
                                   double radius, const SimSettings& settings,
                                   double speed_fraction) {
  const TunnelingSetpoints sp =
      tunneling_setpoints(geom, {TurnRadius::of(radius), speed_fraction});
  PoseState init;
  init.mode = Mode::Tunneling;
  init.joints = JointState::from_angles(sp.joint_angles);
  Simulator sim(geom, terrain, settings, init);
  const double speed = std::abs(speed_fraction) * terrain.kappa_axial * geom.v_lead_max;
  if (!(speed > 0)) throw InvalidInput("terrain gives no axial propulsion for tunneling");
  const double max_duration = 1.5 * 2 * kPi<double> * std::abs(radius) / speed;
  const OpenLoopRun r = run_until_swept(sim, {sp.joint_angles, sp.screw_omegas},
                                        2 * kPi<double>, max_duration);
  const TurnRadiusFit fit = fit_turn_radius(r.log);
  TunnelingTurnResult out;
  out.commanded = radius;
  out.theta = sp.joint_angles[0];
  out.fitted = fit.radius;
  out.error = std::abs(fit.radius - std::abs(radius));
  out.rms = fit.rms;
  return out;
}

double mconfig_mean_speed(const ChainGeometry& geom, const TerrainProfile& terrain, double theta_m,
                          const SimSettings& settings, double duration, double base_speed) {
  const MConfigSetpoints sp = mconfig_setpoints(geom, theta_m, TurnRadius::straight(), base_speed);
  Simulator sim(geom, terrain, settings, mconfig_initial_state(geom, theta_m));
  const OpenLoopRun r = run_open_loop(sim, {sp.joint_angles, sp.screw_omegas}, duration);
  const PlanarFrame<double>& a = r.log.rows().front().reference;
  const PlanarFrame<double>& b = r.log.rows().back().reference;
  const Eigen::Vector2d x_axis(std::cos(a.heading), std::sin(a.heading));
  return x_axis.dot(b.origin - a.origin) / duration;
}

MConfigTurnResult mconfig_turn(const ChainGeometry& geom, const TerrainProfile& terrain,
                               double theta_m, double radius, const SimSettings& settings,
                               double base_speed, double max_duration) {
  const MConfigSetpoints sp = mconfig_setpoints(geom, theta_m, TurnRadius::of(radius), base_speed);
  Simulator sim(geom, terrain, settings, mconfig_initial_state(geom, theta_m));
  const OpenLoopRun r =
      run_until_swept(sim, {sp.joint_angles, sp.screw_omegas}, 2 * kPi<double>, max_duration);
  const TurnRadiusFit fit = fit_turn_radius(r.log);
  MConfigTurnResult out;
  out.target = radius;
  out.fitted = fit.radius;
  out.error = std::abs(fit.radius - std::abs(radius));
  out.rms = fit.rms;
  out.swept = fit.swept;
  return out;
}

}  // namespace screwsnake
