#include "screwsnake/corridor.hpp"
#include "screwsnake/experiments.hpp"
#include "screwsnake/locomotion.hpp"
#include "screwsnake/mconfig.hpp"
#include "screwsnake/tunneling.hpp"
#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace screwsnake;
using namespace test;

namespace {

PoseState straight_pose() {
  PoseState s;
  s.joints = JointState::straight(3);
  return s;
}

SimCommand tunneling_command(const ChainGeometry& g, TurnRadius r, double speed) {
  const auto sp = tunneling_setpoints(g, {r, speed});
  return {sp.joint_angles, sp.screw_omegas};
}

}  // namespace

TEST_CASE("straight tunneling at full rate covers the lead speed") {
  const ChainGeometry g;
  Simulator sim(g, ideal_screw_medium(), {}, straight_pose());
  const SimCommand cmd = tunneling_command(g, TurnRadius::straight(), 1.0);
  for (int k = 0; k < 100; ++k) sim.advance(cmd);
  CHECK(sim.state().x == doctest::Approx(0.23).epsilon(1e-9));
  CHECK(std::abs(sim.state().y) < 1e-12);
  CHECK(std::abs(sim.state().psi) < 1e-12);
}

TEST_CASE("zero commands leave the pose unchanged") {
  const ChainGeometry g;
  PoseState s = straight_pose();
  s.x = 0.4;
  s.y = -1.0;
  s.psi = 0.3;
  const SimCommand cmd{Eigen::VectorXd::Constant(3, kPi<double>), Eigen::VectorXd::Zero(4)};
  const StepResult r = step(g, s, cmd, TerrainProfile{"t", 0.5, 0.5, 0.5, ""}, {});
  CHECK(r.state.x == s.x);
  CHECK(r.state.y == s.y);
  CHECK(r.state.psi == s.psi);
}

TEST_CASE("step validates dt and flags non-finite velocities") {
  const ChainGeometry g;
  const SimCommand cmd{Eigen::VectorXd::Constant(3, kPi<double>), Eigen::VectorXd::Zero(4)};
  SimSettings bad;
  bad.dt = 0.2;
  CHECK_THROWS_AS(step(g, straight_pose(), cmd, ideal_screw_medium(), bad), InvalidInput);
  bad.dt = 0.0;
  CHECK_THROWS_AS(step(g, straight_pose(), cmd, ideal_screw_medium(), bad), InvalidInput);
  SimCommand nan = cmd;
  nan.screw_omegas[2] = std::nan("");
  try {
    step(g, straight_pose(), nan, ideal_screw_medium(), {});
    FAIL("expected a fault");
  } catch (const SimulationFault& e) {
    CHECK(e.segment() == 2);
  }
}

TEST_CASE("joints slew toward targets under the rate limit") {
  const ChainGeometry g;
  SimSettings s;
  s.joint_rate_limit = 0.5;
  const SimCommand cmd{Eigen::VectorXd::Constant(3, kPi<double> / 2), Eigen::VectorXd::Zero(4)};
  PoseState p = straight_pose();
  for (int k = 0; k < 10; ++k) p = step(g, p, cmd, ideal_screw_medium(), s).state;
  CHECK(p.joints.planar[0] == doctest::Approx(kPi<double> - 0.05));
}

TEST_CASE("circle fit is exact on exact data and refuses short arcs") {
  Eigen::Matrix2Xd pts(2, 50);
  for (int i = 0; i < 50; ++i) {
    const double a = 2 * kPi<double> * i / 50.0;
    pts.col(i) = Eigen::Vector2d(1.5 + 0.43 * std::cos(a), -2.0 + 0.43 * std::sin(a));
  }
  const CircleFit f = fit_circle(pts);
  CHECK(f.radius == doctest::Approx(0.43).epsilon(1e-12));
  CHECK(f.center.x() == doctest::Approx(1.5));
  CHECK(f.rms < 1e-12);

  const ChainGeometry g;
  Simulator sim(g, ideal_screw_medium(), {}, straight_pose());
  const OpenLoopRun run = run_open_loop(sim, tunneling_command(g, TurnRadius::straight(), 1.0), 2.0);
  try {
    fit_turn_radius(run.log);
    FAIL("expected InsufficientArc");
  } catch (const InsufficientArc& e) {
    CHECK(e.swept() == doctest::Approx(0.0));
  }
}

TEST_CASE("tunneling turn radius follows the common joint angle") {
  const ChainGeometry g;
  for (double r : {0.25, 0.43, -0.6, 1.0}) {
    const TunnelingTurnResult res = tunneling_turn(g, ideal_screw_medium(), r, {});
    CHECK(res.error < 0.02 * std::abs(r));
  }
  CHECK_THROWS_AS(tunneling_turn(g, ideal_screw_medium(), 0.10, {}), InfeasibleRadius);
}

TEST_CASE("M-configuration turn in place circles at l sin(theta'/2)") {
  // Alternating radial directions give the antisymmetric speed pattern a
  // nonzero mean sideways component; the rigid fit turns it into a circle of
  // radius l sin(theta'/2) whatever the terrain.
  const ChainGeometry g;
  for (double deg : {120.0, 140.0, 160.0}) {
    const double theta = deg * kDeg;
    const double expect = g.l * std::sin(deflection_of(theta) / 2);
    for (const TerrainProfile& t : {TerrainProfile{"c", 0.0, 0.55, 0.45, ""}, TerrainProfile{"d", 0.0, 0.2, 0.8, ""}}) {
      const MConfigTurnResult res = mconfig_turn(g, t, theta, 0.0, {});
      CHECK(res.fitted == doctest::Approx(expect).epsilon(0.03));
    }
  }
}

TEST_CASE("M-configuration straight speed vanishes without leverage") {
  const ChainGeometry g;
  CHECK(std::abs(mconfig_mean_speed(g, ideal_screw_medium(), kPi<double>, {}, 10.0)) < 1e-12);
  const TerrainProfile rigid{"r", 0.0, 0.5, 0.5, ""};
  CHECK(mconfig_mean_speed(g, rigid, 140 * kDeg, {}, 10.0) > 0.1);
}

TEST_CASE("world trajectory does not depend on the starting frame") {
  const ChainGeometry g;
  const TerrainProfile t{"t", 0.4, 0.6, 0.4, ""};
  const SimCommand cmd = tunneling_command(g, TurnRadius::of(0.5), 0.8);
  PoseState a = straight_pose();
  a.joints.planar = cmd.joint_targets;
  PoseState b = a;
  b.x = 3.0;
  b.y = -2.0;
  b.psi = 2.2;
  Simulator sa(g, t, {}, a), sb(g, t, {}, b);
  for (int k = 0; k < 500; ++k) {
    sa.advance(cmd);
    sb.advance(cmd);
  }
  const Eigen::Vector2d pa(sa.state().x, sa.state().y);
  const Eigen::Vector2d pb = rotation(-b.psi) * (Eigen::Vector2d(sb.state().x, sb.state().y) - Eigen::Vector2d(b.x, b.y));
  CHECK((pa - pb).norm() < 1e-9);
  CHECK(std::abs(wrap_angle(sb.state().psi - b.psi - sa.state().psi)) < 1e-9);
}

TEST_CASE("noisy runs are reproducible per seed") {
  const ChainGeometry g;
  SimSettings s;
  s.velocity_noise_sd = 0.01;
  s.seed = 7;
  const SimCommand cmd = tunneling_command(g, TurnRadius::of(0.7), 1.0);
  auto run = [&](std::uint64_t seed) {
    SimSettings local = s;
    local.seed = seed;
    Simulator sim(g, ideal_screw_medium(), local, straight_pose());
    std::ostringstream os;
    run_open_loop(sim, cmd, 3.0).log.write_csv(os);
    return os.str();
  };
  CHECK(run(7) == run(7));
  CHECK(run(7) != run(8));
}

TEST_CASE("trajectory log keeps uniform time steps") {
  TrajectoryLog log(0.01, 4);
  LogRow r;
  r.omegas = Eigen::VectorXd::Zero(4);
  r.realized.assign(4, {});
  r.state = straight_pose();
  log.append(r);
  r.t = 0.01;
  log.append(r);
  r.t = 0.03;
  CHECK_THROWS_AS(log.append(r), InvalidInput);
  std::ostringstream os;
  log.write_csv(os);
  CHECK(os.str().rfind("t,x,y,psi,theta_1", 0) == 0);
}

TEST_CASE("conforming chain follows the corridor centerline") {
  const ChainGeometry g;
  const CorridorSpec c = zigzag_incline_corridor();
  PoseState start = straight_pose();
  start.mode = Mode::Conforming;
  Simulator sim(g, TerrainProfile{"g", 0.2, 0.54, 0.46, ""}, {}, start, c);
  REQUIRE(sim.state().mode == Mode::Conforming);
  SimCommand cmd{Eigen::VectorXd::Constant(3, kPi<double>), Eigen::VectorXd::Zero(4)};
  for (Eigen::Index i = 0; i < 4; ++i) cmd.screw_omegas[i] = g.handedness[static_cast<std::size_t>(i)] * g.omega_max;
  double worst = 0.0;
  int steps = 0;
  while (!sim.corridor_status().reached_exit && steps < 30000) {
    const StepResult r = sim.advance(cmd);
    ++steps;
    for (Eigen::Index k = 0; k < 3; ++k)
      REQUIRE(std::abs(deflection_of(r.state.joints.planar[k])) <= g.joint_limit + 1e-9);
    const auto pts = sim.chain_outline();
    for (std::size_t k = 1; k + 1 < pts.size(); ++k)
      worst = std::max(worst, project_onto_centerline(c, pts[k]).distance);
  }
  CHECK(sim.corridor_status().reached_exit);
  CHECK(sim.corridor_status().wall_violations == 0);
  CHECK(worst < 0.01);
}
