#include "screwsnake/mconfig.hpp"
#include "screwsnake/teleop.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace screwsnake;
using namespace test;

namespace {

TeleopFrame frame(std::uint64_t seq, std::vector<JointCommand> joints, double screw = 0.0,
                  std::optional<Mode> mode = std::nullopt) {
  TeleopFrame f;
  f.seq = seq;
  f.t_ms = static_cast<double>(seq) * 20.0;
  f.joints = std::move(joints);
  f.screw = screw;
  f.mode = mode;
  return f;
}

std::vector<JointCommand> yaw_only(double a, double b = 0.0, double c = 0.0) { return {{0, a}, {0, b}, {0, c}}; }

}  // namespace

TEST_CASE("clamp limits every axis to the device box") {
  const ClampPolicy p;
  const ClampResult zero = clamp(frame(1, yaw_only(0)), p);
  CHECK_FALSE(zero.any());
  const ClampResult big = clamp(frame(1, {{0.0, 95 * kDeg}}), p);
  CHECK(big.joints[0].yaw == doctest::Approx(80 * kDeg));
  CHECK(big.flags == std::vector<bool>{false, true});
  CHECK_THROWS_AS(clamp(frame(1, {{std::nan(""), 0.0}}), p), InvalidInput);
  CHECK_THROWS_AS(validate(ClampPolicy{kPi<double> / 2, kPi<double> / 2}), InvalidInput);
}

TEST_CASE("clamp is idempotent") {
  const ClampPolicy p;
  for (int c = 0; c < kCases; ++c) {
    TeleopFrame f = frame(1, {});
    for (int k = 0; k < 3; ++k) f.joints.push_back({uniform(-3, 3), uniform(-3, 3)});
    const ClampResult once = clamp(f, p);
    TeleopFrame again = f;
    again.joints = once.joints;
    const ClampResult twice = clamp(again, p);
    for (std::size_t k = 0; k < 3; ++k) {
      REQUIRE(twice.joints[k].yaw == once.joints[k].yaw);
      REQUIRE(twice.joints[k].pitch == once.joints[k].pitch);
    }
    REQUIRE_FALSE(twice.any());
  }
}

TEST_CASE("no setpoint leaves the gateway beyond the joint limits") {
  TeleopRuntime rt({});
  REQUIRE(rt.connect(1));
  const double limit = rt.config().geom.joint_limit;
  const Mode modes[] = {Mode::Teleop, Mode::Tunneling, Mode::MConfig};
  for (int c = 0; c < kCases; ++c) {
    TeleopFrame f = frame(static_cast<std::uint64_t>(c + 1), {}, uniform(-1, 1), modes[c % 3]);
    for (int k = 0; k < 3; ++k) f.joints.push_back({uniform(-10, 10), uniform(-10, 10)});
    if (c % 3 == 2 && c % 2) f.radius_m = uniform(-2, 2);
    rt.submit(1, f);
    rt.tick();
    for (std::size_t k = 0; k < 4; ++k) {
      REQUIRE(std::abs(rt.bus().node(k).setpoint().yaw) <= limit);
      REQUIRE(std::abs(rt.bus().node(k).setpoint().pitch) <= limit);
      REQUIRE(std::abs(rt.bus().node(k).yaw()) <= limit + 1e-12);
    }
  }
}

TEST_CASE("stale and foreign frames are refused") {
  TeleopRuntime rt({});
  REQUIRE(rt.connect(1));
  CHECK_FALSE(rt.connect(2));
  CHECK(rt.submit(1, frame(12, yaw_only(0))).status == SubmitStatus::Queued);
  const SubmitResult stale = rt.submit(1, frame(10, yaw_only(0)));
  CHECK(stale.status == SubmitStatus::Dropped);
  CHECK(stale.code == "stale");
  CHECK(rt.drops() == 1);
  const SubmitResult other = rt.submit(2, frame(13, yaw_only(0)));
  CHECK(other.status == SubmitStatus::Rejected);
  CHECK(other.code == "occupied");
  TeleopFrame nan = frame(14, {{std::nan(""), 0.0}, {0, 0}, {0, 0}});
  CHECK(rt.submit(1, nan).code == "non_finite");
  CHECK(rt.submit(1, frame(15, {{0, 0}})).code == "bad_frame");
  rt.disconnect(1);
  CHECK(rt.connect(2));
}

TEST_CASE("newest queued frame wins at the next tick") {
  TeleopRuntime rt({});
  rt.connect(1);
  rt.submit(1, frame(1, yaw_only(0.1)));
  rt.submit(1, frame(2, yaw_only(0.2)));
  rt.tick();
  CHECK(rt.applied() == 1);
  CHECK(rt.snapshot().seq == 2);
  CHECK(rt.bus().node(0).setpoint().yaw == doctest::Approx(0.2));
}

TEST_CASE("silence longer than the hold timeout declares a hold") {
  TeleopRuntime rt({});
  rt.connect(1);
  rt.submit(1, frame(1, yaw_only(0.3), 0.5));
  rt.tick();
  CHECK_FALSE(rt.holding());
  const int ticks = static_cast<int>(std::ceil(500.0 / rt.period_ms()));
  for (int k = 0; k < ticks - 1; ++k) rt.tick();
  CHECK_FALSE(rt.holding());
  for (int k = 0; k < 2; ++k) rt.tick();
  CHECK(rt.holding());
  // Joints keep regulating to the last setpoints.
  CHECK(rt.bus().node(0).setpoint().yaw == doctest::Approx(0.3));
  rt.submit(1, frame(2, yaw_only(0.3), 0.5));
  rt.tick();
  CHECK_FALSE(rt.holding());
  rt.disconnect(1);
  rt.tick();
  CHECK(rt.holding());
}

TEST_CASE("mode requests change how frames are read") {
  TeleopRuntime rt({});
  rt.connect(1);
  rt.submit(1, frame(1, yaw_only(0.2, -0.1, 0.3), 0.5));
  rt.tick();
  CHECK(rt.bus().node(1).setpoint().yaw == doctest::Approx(-0.1));

  rt.submit(1, frame(2, yaw_only(0.25), 1.0, Mode::Tunneling));
  rt.tick();
  CHECK(rt.mode() == Mode::Tunneling);
  for (std::size_t k = 0; k < 3; ++k) CHECK(rt.bus().node(k).setpoint().yaw == doctest::Approx(0.25));

  TeleopFrame m = frame(3, yaw_only(40 * kDeg), 0.5, Mode::MConfig);
  m.radius_m = 0.51;
  rt.submit(1, m);
  rt.tick();
  CHECK(rt.mode() == Mode::MConfig);
  const ChainGeometry g;
  const auto sp = mconfig_setpoints(g, 140 * kDeg, TurnRadius::of(0.51), 0.5);
  for (std::size_t k = 0; k < 3; ++k)
    CHECK(rt.bus().node(k).setpoint().yaw == doctest::Approx(deflection_of(sp.joint_angles[static_cast<Eigen::Index>(k)])));
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(rt.bus().node(i).setpoint().screw_omega == doctest::Approx(sp.screw_omegas[static_cast<Eigen::Index>(i)]));
  // Later frames without a mode stay in M_CONFIG.
  rt.submit(1, frame(4, yaw_only(30 * kDeg), 0.5));
  rt.tick();
  CHECK(rt.mode() == Mode::MConfig);
  CHECK(rt.bus().node(0).setpoint().yaw == doctest::Approx(-30 * kDeg));
}

TEST_CASE("steady 50 Hz stream: applied every tick, latency under one round trip plus a period") {
  TeleopRuntime rt({});
  rt.connect(1);
  const double period = rt.period_ms();
  const double bound = rtt(rt.config().bus, 4) + period;
  std::uint64_t seq = 0;
  double next_frame = 0.0;
  int updates = 0;
  int ticks_since_apply = 0;
  std::uint64_t applied_before = 0;
  for (int k = 0; k < 750; ++k) {
    while (next_frame <= rt.now_ms()) {
      rt.submit(1, frame(++seq, yaw_only(0.1 * std::sin(next_frame / 300.0)), 0.5));
      next_frame += 20.0;
    }
    const auto u = rt.tick();
    if (rt.applied() != applied_before) {
      ticks_since_apply = 0;
      applied_before = rt.applied();
    } else {
      ++ticks_since_apply;
    }
    if (u) {
      ++updates;
      CHECK_FALSE(u->hold);
      ticks_since_apply = 0;
    }
    REQUIRE(ticks_since_apply < 2);
    if (rt.last_command_latency_ms()) REQUIRE(*rt.last_command_latency_ms() < bound);
  }
  CHECK(rt.last_command_latency_ms().has_value());
  const double seconds = rt.now_ms() / 1000.0;
  CHECK(updates / seconds >= 30.0);
  CHECK(rt.drops() == 0);
}

TEST_CASE("wire messages round-trip") {
  TeleopFrame f = frame(7, {{0.1, -0.2}, {0.0, 0.3}, {0.0, 0.0}}, -0.4, Mode::MConfig);
  f.radius_m = 0.3;
  const TeleopFrame g = parse_frame(to_json(f));
  CHECK(g.seq == 7);
  CHECK(g.joints[0].yaw == -0.2);
  CHECK(g.radius_m == 0.3);
  CHECK(g.mode == Mode::MConfig);

  TeleopRuntime rt({});
  rt.connect(1);
  rt.submit(1, f);
  rt.tick();
  const StateUpdate s = rt.snapshot();
  const auto j = to_json(s);
  for (const char* key : {"type", "t_ms", "pose", "joints", "clamped", "speeds", "misses"}) CHECK(j.contains(key));
  const StateUpdate back = parse_state(j);
  CHECK(back.t_ms == s.t_ms);
  CHECK(back.clamped == s.clamped);
  CHECK(back.joints.size() == 3);

  auto code_of = [](const nlohmann::json& m) {
    try {
      parse_frame(m);
    } catch (const ProtocolError& e) {
      return e.code();
    }
    return std::string("ok");
  };
  CHECK(code_of({{"type", "ping"}}) == "bad_type");
  CHECK(code_of({{"type", "frame"}, {"seq", 1}}) == "bad_frame");
  CHECK(code_of({{"type", "frame"}, {"seq", 1}, {"t_ms", 0}, {"joints", nlohmann::json::array()}, {"screw", nullptr}}) == "non_finite");
  CHECK(code_of({{"type", "frame"}, {"seq", 1}, {"t_ms", 0}, {"joints", nlohmann::json::array()}, {"screw", 0}, {"mode", "CONFORMING"}}) == "bad_frame");
}
