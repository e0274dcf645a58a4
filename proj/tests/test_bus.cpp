#include "screwsnake/bus.hpp"
#include "support.hpp"

#include <doctest.h>

#include <map>
#include <sstream>

using namespace screwsnake;
using namespace test;

TEST_CASE("round trip grows by one hop per node") {
  const BusModel m;
  CHECK(rtt(m, 1) == doctest::Approx(9.16));
  CHECK(rtt(m, 14) == doctest::Approx(13.19));
  CHECK(rtt(m, 14) < m.period_ms());
  CHECK(rtt(m, 15) == doctest::Approx(13.50));
  CHECK(rtt(m, 15) > m.period_ms());
  CHECK_THROWS_AS(rtt(m, 0), InvalidInput);
}

TEST_CASE("feasible chain length at a loop rate") {
  BusModel m;
  CHECK(max_segments(m) == 14);
  m.per_hop = 0.0;
  CHECK(max_segments(m) == kUnboundedSegments);
  m = BusModel{};
  m.loop_rate = 1000.0;
  CHECK(max_segments(m) == 0);
  m = BusModel{};
  m.loop_rate = -1.0;
  CHECK_THROWS_AS(max_segments(m), InvalidInput);
  std::ostringstream os;
  write_scheduling_report(os, BusModel{}, 15);
  CHECK(os.str().find("max_segments: 14") != std::string::npos);
  CHECK(os.str().find("{n: 15, rtt_ms: 13.500, period_ms: 13.333, feasible: false}") != std::string::npos);
}

TEST_CASE("without jitter a setpoint lands after half the round trip") {
  BusModel m;
  m.jitter_sd = 0.0;
  VirtualBus bus(m, 4, 1);
  bus.command(2, {0.3, 0.0, 1.0});
  const TickResult r = bus.advance(m.period_ms());
  bool saw = false;
  for (const auto& msg : bus.trace()) {
    if (msg.kind == MessageKind::Setpoint && msg.segment_id == 2 && msg.cycle == 0) {
      CHECK(msg.deliver_time == doctest::Approx(rtt(m, 3) / 2));
      saw = true;
    }
    if (msg.kind == MessageKind::Sensor && msg.cycle == 0)
      CHECK(msg.deliver_time == doctest::Approx(rtt(m, msg.segment_id + 1)));
  }
  CHECK(saw);
  CHECK(r.deadline_misses == 0);
  CHECK(bus.node(2).setpoint().yaw == 0.3);
}

TEST_CASE("messages on one link never overtake each other") {
  BusModel m;
  m.jitter_sd = 3.0;  // large enough to invert raw latencies
  VirtualBus bus(m, 6, 99);
  for (int k = 0; k < 300; ++k) bus.advance(m.period_ms());
  std::map<std::pair<std::size_t, int>, std::pair<double, std::uint64_t>> last;
  for (const auto& msg : bus.trace()) {
    validate(msg);
    const auto key = std::make_pair(msg.segment_id, static_cast<int>(msg.kind));
    auto it = last.find(key);
    if (it != last.end()) {
      REQUIRE(msg.deliver_time >= it->second.first);
      REQUIRE(msg.cycle > it->second.second);
    }
    last[key] = {msg.deliver_time, msg.cycle};
  }
}

TEST_CASE("deadline misses never decrease with chain length") {
  BusModel m;
  m.jitter_sd = 0.5;
  int prev = 0;
  for (std::size_t n = 1; n <= 18; ++n) {
    const int misses = count_deadline_misses(m, n, 200, 5);
    CHECK(misses >= prev);
    prev = misses;
  }
  CHECK(count_deadline_misses(BusModel{}, 16, 50, 0) > 0);
}

TEST_CASE("sampled round trips match the model mean and jitter") {
  const BusModel m;
  const auto s = sample_round_trips(m, 1, 1000, 0);
  REQUIRE(s.size() == 1000);
  double mean = 0.0;
  for (double v : s) mean += v / 1000.0;
  double var = 0.0;
  for (double v : s) var += (v - mean) * (v - mean) / 999.0;
  CHECK(std::abs(mean - rtt(m, 1)) < 0.02);
  CHECK(std::sqrt(var) == doctest::Approx(0.11).epsilon(0.2));
}

TEST_CASE("trace export lists every message") {
  VirtualBus bus(BusModel{}, 2, 0);
  bus.advance(30.0);
  std::ostringstream os;
  bus.write_trace_csv(os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "send_time,deliver_time,kind,segment_id,deadline_missed");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == bus.trace().size());
}

TEST_CASE("PID step settles like the saturated first-order closed form") {
  // Rate-limited ramp until Kp e drops below the rate limit, then exponential
  // decay with time constant 1/Kp.
  const PidGains gains;
  const JointPlant plant;
  const double e0 = 30 * kDeg;
  const double e_sat = plant.rate_limit / (gains.kp * plant.gain);
  const double band = 0.02 * e0;
  const double t_closed = (e0 - e_sat) / plant.rate_limit + std::log(e_sat / band) / gains.kp;
  const double dt = 1.0 / 75.0;
  SegmentNode node(0, gains, plant);
  node.receive({e0, 0.0, 0.0});
  double settled_at = -1.0;
  for (int k = 1; k <= 150; ++k) {
    node.regulate(dt);
    const bool inside = std::abs(node.yaw() - e0) <= band;
    if (inside && settled_at < 0) settled_at = k * dt;
    if (!inside) settled_at = -1.0;
  }
  REQUIRE(settled_at > 0);
  CHECK(settled_at < 1.0);
  CHECK(settled_at == doctest::Approx(t_closed).epsilon(0.08));
  CHECK(std::abs(node.last_torque(0)) <= gains.output_limit);
}

TEST_CASE("PID integrator does not wind up while saturated") {
  PidGains g;
  g.ki = 5.0;
  Pid pid(g);
  for (int k = 0; k < 100; ++k) CHECK(pid.update(1.0, 0.01) == doctest::Approx(g.output_limit));
  CHECK(pid.integral() == 0.0);
  const double out = pid.update(0.1, 0.01);
  CHECK(out == doctest::Approx(1.0 + 5.0 * 0.001));
  CHECK_THROWS_AS(Pid(PidGains{1, 0, 0, 0.0}), InvalidInput);
}
