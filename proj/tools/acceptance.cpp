// Acceptance suite: one PASS/FAIL line per criterion, driven by data/defaults.json.

#include "screwsnake/bus.hpp"
#include "screwsnake/calibration.hpp"
#include "screwsnake/defaults.hpp"
#include "screwsnake/experiments.hpp"
#include "screwsnake/scenario.hpp"
#include "properties.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace screwsnake;

namespace {

constexpr double kDeg = kPi<double> / 180.0;

// Published reference values the criteria compare against.
constexpr double kReferenceMinRadius = 0.18;  // m
constexpr double kMinRadiusTol = 0.01;        // m
constexpr double kReferenceRttSd = 0.11;      // ms
constexpr int kReferenceMaxSegments = 14;
constexpr double kTunnelingBudget = 5.0;      // s
constexpr double kPropertyBudget = 30.0;      // s

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

struct Calibrated {
  std::map<std::string, CalibrationResult> surfaces;
  std::vector<std::string> order;
};

Calibrated calibrate_all(const Defaults& d, const std::filesystem::path& dir) {
  const auto obs = load_observations(dir / d.observations);
  CalibrationOptions opts;
  opts.settings = d.settings;
  opts.duration = d.mconfig_duration;
  opts.base_speed = d.mconfig_base_speed;
  Calibrated out;
  for (const auto& s : surfaces_of(obs)) {
    out.surfaces.emplace(s, calibrate(s, obs, ChainGeometry{}, opts));
    out.order.push_back(s);
  }
  return out;
}

Outcome tunneling_fidelity(const Defaults& d, const std::filesystem::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const TerrainProfile terrain = resolve_terrain(d.tunneling_terrain, dir);
  const ChainGeometry geom;
  bool ok = true;
  std::ostringstream detail;
  for (double r : d.tunneling_radii) {
    detail << " R=" << fmt(r, 2) << ":";
    try {
      const TunnelingTurnResult res = tunneling_turn(geom, terrain, r, d.settings);
      const bool cell = res.error <= d.tunneling_tol * std::abs(r);
      ok &= cell;
      detail << fmt(res.fitted) << (cell ? "" : "!");
    } catch (const InfeasibleRadius&) {
      ok = false;
      detail << "infeasible(R_min=" << fmt(min_turn_radius(geom)) << ")";
    }
  }
  const double elapsed = seconds_since(t0);
  ok &= elapsed < kTunnelingBudget;
  detail << " tol=" << fmt(100 * d.tunneling_tol, 1) << "% runtime=" << fmt(elapsed, 2) << "s";
  return {ok, detail.str()};
}

Outcome minimum_radius() {
  const double r = min_turn_radius(ChainGeometry{});
  const bool ok = std::abs(r - kReferenceMinRadius) <= kMinRadiusTol;
  return {ok, "R_min=" + fmt(r) + " m vs " + fmt(kReferenceMinRadius, 2) + " +- " + fmt(kMinRadiusTol, 2)};
}

Outcome turn_in_place(const Defaults& d, const TerrainProfile& terrain) {
  const MConfigTurnResult res =
      mconfig_turn(ChainGeometry{}, terrain, d.mconfig_turn_theta_deg * kDeg, 0.0, d.settings, d.mconfig_base_speed);
  const bool ok = res.fitted < d.turn_in_place_tol;
  return {ok, "theta_m=" + fmt(d.mconfig_turn_theta_deg, 0) + " fitted=" + fmt(res.fitted) + " m, limit " +
                  fmt(d.turn_in_place_tol, 3)};
}

Outcome radius_control(const Defaults& d, const TerrainProfile& terrain) {
  bool ok = true;
  std::ostringstream detail;
  for (double r : d.mconfig_turn_radii) {
    const MConfigTurnResult res =
        mconfig_turn(ChainGeometry{}, terrain, d.mconfig_turn_theta_deg * kDeg, r, d.settings, d.mconfig_base_speed);
    ok &= res.error <= d.mconfig_turn_tol;
    detail << " " << fmt(r, 2) << "->" << fmt(res.fitted) << " (err " << fmt(res.error) << ")";
  }
  detail << " limit " << fmt(d.mconfig_turn_tol, 2);
  return {ok, detail.str()};
}

Outcome table_speeds(const Defaults& d, const Calibrated& cal) {
  bool ok = true;
  int gated = 0;
  double worst = 0.0;
  double lo = 1e9, hi = -1e9;
  std::ostringstream excluded;
  for (const auto& s : cal.order) {
    for (const auto& r : cal.surfaces.at(s).residuals) {
      if (r.used) {
        ++gated;
        worst = std::max(worst, std::abs(r.residual));
        ok &= std::abs(r.residual) <= d.cell_tol;
      } else {
        excluded << " " << s << "@" << fmt(r.theta_m_deg, 0) << "=" << fmt(r.residual);
      }
      if (std::abs(r.theta_m_deg - d.spread_theta_deg) < 1e-9) {
        lo = std::min(lo, r.simulated);
        hi = std::max(hi, r.simulated);
      }
    }
  }
  const double spread = hi - lo;
  ok &= spread <= d.spread_tol;
  std::ostringstream detail;
  detail << gated << " cells max|res|=" << fmt(worst) << " (tol " << fmt(d.cell_tol, 2) << "); spread@"
         << fmt(d.spread_theta_deg, 0) << "=" << fmt(spread) << " (limit " << fmt(d.spread_tol, 2)
         << "); excluded:" << excluded.str();
  return {ok, detail.str()};
}

Outcome bus_scheduling(const Defaults& d) {
  const int n_max = max_segments(d.bus);
  const auto samples = sample_round_trips(d.bus, 1, d.rtt_samples, d.seed);
  double mean = 0.0;
  for (double v : samples) mean += v / static_cast<double>(samples.size());
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean) / static_cast<double>(samples.size() - 1);
  const double sd = std::sqrt(var);
  const double model = rtt(d.bus, 1);
  const bool ok = n_max == kReferenceMaxSegments && std::abs(mean - model) <= d.rtt_mean_tol &&
                  std::abs(sd - kReferenceRttSd) <= d.rtt_sd_rel_tol * kReferenceRttSd;
  return {ok, "max_segments=" + std::to_string(n_max) + " @" + fmt(d.bus.loop_rate, 0) + "Hz; rtt(1) mean=" +
                  fmt(mean) + " model=" + fmt(model) + " sd=" + fmt(sd) + " over " +
                  std::to_string(samples.size())};
}

Outcome property_suite(const Defaults& d) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(d.seed);
  const int n = static_cast<int>(d.property_cases);
  struct Row {
    const char* name;
    double worst;
    double tol;
  };
  const Row rows[] = {
      {"fd_velocity", props::fd_velocity(gen, n), props::kFdTol},
      {"rigid_twist", props::rigid_twist(gen, n), props::kTwistTol},
      {"tangent_intersection", props::tangent_intersection(gen, n), props::kTangentTol},
      {"ik_closure", props::ik_closure(gen, n), props::kClosureTol},
      {"ratio_transitivity", props::ratio_transitivity(gen, n), props::kRatioTol},
  };
  const double elapsed = seconds_since(t0);
  bool ok = elapsed < kPropertyBudget;
  std::ostringstream detail;
  detail << n << " cases each;";
  for (const Row& r : rows) {
    ok &= r.worst < r.tol;
    detail << " " << r.name << "=" << std::scientific << std::setprecision(1) << r.worst << std::defaultfloat;
  }
  detail << " runtime=" << fmt(elapsed, 2) << "s";
  return {ok, detail.str()};
}

Outcome corridor(const Defaults& d, const std::filesystem::path& dir) {
  const Scenario sc = load_scenario(dir / d.corridor_scenario, dir);
  const nlohmann::json s = run_scenario(sc).summary.at("corridor");
  const bool reached = s.at("reached_exit").get<bool>();
  const int violations = s.at("wall_violations").get<int>();
  std::string detail = std::string("reached_exit=") + (reached ? "true" : "false") +
                       " wall_violations=" + std::to_string(violations);
  if (reached) detail += " exit_time=" + fmt(s.at("exit_time").get<double>(), 2) + "s";
  return {reached && violations == 0, detail};
}

std::set<int> parse_ids(const std::string& text) {
  std::set<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"screwsnake acceptance suite"};
  std::string config_dir;
  std::string expect_fail;
  app.add_option("--config-dir", config_dir, "directory holding defaults.json")->envname("SCREWSNAKE_CONFIG_DIR");
  app.add_option("--expect-fail", expect_fail,
                 "comma-separated criteria known to be unattainable; the exit status ignores their failure "
                 "but flags an unexpected pass");
  CLI11_PARSE(app, argc, argv);

  const std::filesystem::path dir = config_directory(config_dir);
  Defaults d = load_defaults(dir);
  d.settings.seed = d.seed;
  const std::set<int> expected = parse_ids(expect_fail);

  std::optional<Calibrated> cal;
  auto calibrated = [&]() -> const Calibrated& {
    if (!cal) cal = calibrate_all(d, dir);
    return *cal;
  };
  auto calibrated_turn_terrain = [&]() -> TerrainProfile {
    return calibrated().surfaces.at(d.mconfig_turn_terrain).profile;
  };

  const std::vector<Criterion> criteria = {
      {1, "tunneling turning-radius fidelity", [&] { return tunneling_fidelity(d, dir); }},
      {2, "minimum tunneling radius", [] { return minimum_radius(); }},
      {3, "M-configuration turn in place", [&] { return turn_in_place(d, calibrated_turn_terrain()); }},
      {4, "M-configuration radius control", [&] { return radius_control(d, calibrated_turn_terrain()); }},
      {5, "surface speed table", [&] { return table_speeds(d, calibrated()); }},
      {6, "bus scheduling", [&] { return bus_scheduling(d); }},
      {7, "kinematic property suite", [&] { return property_suite(d); }},
      {8, "conforming corridor", [&] { return corridor(d, dir); }},
  };

  int passed = 0;
  int unexpected = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    passed += o.pass;
    const bool known = expected.count(c.id) > 0;
    std::string tag;
    if (!o.pass && known) tag = " (expected)";
    if (o.pass && known) tag = " (unexpected pass)";
    unexpected += (o.pass == known);
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << tag << ": " << o.detail
              << std::endl;
  }
  std::cout << passed << "/" << criteria.size() << " criteria passed" << std::endl;
  return unexpected == 0 ? 0 : 1;
}
