#include "screwsnake/bus.hpp"
#include "screwsnake/calibration.hpp"
#include "screwsnake/defaults.hpp"
#include "screwsnake/experiments.hpp"
#include "screwsnake/scenario.hpp"
#include "screwsnake/teleop_server.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace screwsnake;

namespace {

constexpr double kDeg = kPi<double> / 180.0;
constexpr int kOk = 0;
constexpr int kTolerance = 1;
constexpr int kUsage = 2;

struct UsageError : Error {
  using Error::Error;
};

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string("bad number in ") + what + ": '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError(std::string(what) + " list is empty");
  return out;
}

// Writes to `path`, or stdout when it is empty or "-".
template <typename Fn>
void emit(const std::string& path, Fn&& body) {
  if (path.empty() || path == "-") {
    body(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::filesystem::filesystem_error("cannot write", path, std::make_error_code(std::errc::io_error));
  body(out);
}

struct Globals {
  std::string config_dir;
  std::optional<std::uint64_t> seed;

  std::filesystem::path dir() const { return config_directory(config_dir); }
  Defaults defaults() const {
    Defaults d = load_defaults(dir());
    if (seed) d.seed = *seed;
    d.settings.seed = d.seed;
    return d;
  }
};

int sweep_tunneling(const Globals& g, const std::optional<std::string>& radii_text, const std::string& terrain_ref,
                    const std::string& out_path, std::optional<double> tol_opt, double speed) {
  const Defaults d = g.defaults();
  const auto radii = radii_text ? parse_list(*radii_text, "radii") : d.tunneling_radii;
  const TerrainProfile terrain = resolve_terrain(terrain_ref.empty() ? d.tunneling_terrain : terrain_ref, g.dir());
  const double tol = tol_opt.value_or(d.tunneling_tol);
  const ChainGeometry geom;
  bool failed = false;
  emit(out_path, [&](std::ostream& os) {
    os << "R_cmd,theta_deg,R_fit,err,status\n" << std::setprecision(8);
    for (double r : radii) {
      try {
        const TunnelingTurnResult res = tunneling_turn(geom, terrain, r, d.settings, speed);
        const bool ok = res.error <= tol * std::abs(r);
        failed |= !ok;
        os << r << ',' << res.theta / kDeg << ',' << res.fitted << ',' << res.error << ','
           << (ok ? "ok" : "tolerance") << "\n";
      } catch (const InfeasibleRadius&) {
        failed = true;
        os << r << ",,,,infeasible\n";
      }
    }
  });
  return failed ? kTolerance : kOk;
}

int sweep_mconfig(const Globals& g, const std::optional<std::string>& angles_text, const std::string& terrain_ref,
                  std::optional<double> duration_opt, std::optional<double> radius, double base_speed,
                  const std::string& out_path) {
  const Defaults d = g.defaults();
  const auto angles = angles_text ? parse_list(*angles_text, "angles") : d.mconfig_angles_deg;
  for (double a : angles)
    if (!(a > 90.0 && a <= 180.0)) throw UsageError("theta_m must lie in (90, 180] degrees, got " + std::to_string(a));
  const TerrainProfile terrain = resolve_terrain(terrain_ref.empty() ? d.mconfig_turn_terrain : terrain_ref, g.dir());
  const double duration = duration_opt.value_or(d.mconfig_duration);
  if (!(duration > 0)) throw UsageError("duration must be positive");
  const ChainGeometry geom;
  emit(out_path, [&](std::ostream& os) {
    os << "theta_m,mean_speed,fitted_radius\n" << std::setprecision(8);
    for (double a : angles) {
      const double theta = a * kDeg;
      os << a << ',' << mconfig_mean_speed(geom, terrain, theta, d.settings, duration, base_speed) << ',';
      if (radius && a < 180.0) {
        try {
          os << mconfig_turn(geom, terrain, theta, *radius, d.settings, base_speed).fitted;
        } catch (const InsufficientArc&) {
        }
      }
      os << "\n";
    }
  });
  return kOk;
}

int bus_analyze(const Globals& g, std::optional<double> rate, std::optional<std::size_t> max_n,
                std::size_t samples, std::size_t sample_n, const std::string& trace_path,
                std::size_t trace_cycles) {
  const Defaults d = g.defaults();
  BusModel model = d.bus;
  if (rate) model.loop_rate = *rate;
  validate(model);
  const std::size_t n_max = max_n.value_or(d.bus_max_n);
  if (n_max < 1) throw UsageError("--max-n must be at least 1");
  write_scheduling_report(std::cout, model, n_max);
  if (samples > 0) {
    const auto rtts = sample_round_trips(model, sample_n, samples, d.seed);
    double mean = 0.0;
    for (double v : rtts) mean += v / static_cast<double>(rtts.size());
    double var = 0.0;
    for (double v : rtts) var += (v - mean) * (v - mean) / static_cast<double>(rtts.size() - (rtts.size() > 1));
    std::cout << std::fixed << std::setprecision(4) << "rtt_samples: {n: " << sample_n << ", count: " << samples
              << ", model_ms: " << rtt(model, sample_n) << ", mean_ms: " << mean
              << ", sd_ms: " << std::sqrt(var) << "}\n";
  }
  if (!trace_path.empty()) {
    VirtualBus bus(model, n_max, d.seed);
    for (std::size_t c = 0; c < trace_cycles; ++c) bus.advance(model.period_ms());
    emit(trace_path, [&](std::ostream& os) { bus.write_trace_csv(os); });
  }
  return kOk;
}

int calibrate_cmd(const Globals& g, const std::string& obs_path, const std::string& out_dir,
                  std::optional<double> tol_opt) {
  const Defaults d = g.defaults();
  const std::filesystem::path path = obs_path.empty() ? g.dir() / d.observations : std::filesystem::path(obs_path);
  const auto obs = load_observations(path);
  const double tol = tol_opt.value_or(d.cell_tol);
  CalibrationOptions opts;
  opts.settings = d.settings;
  opts.duration = d.mconfig_duration;
  opts.base_speed = d.mconfig_base_speed;
  const ChainGeometry geom;
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  bool failed = false;
  std::ostringstream report;
  report << "surface,theta_m_deg,observed,simulated,residual,used\n" << std::setprecision(6);
  for (const auto& surface : surfaces_of(obs)) {
    CalibrationResult res = calibrate(surface, obs, geom, opts);
    res.profile.provenance = "fitted to " + path.filename().string();
    if (!out_dir.empty()) save_terrain_profile(res.profile, std::filesystem::path(out_dir) / (surface + ".profile"));
    std::cout << surface << ": kappa_axial=" << res.profile.kappa_axial << " slip=" << res.profile.slip
              << " max_abs_residual=" << res.max_abs_residual << "\n";
    failed |= res.max_abs_residual > tol;
    for (const auto& r : res.residuals)
      report << surface << ',' << r.theta_m_deg << ',' << r.observed << ',' << r.simulated << ','
             << r.residual << ',' << (r.used ? 1 : 0) << "\n";
  }
  if (out_dir.empty())
    std::cout << report.str();
  else
    emit((std::filesystem::path(out_dir) / "residuals.csv").string(), [&](std::ostream& os) { os << report.str(); });
  return failed ? kTolerance : kOk;
}

std::atomic<bool> g_stop{false};

int serve(const Globals& g, int port, const std::string& host, double duration, const std::string& terrain_ref) {
  const Defaults d = g.defaults();
  RuntimeConfig cfg;
  cfg.bus = d.bus;
  cfg.seed = d.seed;
  cfg.terrain = resolve_terrain(terrain_ref, g.dir());
  ServerOptions opts;
  opts.host = host;
  opts.port = port;
  opts.max_duration_s = duration;
  TeleopServer server(cfg, opts);
  const int bound = server.start();
  std::cout << "listening on " << host << ":" << bound << std::endl;
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (server.running() && !g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  return kOk;
}

int run_cmd(const Globals& g, const std::string& scenario_path, const std::string& out_path,
            const std::string& summary_path) {
  if (!std::filesystem::is_regular_file(scenario_path))
    throw std::filesystem::filesystem_error("scenario file not found", scenario_path,
                                            std::make_error_code(std::errc::no_such_file_or_directory));
  Scenario s = load_scenario(scenario_path, g.dir());
  if (g.seed) s.settings.seed = *g.seed;
  const ScenarioResult r = run_scenario(s);
  if (!out_path.empty()) emit(out_path, [&](std::ostream& os) { r.log.write_csv(os); });
  emit(summary_path, [&](std::ostream& os) { os << r.summary.dump(2) << "\n"; });
  if (r.summary.contains("corridor")) {
    const auto& c = r.summary["corridor"];
    if (!c["reached_exit"].get<bool>() || c["wall_violations"].get<int>() > 0) return kTolerance;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Screw-propelled snake robot simulator"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config-dir", g.config_dir, "Data directory (defaults.json, terrain/, observations/)")
      ->envname("SCREWSNAKE_CONFIG_DIR");
  auto* seed_opt = app.add_option("--seed", seed, "Random seed");

  std::optional<std::string> radii;
  std::string terrain_t, out_t;
  std::optional<double> tol_t;
  double speed_t = 1.0;
  auto* st = app.add_subcommand("sweep-tunneling", "Fitted vs commanded tunneling turn radius");
  st->add_option("--radii", radii, "Comma-separated radii [m]");
  st->add_option("--terrain", terrain_t, "Terrain profile name or file");
  st->add_option("--out", out_t, "CSV output (default stdout)");
  st->add_option("--tol", tol_t, "Allowed error as a fraction of the commanded radius");
  st->add_option("--speed", speed_t, "Screw speed fraction")->check(CLI::Range(0.0, 1.0));

  std::optional<std::string> angles;
  std::string terrain_m, out_m;
  std::optional<double> duration_m, radius_m;
  double base_m = 1.0;
  auto* sm = app.add_subcommand("sweep-mconfig", "Straight M-configuration speed per joint angle");
  sm->add_option("--angles", angles, "Comma-separated theta_m [deg]");
  sm->add_option("--terrain", terrain_m, "Terrain profile name or file");
  sm->add_option("--duration", duration_m, "Run length [s]");
  sm->add_option("--radius", radius_m, "Also fit the radius of a turn commanded at this radius [m]");
  sm->add_option("--base-speed", base_m, "Screw speed fraction")->check(CLI::Range(0.0, 1.0));
  sm->add_option("--out", out_m, "CSV output (default stdout)");

  std::optional<double> rate;
  std::optional<std::size_t> max_n;
  std::size_t samples = 0, sample_n = 1, trace_cycles = 75;
  std::string trace;
  auto* ba = app.add_subcommand("bus-analyze", "Bus feasibility table");
  ba->add_option("--rate", rate, "Control loop rate [Hz]");
  ba->add_option("--max-n", max_n, "Largest chain length in the table");
  ba->add_option("--samples", samples, "Also sample this many simulated round trips");
  ba->add_option("--sample-n", sample_n, "Node whose round trips are sampled")->check(CLI::PositiveNumber);
  ba->add_option("--trace", trace, "Write a message trace CSV for --max-n nodes");
  ba->add_option("--cycles", trace_cycles, "Cycles in the trace");

  std::string obs, out_dir;
  std::optional<double> tol_c;
  auto* cal = app.add_subcommand("calibrate", "Fit terrain profiles to measured speeds");
  cal->add_option("--observations", obs, "Observation CSV");
  cal->add_option("--out-dir", out_dir, "Directory for profiles and residuals.csv");
  cal->add_option("--tol", tol_c, "Allowed residual on fitted cells [m/s]");

  int port = 8765;
  std::string host = "127.0.0.1", terrain_s = "ideal_screw_medium";
  double duration_s = 0.0;
  auto* sv = app.add_subcommand("serve", "Run the teleop gateway");
  sv->add_option("--port", port, "TCP port (0 picks one)");
  sv->add_option("--host", host, "Bind address");
  sv->add_option("--duration", duration_s, "Stop after this many seconds (0 runs until interrupted)");
  sv->add_option("--terrain", terrain_s, "Terrain profile name or file");

  std::string scenario, out_r, summary_r;
  auto* rn = app.add_subcommand("run", "Run a scenario file");
  rn->add_option("--scenario", scenario, "Scenario JSON")->required();
  rn->add_option("--out", out_r, "Trajectory CSV");
  rn->add_option("--summary", summary_r, "Summary JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*st) return sweep_tunneling(g, radii, terrain_t, out_t, tol_t, speed_t);
    if (*sm) return sweep_mconfig(g, angles, terrain_m, duration_m, radius_m, base_m, out_m);
    if (*ba) return bus_analyze(g, rate, max_n, samples, sample_n, trace, trace_cycles);
    if (*cal) return calibrate_cmd(g, obs, out_dir, tol_c);
    if (*sv) return serve(g, port, host, duration_s, terrain_s);
    if (*rn) return run_cmd(g, scenario, out_r, summary_r);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
