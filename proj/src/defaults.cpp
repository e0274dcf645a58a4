#include "screwsnake/defaults.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>

#ifndef SCREWSNAKE_DATA_DIR
#define SCREWSNAKE_DATA_DIR "data"
#endif

namespace screwsnake {

std::filesystem::path config_directory(const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (const char* env = std::getenv("SCREWSNAKE_CONFIG_DIR"); env && *env) return env;
  return SCREWSNAKE_DATA_DIR;
}

namespace {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

Defaults load_defaults(const std::filesystem::path& dir) {
  Defaults d;
  const auto path = dir / "defaults.json";
  std::ifstream in(path);
  if (!in) return d;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    read(j, "version", d.version);
    read(j, "seed", d.seed);
    if (j.contains("sim")) {
      const auto& s = j["sim"];
      read(s, "dt", d.settings.dt);
      read(s, "joint_rate_limit", d.settings.joint_rate_limit);
      read(s, "velocity_noise_sd", d.settings.velocity_noise_sd);
    }
    if (j.contains("tunneling")) {
      const auto& t = j["tunneling"];
      read(t, "radii", d.tunneling_radii);
      read(t, "terrain", d.tunneling_terrain);
      read(t, "tol_fraction", d.tunneling_tol);
    }
    if (j.contains("mconfig")) {
      const auto& m = j["mconfig"];
      read(m, "angles_deg", d.mconfig_angles_deg);
      read(m, "duration", d.mconfig_duration);
      read(m, "base_speed", d.mconfig_base_speed);
      read(m, "turn_terrain", d.mconfig_turn_terrain);
      read(m, "turn_theta_deg", d.mconfig_turn_theta_deg);
      read(m, "turn_radii", d.mconfig_turn_radii);
      read(m, "turn_tol", d.mconfig_turn_tol);
      read(m, "turn_in_place_tol", d.turn_in_place_tol);
    }
    if (j.contains("calibration")) {
      const auto& c = j["calibration"];
      read(c, "observations", d.observations);
      read(c, "cell_tol", d.cell_tol);
      read(c, "spread_tol", d.spread_tol);
      read(c, "spread_theta_deg", d.spread_theta_deg);
    }
    if (j.contains("bus")) {
      const auto& b = j["bus"];
      read(b, "base_rtt_ms", d.bus.base_rtt);
      read(b, "per_hop_ms", d.bus.per_hop);
      read(b, "loop_rate_hz", d.bus.loop_rate);
      read(b, "jitter_sd_ms", d.bus.jitter_sd);
      read(b, "max_n", d.bus_max_n);
      read(b, "rtt_samples", d.rtt_samples);
      read(b, "rtt_mean_tol_ms", d.rtt_mean_tol);
      read(b, "rtt_sd_rel_tol", d.rtt_sd_rel_tol);
    }
    if (j.contains("corridor")) read(j["corridor"], "scenario", d.corridor_scenario);
    read(j, "property_cases", d.property_cases);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  validate(d.settings);
  validate(d.bus);
  return d;
}

}  // namespace screwsnake
