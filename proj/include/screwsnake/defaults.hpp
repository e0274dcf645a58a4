#pragma once

// Experiment defaults shared by the CLI and the acceptance suite. They live in
// data/defaults.json so runs are reproducible without flags.

#include "screwsnake/bus.hpp"
#include "screwsnake/locomotion.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace screwsnake {

struct Defaults {
  int version = 1;
  std::uint64_t seed = 0;
  SimSettings settings;

  std::vector<double> tunneling_radii = {0.18, 0.25, 0.43, 0.70, 1.00};
  std::string tunneling_terrain = "ideal_screw_medium";
  double tunneling_tol = 0.02;  // relative to the commanded radius

  std::vector<double> mconfig_angles_deg = {100, 120, 140, 160, 180};
  double mconfig_duration = 10.0;
  double mconfig_base_speed = 1.0;
  std::string mconfig_turn_terrain = "concrete";
  double mconfig_turn_theta_deg = 140.0;
  std::vector<double> mconfig_turn_radii = {0.2, 0.51, 1.0};
  double mconfig_turn_tol = 0.04;
  double turn_in_place_tol = 0.01;

  std::string observations = "observations/table_speeds.csv";
  double cell_tol = 0.02;
  double spread_tol = 0.05;
  double spread_theta_deg = 140.0;

  BusModel bus;
  std::size_t bus_max_n = 20;
  std::size_t rtt_samples = 1000;
  double rtt_mean_tol = 0.02;
  double rtt_sd_rel_tol = 0.2;

  std::string corridor_scenario = "scenarios/corridor_zigzag.json";
  std::size_t property_cases = 1000;
};

/// Directory holding defaults.json, terrain/, observations/ and scenarios/:
/// `override_dir` if non-empty, else $SCREWSNAKE_CONFIG_DIR, else the source tree's data/.
std::filesystem::path config_directory(const std::string& override_dir = "");

/// Reads `<dir>/defaults.json`; a missing file gives the built-in values.
Defaults load_defaults(const std::filesystem::path& dir);

}  // namespace screwsnake
