#pragma once

// Scenario documents (JSON) describing one simulator run: mode, geometry,
// terrain, a piecewise-constant command schedule and an optional corridor.

#include "screwsnake/corridor.hpp"
#include "screwsnake/locomotion.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace screwsnake {

/// Configuration error tagged with the offending field path, e.g. "commands[2].radius_m".
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)), detail_(what) {}
  const std::string& path() const { return path_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string path_;
  std::string detail_;
};

struct ScheduledCommand {
  double t = 0.0;
  std::optional<double> radius_m;          // absent = straight
  double speed = 0.0;                      // screw speed fraction
  double theta_m_deg = 140.0;              // M_CONFIG
  std::vector<double> joints_deg;          // TELEOP deflections
};

struct Scenario {
  std::string name = "scenario";
  Mode mode = Mode::Tunneling;
  ChainGeometry geometry;
  TerrainProfile terrain = ideal_screw_medium();
  SimSettings settings;
  double duration = 10.0;
  bool start_in_pose = true;
  double x0 = 0.0;
  double y0 = 0.0;
  double psi0 = 0.0;
  std::vector<ScheduledCommand> commands;
  std::optional<CorridorSpec> corridor;
  bool stop_at_exit = true;
};

/// Parses a scenario document. Terrain names resolve against `config_dir`.
Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& config_dir);
Scenario load_scenario(const std::filesystem::path& path, const std::filesystem::path& config_dir);

/// Command in force at time t (the last entry with entry.t <= t).
const ScheduledCommand& command_at(const Scenario& scenario, double t);

/// Simulator command for a schedule entry under the scenario's mode.
SimCommand to_sim_command(const Scenario& scenario, const ScheduledCommand& command);

struct ScenarioResult {
  TrajectoryLog log;
  nlohmann::json summary;
};

ScenarioResult run_scenario(const Scenario& scenario);

}  // namespace screwsnake
