#pragma once

// Canned simulator runs behind the sweeps, calibration and acceptance checks.

#include "screwsnake/locomotion.hpp"
#include "screwsnake/tunneling.hpp"

namespace screwsnake {

struct OpenLoopRun {
  TrajectoryLog log;
  int saturated_steps = 0;
};

/// Holds one command for `duration` seconds, logging the reference pose at
/// t = 0 and after every tick.
OpenLoopRun run_open_loop(Simulator& sim, const SimCommand& cmd, double duration);

/// Holds one command until the reference heading has turned by `sweep`
/// radians or `max_duration` elapses.
OpenLoopRun run_until_swept(Simulator& sim, const SimCommand& cmd, double sweep,
                            double max_duration);

/// Initial state with the joints already in the M pose.
PoseState mconfig_initial_state(const ChainGeometry& geom, double theta_m);

struct TunnelingTurnResult {
  double commanded = 0.0;
  double theta = 0.0;   // common joint angle
  double fitted = 0.0;
  double error = 0.0;   // |fitted - |commanded||
  double rms = 0.0;
};

/// Tunneling turn started in the common-joint-angle pose, run for one full revolution.
TunnelingTurnResult tunneling_turn(const ChainGeometry& geom, const TerrainProfile& terrain,
                                   double radius, const SimSettings& settings,
                                   double speed_fraction = 1.0);

/// Signed mean speed along the initial x_m axis for straight M-configuration
/// driving at `base_speed` of full screw rate.
double mconfig_mean_speed(const ChainGeometry& geom, const TerrainProfile& terrain, double theta_m,
                          const SimSettings& settings, double duration, double base_speed = 1.0);

struct MConfigTurnResult {
  double target = 0.0;
  double fitted = 0.0;
  double error = 0.0;
  double rms = 0.0;
  double swept = 0.0;
};

MConfigTurnResult mconfig_turn(const ChainGeometry& geom, const TerrainProfile& terrain,
                               double theta_m, double radius, const SimSettings& settings,
                               double base_speed = 1.0, double max_duration = 600.0);

}  // namespace screwsnake
