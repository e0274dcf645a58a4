#pragma once

// Declared linear screw-terrain traction model. Per terrain two coefficients
// decide how screw rotation turns into segment velocity:
//   v_axial  = handedness * kappa_axial * omega * lead_per_radian
//   v_radial = (1 - slip) * omega * r_s
// plus a lateral_damping factor used in corridor-conforming mode.

#include "screwsnake/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace screwsnake {

struct TerrainProfile {
  std::string name;
  double kappa_axial = 1.0;
  double slip = 1.0;
  double lateral_damping = 0.0;
  std::string provenance;
};

/// Throws InvalidInput when a coefficient leaves [0, 1] or no propulsion remains.
void validate(const TerrainProfile& profile);

/// Screw-propellable medium with no wheel-like traction at all.
TerrainProfile ideal_screw_medium();

/// Names of the profiles shipped under data/terrain.
const std::vector<std::string>& bundled_terrain_names();

struct RealizedVelocity {
  SegmentVelocity velocity;
  double omega = 0.0;  // command after clamping
  bool saturated = false;
};

/// Segment velocity produced by screw rate `omega` on segment `seg`.
/// Commands beyond omega_max are clamped and flagged.
RealizedVelocity realized_velocity(const TerrainProfile& profile, const ChainGeometry& geom,
                                   double omega, std::size_t seg);

// Profile files are flat "key = value" text, one key per line, '#' comments.
TerrainProfile parse_terrain_profile(const std::string& text);
std::string format_terrain_profile(const TerrainProfile& profile);
TerrainProfile load_terrain_profile(const std::filesystem::path& path);
void save_terrain_profile(const TerrainProfile& profile, const std::filesystem::path& path);

/// Resolves a terrain reference: a file path if it exists, otherwise
/// `<config_dir>/terrain/<name>.profile`, otherwise the built-in ideal medium.
TerrainProfile resolve_terrain(const std::string& reference,
                               const std::filesystem::path& config_dir);

}  // namespace screwsnake
