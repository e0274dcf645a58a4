#pragma once

// Terrain calibration from measured M-configuration speeds. Simulated
// straight-driving speed is linear in (1 - slip) and kappa_axial, so the fit
// is a two-parameter bounded linear least-squares problem over two basis runs.

#include "screwsnake/locomotion.hpp"
#include "screwsnake/terrain.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace screwsnake {

class UnderdeterminedFit : public Error {
 public:
  using Error::Error;
};

struct SpeedObservation {
  std::string surface;
  double theta_m_deg = 0.0;
  double speed = 0.0;  // m/s
  bool use = true;     // false keeps the cell out of the fit but in the report
};

/// CSV with header `surface,theta_m_deg,speed_mps,use`.
std::vector<SpeedObservation> parse_observations(const std::string& text);
std::vector<SpeedObservation> load_observations(const std::filesystem::path& path);

struct CalibrationOptions {
  SimSettings settings;
  double duration = 10.0;
  double base_speed = 1.0;
  bool fit_kappa = true;
  double fixed_kappa = 0.0;  // used when fit_kappa is false
};

struct CalibrationResidual {
  double theta_m_deg = 0.0;
  double observed = 0.0;
  double simulated = 0.0;
  double residual = 0.0;  // simulated - observed
  bool used = true;
};

struct CalibrationResult {
  TerrainProfile profile;
  std::vector<CalibrationResidual> residuals;
  double max_abs_residual = 0.0;  // over fitted cells
};

/// Minimizes sum (a * r_i + b * q_i - y_i)^2 over a, b in [0, 1].
Eigen::Vector2d bounded_lsq2(const Eigen::VectorXd& r, const Eigen::VectorXd& q,
                             const Eigen::VectorXd& y);

/// Fits one surface. Observations for other surfaces are ignored.
CalibrationResult calibrate(const std::string& surface, const std::vector<SpeedObservation>& obs,
                            const ChainGeometry& geom, const CalibrationOptions& options);

/// Surfaces in first-appearance order.
std::vector<std::string> surfaces_of(const std::vector<SpeedObservation>& obs);

}  // namespace screwsnake
