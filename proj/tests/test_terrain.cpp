#include "screwsnake/calibration.hpp"
#include "screwsnake/experiments.hpp"
#include "screwsnake/terrain.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>

using namespace screwsnake;
using namespace test;

TEST_CASE("ideal medium turns full screw rate into lead speed") {
  const ChainGeometry g;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto rv = realized_velocity(ideal_screw_medium(), g, g.omega_max, i);
    CHECK(rv.velocity.axial == doctest::Approx(g.handedness[i] * 0.23));
    CHECK(rv.velocity.radial == 0.0);
    CHECK_FALSE(rv.saturated);
  }
  CHECK(g.omega_max == doctest::Approx(0.23 / (0.064 * std::tan(22 * kDeg))));
}

TEST_CASE("rigid surface behaves like a slipping wheel") {
  const ChainGeometry g;
  const TerrainProfile p{"rigid", 0.0, 0.3, 0.7, ""};
  const auto rv = realized_velocity(p, g, 4.0, 1);
  CHECK(rv.velocity.axial == 0.0);
  CHECK(rv.velocity.radial == doctest::Approx(0.7 * 4.0 * g.r_s));
  const auto zero = realized_velocity(p, g, 0.0, 2);
  CHECK(zero.velocity.axial == 0.0);
  CHECK(zero.velocity.radial == 0.0);
}

TEST_CASE("realized velocity is linear in screw rate and saturates at omega_max") {
  const ChainGeometry g;
  const TerrainProfile p{"mix", 0.4, 0.6, 0.4, ""};
  for (int c = 0; c < kCases; ++c) {
    const double w = uniform(-g.omega_max, g.omega_max);
    const double k = uniform(-1, 1);
    const auto a = realized_velocity(p, g, w, 0).velocity;
    const auto b = realized_velocity(p, g, k * w, 0).velocity;
    REQUIRE(b.axial == doctest::Approx(k * a.axial));
    REQUIRE(b.radial == doctest::Approx(k * a.radial));
  }
  const auto sat = realized_velocity(p, g, -3 * g.omega_max, 0);
  CHECK(sat.saturated);
  CHECK(sat.omega == doctest::Approx(-g.omega_max));
  CHECK_THROWS_AS(realized_velocity(p, g, std::nan(""), 0), InvalidInput);
}

TEST_CASE("terrain profiles validate and round-trip through text") {
  CHECK_THROWS_AS(validate(TerrainProfile{"x", 1.2, 0.5, 0.5, ""}), InvalidInput);
  CHECK_THROWS_AS(validate(TerrainProfile{"x", 0.0, 1.0, 0.5, ""}), InvalidInput);
  const TerrainProfile p{"sand", 0.123456789012345, 0.87654321, 0.25, "hand made"};
  const TerrainProfile q = parse_terrain_profile(format_terrain_profile(p));
  CHECK(q.name == p.name);
  CHECK(q.kappa_axial == p.kappa_axial);
  CHECK(q.slip == p.slip);
  CHECK(q.lateral_damping == p.lateral_damping);
  CHECK(q.provenance == p.provenance);
  CHECK_THROWS_AS(parse_terrain_profile("name = a\nkappa_axial = lots\n"), InvalidInput);
}

TEST_CASE("shipped profiles load") {
  const std::filesystem::path dir = SCREWSNAKE_TEST_DATA_DIR;
  for (const auto& name : bundled_terrain_names()) {
    const TerrainProfile p = resolve_terrain(name, dir);
    CHECK(p.name == name);
    CHECK_NOTHROW(validate(p));
  }
  CHECK_THROWS_AS(resolve_terrain("no_such_surface", dir), InvalidInput);
}

TEST_CASE("box-constrained two-parameter least squares matches a grid search") {
  for (int c = 0; c < 200; ++c) {
    const int m = 2 + c % 4;
    Eigen::VectorXd r(m), q(m), y(m);
    for (int i = 0; i < m; ++i) {
      r[i] = uniform(0.2, 0.6);
      q[i] = uniform(-0.2, 0.0);
      y[i] = uniform(-0.1, 0.5);
    }
    const Eigen::Vector2d x = bounded_lsq2(r, q, y);
    REQUIRE(x[0] >= 0.0);
    REQUIRE(x[0] <= 1.0);
    REQUIRE(x[1] >= 0.0);
    REQUIRE(x[1] <= 1.0);
    const double best = (x[0] * r + x[1] * q - y).squaredNorm();
    double grid = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= 200; ++a)
      for (int b = 0; b <= 200; ++b)
        grid = std::min(grid, (a / 200.0 * r + b / 200.0 * q - y).squaredNorm());
    REQUIRE(best <= grid + 1e-12);
  }
}

TEST_CASE("calibration reproduces measured concrete speeds") {
  const ChainGeometry g;
  const auto obs = parse_observations(
      "surface,theta_m_deg,speed_mps\nconcrete,100,0.20\nconcrete,120,0.22\nconcrete,140,0.24\nconcrete,160,0.25\n");
  const CalibrationResult r = calibrate("concrete", obs, g, {});
  REQUIRE(r.residuals.size() == 4);
  CHECK(r.max_abs_residual < 0.02);
  for (const auto& cell : r.residuals) CHECK(std::abs(cell.residual) <= r.max_abs_residual + 1e-15);
}

TEST_CASE("calibration recovers a known profile from its own simulated speeds") {
  const ChainGeometry g;
  CalibrationOptions opts;
  for (const TerrainProfile truth : {TerrainProfile{"a", 0.3, 0.45, 0.55, ""}, TerrainProfile{"b", 0.0, 0.7, 0.3, ""},
                                     TerrainProfile{"c", 0.9, 0.2, 0.8, ""}}) {
    std::vector<SpeedObservation> obs;
    for (double deg : {100.0, 120.0, 140.0, 160.0})
      obs.push_back({"s", deg, mconfig_mean_speed(g, truth, deg * kDeg, opts.settings, opts.duration), true});
    const CalibrationResult fit = calibrate("s", obs, g, opts);
    CHECK(fit.profile.slip == doctest::Approx(truth.slip).epsilon(1e-6));
    CHECK(fit.profile.kappa_axial == doctest::Approx(truth.kappa_axial).epsilon(1e-6));
    // Calibrating again on the fitted profile's outputs changes nothing.
    std::vector<SpeedObservation> again;
    for (const auto& cell : fit.residuals) again.push_back({"s", cell.theta_m_deg, cell.simulated, true});
    const CalibrationResult twice = calibrate("s", again, g, opts);
    CHECK(twice.profile.slip == doctest::Approx(fit.profile.slip).epsilon(1e-9));
    CHECK(twice.profile.kappa_axial == doctest::Approx(fit.profile.kappa_axial).epsilon(1e-9));
  }
}

TEST_CASE("calibration refuses underdetermined fits") {
  const ChainGeometry g;
  const auto one = parse_observations("surface,theta_m_deg,speed_mps\ntile,140,0.23\n");
  CHECK_THROWS_AS(calibrate("tile", one, g, {}), UnderdeterminedFit);
  CalibrationOptions fixed;
  fixed.fit_kappa = false;
  CHECK_NOTHROW(calibrate("tile", one, g, fixed));
  const auto excluded = parse_observations("surface,theta_m_deg,speed_mps,use\ntile,140,0.23,1\ntile,160,0.2,0\n");
  CHECK_THROWS_AS(calibrate("tile", excluded, g, {}), UnderdeterminedFit);
  CHECK_THROWS_AS(parse_observations("surface,theta\ntile,140\n"), InvalidInput);
}
