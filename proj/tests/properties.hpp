#pragma once

// Randomized kinematic properties shared by the unit tests and the acceptance
// binary. Each returns the worst error seen over `cases` draws.

#include "screwsnake/chain_kinematics.hpp"
#include "screwsnake/locomotion.hpp"
#include "screwsnake/mconfig.hpp"
#include "screwsnake/tunneling.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace props {

using namespace screwsnake;

inline constexpr double kFdTol = 1e-7;         // m/s
inline constexpr double kTwistTol = 1e-9;      // relative
inline constexpr double kTangentTol = 1e-9;    // m per m of radius
inline constexpr double kClosureTol = 1e-9;    // relative
inline constexpr double kRatioTol = 1e-9;      // relative

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(gen);
}

inline double rel_err(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

inline JointState random_joints(std::mt19937_64& gen, const ChainGeometry& g, double max_rate = 1.0) {
  JointState j = JointState::straight(g.n_joints());
  for (std::size_t k = 0; k < g.n_joints(); ++k) {
    j.planar[static_cast<Eigen::Index>(k)] = angle_from_deflection(uniform(gen, -g.joint_limit, g.joint_limit));
    j.rates[static_cast<Eigen::Index>(k)] = uniform(gen, -max_rate, max_rate);
  }
  return j;
}

// Joint-induced segment velocity against a central difference of position.
inline double fd_velocity(std::mt19937_64& gen, int cases) {
  const double h = 1e-6;
  double worst = 0.0;
  for (int c = 0; c < cases; ++c) {
    const ChainGeometry g;
    JointState j = random_joints(gen, g);
    for (Eigen::Index k = 0; k < j.planar.size(); ++k)
      j.planar[k] = std::clamp(j.planar[k], kPi<double> / 2 + 2 * h, 3 * kPi<double> / 2 - 2 * h);
    JointState fwd = j, back = j;
    fwd.planar += h * j.rates;
    back.planar -= h * j.rates;
    for (std::size_t i = 0; i < g.n_segments; ++i) {
      const Eigen::Vector2d fd = (segment_position(g, fwd, i) - segment_position(g, back, i)) / (2 * h);
      worst = std::max(worst, (induced_velocity(g, j, i) - fd).norm());
    }
  }
  return worst;
}

// Least-squares twist fit on exact rigid-body point velocities.
inline double rigid_twist(std::mt19937_64& gen, int cases) {
  double worst = 0.0;
  for (int c = 0; c < cases; ++c) {
    const BodyTwist t{Frame::Head, uniform(gen, -1, 1), uniform(gen, -1, 1), uniform(gen, -3, 3)};
    const int n = 2 + c % 6;
    Eigen::Matrix2Xd pts(2, n), vel(2, n);
    for (int i = 0; i < n; ++i) {
      pts.col(i) = Eigen::Vector2d(uniform(gen, -1, 1), uniform(gen, -1, 1));
      vel.col(i) = Eigen::Vector2d(t.vx - pts(1, i) * t.yaw_rate, t.vy + pts(0, i) * t.yaw_rate);
    }
    const BodyTwist fit = fit_rigid_twist<double>(pts, vel, Frame::Head);
    worst = std::max({worst, rel_err(fit.vx, t.vx), rel_err(fit.vy, t.vy), rel_err(fit.yaw_rate, t.yaw_rate)});
  }
  return worst;
}

// With a common joint angle every segment axis passes through (0, R), and a
// rotation about that point has no radial component on any segment.
inline double tangent_intersection(std::mt19937_64& gen, int cases) {
  double worst = 0.0;
  for (int c = 0; c < cases; ++c) {
    const auto g = ChainGeometry::with_segments(2 + static_cast<std::size_t>(c % 5));
    double r = uniform(gen, min_turn_radius(g), 5.0);
    if (c % 2) r = -r;
    const double theta = heading_angle(g, TurnRadius::of(r));
    const JointState j =
        JointState::from_angles(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(g.n_joints()), theta));
    const Eigen::Vector2d center(0.0, r);
    const double scale = std::max(1.0, std::abs(r));
    const BodyTwist t{Frame::Head, r * 0.5, 0.0, 0.5};
    for (std::size_t i = 0; i < g.n_segments; ++i) {
      const double a = segment_heading(j, i);
      const Eigen::Vector2d axis(std::cos(a), std::sin(a));
      worst = std::max(worst, std::abs(axis.dot(center - segment_position(g, j, i))) / scale);
      worst = std::max(worst, std::abs(axial_radial_velocity(g, JointState(j), t, i).radial) / scale);
    }
  }
  return worst;
}

// Inverse screw speeds pushed back through the forward model recover the
// commanded twist and slip.
inline double ik_closure(std::mt19937_64& gen, int cases) {
  const ChainGeometry g;
  double worst = 0.0;
  for (int c = 0; c < cases; ++c) {
    const double theta_m = uniform(gen, 95, 179) * kPi<double> / 180.0;
    const double slip = uniform(gen, 0.0, 0.95);
    const BodyTwist t{Frame::MCenter, uniform(gen, -0.3, 0.3), 0.0, uniform(gen, -1, 1)};
    Eigen::Matrix2Xd pts(2, 4), vel(2, 4);
    for (std::size_t i = 0; i < 4; ++i) {
      const double w = screw_speed_ik(g, theta_m, t.vx, t.yaw_rate, slip, i);
      const SegmentVelocity u = mconfig_axial_radial(g, theta_m, t, i);
      if (std::abs(w) > 1e-9) worst = std::max(worst, rel_err(slippage_ratio(u.radial, w, g.r_s), slip));
      const double beta = mconfig_parity(i) * deflection_of(theta_m) / 2 - kPi<double> / 2;
      pts.col(static_cast<Eigen::Index>(i)) = mconfig_position(g, theta_m, i);
      vel.col(static_cast<Eigen::Index>(i)) = rotation(-beta) * Eigen::Vector2d(u.axial, u.radial);
    }
    const BodyTwist back = fit_rigid_twist<double>(pts, vel, Frame::MCenter);
    worst = std::max({worst, rel_err(back.vx, t.vx), std::abs(back.vy), rel_err(back.yaw_rate, t.yaw_rate)});
  }
  return worst;
}

// r_ij * r_jk = r_ik, and the ratios agree with the inverse model.
inline double ratio_transitivity(std::mt19937_64& gen, int cases) {
  const ChainGeometry g;
  double worst = 0.0;
  int checked = 0;
  while (checked < cases) {
    const double theta_m = uniform(gen, 95, 179) * kPi<double> / 180.0;
    const double r = uniform(gen, -2, 2);
    bool near_center = false;
    for (std::size_t i = 0; i < 4; ++i) near_center |= std::abs(mconfig_position(g, theta_m, i).y() - r) < 1e-3;
    if (near_center) continue;
    const auto R = TurnRadius::of(r);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t k = 0; k < 4; ++k)
          worst = std::max(worst, rel_err(speed_ratio(g, theta_m, R, i, j) * speed_ratio(g, theta_m, R, j, k),
                                          speed_ratio(g, theta_m, R, i, k)));
    const double yaw = 0.7;
    const double w0 = screw_speed_ik(g, theta_m, r * yaw, yaw, 0.4, 0);
    const double w3 = screw_speed_ik(g, theta_m, r * yaw, yaw, 0.4, 3);
    worst = std::max(worst, rel_err(w0 / w3, speed_ratio(g, theta_m, R, 0, 3)));
    ++checked;
  }
  return worst;
}

}  // namespace props
