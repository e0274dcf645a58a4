#pragma once

// Tunneling-mode control: joints held at a common angle, screws equally
// propelling. With every joint at the same angle the screw axes' normals all
// pass through one point, which becomes the center of rotation.

#include "screwsnake/types.hpp"

#include <vector>

namespace screwsnake {

enum class JointMode { PositionHold, Compliant };

struct TunnelingCommand {
  TurnRadius radius = TurnRadius::straight();
  double screw_speed_fraction = 0.0;  // [-1, 1]
};

struct TunnelingSetpoints {
  Eigen::VectorXd joint_angles;  // planar, pi = straight
  Eigen::VectorXd screw_omegas;  // rad/s
  std::vector<JointMode> modes;
};

struct ConformingSetpoints {
  double head_angle = kPi<double>;  // planar angle of joint 0
  std::vector<JointMode> modes;
};

/// Smallest feasible |R| given the joint deflection limit.
template <typename Scalar>
Scalar min_turn_radius(const ChainGeometryT<Scalar>& geom) {
  using std::tan;
  return geom.l / tan(geom.joint_limit / Scalar(2));
}

/// Common joint angle whose screw-axis normals meet at (0, R) in the head frame.
template <typename Scalar>
Scalar heading_angle(const ChainGeometryT<Scalar>& geom, TurnRadius radius) {
  using std::abs;
  using std::atan;
  if (radius.is_straight()) return kPi<Scalar>;
  const Scalar r = Scalar(radius.value);
  const Scalar r_min = min_turn_radius(geom);
  if (abs(r) < r_min * (Scalar(1) - Scalar(1e-12)))
    throw InfeasibleRadius(radius.value, static_cast<double>(r_min));
  using std::min;
  const Scalar deflection = min(geom.joint_limit, kPi<Scalar> - Scalar(2) * atan(abs(r) / geom.l));
  return r > 0 ? angle_from_deflection(deflection) : angle_from_deflection(-deflection);
}

inline TunnelingSetpoints tunneling_setpoints(const ChainGeometry& geom,
                                              const TunnelingCommand& cmd) {
  validate(geom);
  if (!(cmd.screw_speed_fraction >= -1.0 && cmd.screw_speed_fraction <= 1.0))
    throw InvalidInput("screw_speed_fraction must lie in [-1, 1]");
  const double theta = heading_angle(geom, cmd.radius);
  TunnelingSetpoints out;
  out.joint_angles = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(geom.n_joints()), theta);
  out.screw_omegas.resize(static_cast<Eigen::Index>(geom.n_segments));
  // Handedness-signed rotation makes every axial thrust point forward, while
  // the wheel-like radial components alternate and cancel.
  for (std::size_t i = 0; i < geom.n_segments; ++i)
    out.screw_omegas[static_cast<Eigen::Index>(i)] =
        geom.handedness[i] * cmd.screw_speed_fraction * geom.omega_max;
  out.modes.assign(geom.n_joints(), JointMode::PositionHold);
  return out;
}

/// Corridor-conforming mode: only the head joint is held, the rest go limp.
/// `head_steer` is the head joint's deflection.
inline ConformingSetpoints conforming_setpoints(const ChainGeometry& geom, double head_steer) {
  validate(geom);
  if (!std::isfinite(head_steer) || std::abs(head_steer) > geom.joint_limit + 1e-12)
    throw InvalidInput("head steer deflection exceeds the joint limit");
  ConformingSetpoints out;
  out.head_angle = angle_from_deflection(head_steer);
  out.modes.assign(geom.n_joints(), JointMode::Compliant);
  out.modes.front() = JointMode::PositionHold;
  return out;
}

}  // namespace screwsnake
