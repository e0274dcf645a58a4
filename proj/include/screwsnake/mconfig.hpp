#pragma once

// M-configuration: four segments posed in a zigzag with alternating joint
// deflections so the screws roll like wheels. The M-center frame sits on the
// line through the segment centers; +y_m points toward the head and the robot
// drives along x_m. Segment k's axis lies at pi/2 - (-1)^k theta'_m/2 in that
// frame.

#include "screwsnake/chain_kinematics.hpp"
#include "screwsnake/types.hpp"

#include <algorithm>

namespace screwsnake {

inline constexpr std::size_t kMConfigSegments = 4;

template <typename Scalar>
void validate_mconfig(const ChainGeometryT<Scalar>& geom, Scalar theta_m) {
  if (geom.n_segments != kMConfigSegments)
    throw UnsupportedConfiguration("the M-configuration model is defined for 4 segments only");
  if (!(theta_m > kPi<Scalar> / 2 && theta_m <= kPi<Scalar> + Scalar(1e-12)))
    throw InvalidInput("theta_m must lie in (pi/2, pi]");
  if (deflection_of(theta_m) > geom.joint_limit + Scalar(1e-12))
    throw InvalidInput("theta_m deflection exceeds the joint limit");
}

/// +1 for even segments, -1 for odd ones.
inline int mconfig_parity(std::size_t seg) { return seg % 2 == 0 ? 1 : -1; }

/// Segment center in the M-center frame.
template <typename Scalar>
Vector2<Scalar> mconfig_position(const ChainGeometryT<Scalar>& geom, Scalar theta_m,
                                 std::size_t seg) {
  using std::cos;
  validate_mconfig(geom, theta_m);
  check_segment_index(seg, geom.n_segments);
  const Scalar coeff = Scalar(3) - Scalar(2) * Scalar(seg);
  return {Scalar(0), coeff * geom.l * cos(deflection_of(theta_m) / Scalar(2))};
}

template <typename Scalar>
SegmentVelocityT<Scalar> mconfig_axial_radial(const ChainGeometryT<Scalar>& geom, Scalar theta_m,
                                              const BodyTwistT<Scalar>& twist, std::size_t seg) {
  expect_frame(twist, Frame::MCenter);
  const Scalar y = mconfig_position(geom, theta_m, seg).y();
  const Scalar beta = Scalar(mconfig_parity(seg)) * deflection_of(theta_m) / Scalar(2) -
                      kPi<Scalar> / Scalar(2);
  const Vector2<Scalar> v(twist.vx - y * twist.yaw_rate, twist.vy);
  const Vector2<Scalar> local = rotation(beta) * v;
  return {local.x(), local.y()};
}

/// s = 1 - u_r / (omega r_s).
template <typename Scalar>
Scalar slippage_ratio(Scalar radial_velocity, Scalar omega, Scalar r_s) {
  if (omega == Scalar(0)) throw UndefinedSlippage("slippage is undefined at zero screw speed");
  return Scalar(1) - radial_velocity / (omega * r_s);
}

/// Screw rate that yields the commanded (xdot_m, yaw rate) at slip `slip`.
template <typename Scalar>
Scalar screw_speed_ik(const ChainGeometryT<Scalar>& geom, Scalar theta_m, Scalar vx,
                      Scalar yaw_rate, Scalar slip, std::size_t seg) {
  using std::cos;
  if (!(slip < Scalar(1)))
    throw ZeroTraction("slip ratio >= 1 leaves no traction to command");
  const Scalar y = mconfig_position(geom, theta_m, seg).y();
  return cos(deflection_of(theta_m) / Scalar(2)) * (y * yaw_rate - vx) /
         (geom.r_s * (Scalar(1) - slip));
}

/// omega_i / omega_j for a turn of radius R_m, assuming equal slip on all segments.
template <typename Scalar>
Scalar speed_ratio(const ChainGeometryT<Scalar>& geom, Scalar theta_m, TurnRadius radius,
                   std::size_t i, std::size_t j) {
  using std::abs;
  const Scalar yi = mconfig_position(geom, theta_m, i).y();
  const Scalar yj = mconfig_position(geom, theta_m, j).y();
  if (radius.is_straight()) return Scalar(1);
  const Scalar r = Scalar(radius.value);
  if (abs(yj - r) <= Scalar(1e-12) * geom.l) throw SegmentOnCenter(j);
  return (yi - r) / (yj - r);
}

/// Joint angles forming the zigzag: deflections -d, +d, -d.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mconfig_joint_angles(const ChainGeometryT<Scalar>& geom,
                                                              Scalar theta_m) {
  validate_mconfig(geom, theta_m);
  const Scalar d = deflection_of(theta_m);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> angles(static_cast<Eigen::Index>(geom.n_joints()));
  for (std::size_t k = 0; k < geom.n_joints(); ++k)
    angles[static_cast<Eigen::Index>(k)] = angle_from_deflection(-Scalar(mconfig_parity(k)) * d);
  return angles;
}

/// Pose of the M-center frame in the head frame.
template <typename Scalar>
struct PlanarFrame {
  Vector2<Scalar> origin = Vector2<Scalar>::Zero();
  Scalar heading = 0;  // angle of the frame's x axis
};

/// Locates the M-center frame from the actual chain pose: origin at the
/// centroid of the segment centers, y axis from tail to head along the line.
template <typename Scalar>
PlanarFrame<Scalar> mconfig_frame_in_head(const ChainGeometryT<Scalar>& geom,
                                          const JointStateT<Scalar>& joints) {
  using std::atan2;
  const auto pts = segment_positions(geom, joints);
  PlanarFrame<Scalar> f;
  f.origin = pts.rowwise().mean();
  const Vector2<Scalar> axis_y = pts.col(0) - pts.col(pts.cols() - 1);
  f.heading = atan2(axis_y.y(), axis_y.x()) - kPi<Scalar> / Scalar(2);
  return f;
}

struct MConfigSetpoints {
  Eigen::VectorXd joint_angles;
  Eigen::VectorXd screw_omegas;
  bool saturated = false;
};

/// Joint poses plus screw rates whose pairwise ratios follow the equal-slip
/// speed ratio. `base_speed` is a screw speed fraction: the fastest screw runs
/// at |base_speed| * omega_max. Positive values drive toward +x_m (and turn
/// counter-clockwise when turning in place). |base_speed| > 1 is clamped and
/// flagged.
inline MConfigSetpoints mconfig_setpoints(const ChainGeometry& geom, double theta_m,
                                          TurnRadius radius, double base_speed) {
  validate(geom);
  validate_mconfig(geom, theta_m);
  if (!std::isfinite(base_speed)) throw InvalidInput("base_speed must be finite");
  MConfigSetpoints out;
  out.joint_angles = mconfig_joint_angles(geom, theta_m);
  if (std::abs(base_speed) > 1.0) {
    out.saturated = true;
    base_speed = std::clamp(base_speed, -1.0, 1.0);
  }
  const auto n = static_cast<Eigen::Index>(geom.n_segments);
  out.screw_omegas.resize(n);
  if (radius.is_straight()) {
    // Rolling toward +x_m needs negative screw rates (see screw_speed_ik).
    out.screw_omegas.setConstant(-base_speed * geom.omega_max);
    return out;
  }
  const double r = radius.value;
  const double sign = r < 0 ? -1.0 : 1.0;
  double largest = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = mconfig_position(geom, theta_m, static_cast<std::size_t>(i)).y();
    out.screw_omegas[i] = sign * (y - r);
    largest = std::max(largest, std::abs(y - r));
  }
  out.screw_omegas *= base_speed * geom.omega_max / largest;
  return out;
}

}  // namespace screwsnake
