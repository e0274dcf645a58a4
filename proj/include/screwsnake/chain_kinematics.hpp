#pragma once

// Forward planar kinematics of the screw-segment chain, expressed in the head
// segment's frame: +x points forward along the head axis and the chain trails
// toward -x. Segments are indexed from 0 (head); joint k connects segment k to
// segment k + 1. A joint angle below pi bends the trailing chain toward +y.

#include "screwsnake/types.hpp"

namespace screwsnake {

/// Sum of deflections of the first `count` joints (theta'_{1:count}).
template <typename Scalar>
Scalar cumulative_deflection(const JointStateT<Scalar>& joints, std::size_t count) {
  Scalar sum(0);
  for (std::size_t k = 0; k < count; ++k) sum += deflection_of(joints.planar[k]);
  return sum;
}

/// Sum of the first `count` joint rates.
template <typename Scalar>
Scalar cumulative_rate(const JointStateT<Scalar>& joints, std::size_t count) {
  Scalar sum(0);
  for (std::size_t k = 0; k < count; ++k) sum += joints.rates[k];
  return sum;
}

/// Heading of segment `seg`'s forward axis relative to the head axis.
template <typename Scalar>
Scalar segment_heading(const JointStateT<Scalar>& joints, std::size_t seg) {
  return -cumulative_deflection(joints, seg);
}

/// Center of segment `seg` in the head frame.
template <typename Scalar>
Vector2<Scalar> segment_position(const ChainGeometryT<Scalar>& geom,
                                 const JointStateT<Scalar>& joints, std::size_t seg) {
  using std::cos;
  using std::sin;
  check_segment_index(seg, geom.n_segments);
  validate(geom, joints);
  const Scalar l = geom.l;
  Scalar x = -l;
  Scalar y(0);
  for (std::size_t j = 1; j <= seg; ++j) {
    const Scalar d = cumulative_deflection(joints, j);
    x -= 2 * l * cos(d);
    y += 2 * l * sin(d);
  }
  const Scalar d_last = cumulative_deflection(joints, seg);
  x += l * cos(d_last);
  y -= l * sin(d_last);
  return {x, y};
}

/// Location of U-joint `joint` (between segments joint and joint + 1) in the head frame.
template <typename Scalar>
Vector2<Scalar> joint_position(const ChainGeometryT<Scalar>& geom,
                               const JointStateT<Scalar>& joints, std::size_t joint) {
  using std::cos;
  using std::sin;
  if (joint >= geom.n_joints())
    throw InvalidInput("joint index " + std::to_string(joint) + " out of range");
  const Vector2<Scalar> c = segment_position(geom, joints, joint);
  const Scalar d = cumulative_deflection(joints, joint);
  return {c.x() - geom.l * cos(d), c.y() + geom.l * sin(d)};
}

/// All segment centers as columns, head first.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, Eigen::Dynamic> segment_positions(const ChainGeometryT<Scalar>& geom,
                                                           const JointStateT<Scalar>& joints) {
  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> out(2, geom.n_segments);
  for (std::size_t i = 0; i < geom.n_segments; ++i)
    out.col(static_cast<Eigen::Index>(i)) = segment_position(geom, joints, i);
  return out;
}

/// Velocity of segment `seg`'s center induced by joint motion alone, in the
/// head frame. This is the time derivative of segment_position along
/// theta(t) = theta + rates * t.
template <typename Scalar>
Vector2<Scalar> induced_velocity(const ChainGeometryT<Scalar>& geom,
                                 const JointStateT<Scalar>& joints, std::size_t seg) {
  using std::cos;
  using std::sin;
  check_segment_index(seg, geom.n_segments);
  if (static_cast<std::size_t>(joints.rates.size()) != geom.n_joints())
    throw InvalidInput("joint rate vector size does not match the chain");
  const Scalar l = geom.l;
  Vector2<Scalar> w = Vector2<Scalar>::Zero();
  for (std::size_t j = 1; j <= seg; ++j) {
    const Scalar d = cumulative_deflection(joints, j);
    const Scalar r = cumulative_rate(joints, j);
    w.x() -= 2 * l * sin(d) * r;
    w.y() -= 2 * l * cos(d) * r;
  }
  if (seg > 0) {
    const Scalar d = cumulative_deflection(joints, seg);
    const Scalar r = cumulative_rate(joints, seg);
    w.x() += l * sin(d) * r;
    w.y() += l * cos(d) * r;
  }
  return w;
}

/// Velocity of a point rigidly attached to the head frame moving with `twist`.
template <typename Scalar>
Vector2<Scalar> rigid_point_velocity(const BodyTwistT<Scalar>& twist, const Vector2<Scalar>& p) {
  return {twist.vx - p.y() * twist.yaw_rate, twist.vy + p.x() * twist.yaw_rate};
}

/// Axial/radial velocity of segment `seg`: body motion plus joint-induced
/// motion, projected onto the segment's own axes.
template <typename Scalar>
SegmentVelocityT<Scalar> axial_radial_velocity(const ChainGeometryT<Scalar>& geom,
                                               const JointStateT<Scalar>& joints,
                                               const BodyTwistT<Scalar>& twist, std::size_t seg) {
  expect_frame(twist, Frame::Head);
  const Vector2<Scalar> p = segment_position(geom, joints, seg);
  const Vector2<Scalar> v = rigid_point_velocity(twist, p) + induced_velocity(geom, joints, seg);
  const Vector2<Scalar> local = rotation(-segment_heading(joints, seg)) * v;
  return {local.x(), local.y()};
}

}  // namespace screwsnake
