#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace screwsnake {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;

template <typename Scalar>
using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;

template <typename Scalar>
inline constexpr Scalar kPi = std::numbers::pi_v<Scalar>;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the declared domain (index range, joint limits, bad parameters).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class FrameMismatch : public Error {
 public:
  using Error::Error;
};

class UnsupportedConfiguration : public Error {
 public:
  using Error::Error;
};

class InfeasibleRadius : public Error {
 public:
  InfeasibleRadius(double requested, double r_min)
      : Error("turn radius " + std::to_string(requested) + " m is below the minimum " +
              std::to_string(r_min) + " m"),
        requested_(requested),
        r_min_(r_min) {}
  double requested() const { return requested_; }
  double r_min() const { return r_min_; }

 private:
  double requested_;
  double r_min_;
};

class UndefinedSlippage : public Error {
 public:
  using Error::Error;
};

/// Raised when the slip estimate leaves no traction (s >= 1) to invert.
class ZeroTraction : public Error {
 public:
  using Error::Error;
};

/// The denominator segment of a speed ratio sits on the rotation center.
class SegmentOnCenter : public Error {
 public:
  SegmentOnCenter(std::size_t segment)
      : Error("segment " + std::to_string(segment) +
              " sits on the rotation center; use it as the numerator instead"),
        segment_(segment) {}
  std::size_t segment() const { return segment_; }

 private:
  std::size_t segment_;
};

// ---------------------------------------------------------------------------
// Angle helpers. Joint angles use the planar convention where pi is straight;
// the deflection of a joint is pi - theta.

template <typename Scalar>
constexpr Scalar deflection_of(Scalar theta) {
  return kPi<Scalar> - theta;
}

template <typename Scalar>
constexpr Scalar angle_from_deflection(Scalar deflection) {
  return kPi<Scalar> - deflection;
}

/// Wraps to (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  using std::remainder;
  Scalar w = remainder(a, Scalar(2) * kPi<Scalar>);
  if (w <= -kPi<Scalar>) w += Scalar(2) * kPi<Scalar>;
  return w;
}

template <typename Scalar>
Matrix2<Scalar> rotation(Scalar angle) {
  using std::cos;
  using std::sin;
  Matrix2<Scalar> r;
  r << cos(angle), -sin(angle), sin(angle), cos(angle);
  return r;
}

// ---------------------------------------------------------------------------
// Domain types

/// Static robot parameters.
template <typename Scalar>
struct ChainGeometryT {
  std::size_t n_segments = 4;
  Scalar l = Scalar(0.182);          // segment center to adjacent U-joint [m]
  Scalar r_s = Scalar(0.064);        // screw radius [m]
  Scalar v_lead_max = Scalar(0.23);  // screw lead speed at omega_max [m/s]
  // Max screw angular rate. The lead per radian of a helix with a 22 degree
  // pitch angle is r_s * tan(22 deg), which puts omega_max near 8.9 rad/s.
  Scalar omega_max = Scalar(0.23) / (Scalar(0.064) * Scalar(0.40402622583515679));
  Scalar joint_limit = kPi<Scalar> / Scalar(2);  // per axis, as a deflection [rad]
  std::vector<int> handedness = {+1, -1, +1, -1};

  std::size_t n_joints() const { return n_segments - 1; }

  /// Axial advance per radian of screw rotation at zero slip.
  Scalar lead_per_radian() const { return v_lead_max / omega_max; }

  /// Builds a geometry with an alternating handedness pattern starting at +1.
  static ChainGeometryT with_segments(std::size_t n) {
    ChainGeometryT g;
    g.n_segments = n;
    g.handedness.resize(n);
    for (std::size_t i = 0; i < n; ++i) g.handedness[i] = (i % 2 == 0) ? +1 : -1;
    return g;
  }
};

using ChainGeometry = ChainGeometryT<double>;

template <typename Scalar>
void validate(const ChainGeometryT<Scalar>& g) {
  if (g.n_segments < 2) throw InvalidInput("chain needs at least 2 segments");
  if (!(g.l > 0) || !(g.r_s > 0) || !(g.v_lead_max > 0) || !(g.omega_max > 0))
    throw InvalidInput("l, r_s, v_lead_max and omega_max must be positive");
  if (!(g.joint_limit > 0) || g.joint_limit > kPi<Scalar> / 2 + Scalar(1e-12))
    throw InvalidInput("joint_limit must lie in (0, pi/2]");
  if (g.handedness.size() != g.n_segments)
    throw InvalidInput("handedness needs one entry per segment");
  for (std::size_t i = 0; i < g.n_segments; ++i) {
    if (g.handedness[i] != 1 && g.handedness[i] != -1)
      throw InvalidInput("handedness entries must be +1 or -1");
    if (i + 1 < g.n_segments && g.handedness[i + 1] != -g.handedness[i])
      throw InvalidInput("handedness must alternate along the chain");
  }
}

/// Per-joint angles and rates. The planar model uses the yaw axis only;
/// pitch is carried along for teleoperation passthrough.
template <typename Scalar>
struct JointStateT {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> planar;  // theta_k, pi = straight
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rates;   // d theta_k / dt
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> pitch;   // pitch deflections, unused by the planar model

  static JointStateT straight(std::size_t n_joints) {
    JointStateT s;
    s.planar = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Constant(n_joints, kPi<Scalar>);
    s.rates = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n_joints);
    s.pitch = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n_joints);
    return s;
  }

  static JointStateT from_angles(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& angles) {
    JointStateT s = straight(static_cast<std::size_t>(angles.size()));
    s.planar = angles;
    return s;
  }

  std::size_t size() const { return static_cast<std::size_t>(planar.size()); }
};

using JointState = JointStateT<double>;

template <typename Scalar>
void validate(const ChainGeometryT<Scalar>& g, const JointStateT<Scalar>& j) {
  if (j.size() != g.n_joints() || static_cast<std::size_t>(j.rates.size()) != g.n_joints())
    throw InvalidInput("joint state size does not match the chain");
  for (std::size_t k = 0; k < j.size(); ++k) {
    using std::abs;
    if (!(abs(deflection_of(j.planar[k])) <= g.joint_limit + Scalar(1e-12)))
      throw InvalidInput("joint " + std::to_string(k) + " exceeds the joint limit");
  }
}

enum class Frame { Head, MCenter };

inline const char* to_string(Frame f) { return f == Frame::Head ? "HEAD" : "M_CENTER"; }

/// Instantaneous planar body velocity, tagged with the frame it is expressed in.
template <typename Scalar>
struct BodyTwistT {
  Frame frame = Frame::Head;
  Scalar vx = 0;
  Scalar vy = 0;
  Scalar yaw_rate = 0;
};

using BodyTwist = BodyTwistT<double>;

template <typename Scalar>
void expect_frame(const BodyTwistT<Scalar>& t, Frame expected) {
  if (t.frame != expected)
    throw FrameMismatch(std::string("twist is expressed in ") + to_string(t.frame) +
                        " but " + to_string(expected) + " is required");
}

/// Velocity of a segment center in the segment's own axes.
template <typename Scalar>
struct SegmentVelocityT {
  Scalar axial = 0;
  Scalar radial = 0;
};

using SegmentVelocity = SegmentVelocityT<double>;

/// Signed turning radius; +infinity encodes straight motion.
struct TurnRadius {
  double value = std::numeric_limits<double>::infinity();

  static TurnRadius straight() { return {}; }
  static TurnRadius of(double r) { return {r}; }
  bool is_straight() const { return std::isinf(value); }
};

inline void check_segment_index(std::size_t seg, std::size_t n_segments) {
  if (seg >= n_segments)
    throw InvalidInput("segment index " + std::to_string(seg) + " out of range [0, " +
                       std::to_string(n_segments) + ")");
}

}  // namespace screwsnake
