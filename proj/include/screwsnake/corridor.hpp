#pragma once

#include "screwsnake/types.hpp"

#include <vector>

namespace screwsnake {

inline constexpr double kDefaultCrossSection = 0.15;  // screw blade tip diameter [m]

/// Planar corridor: a centerline polyline with a constant width. Each polyline
/// piece carries its own incline, which only scales propulsion speed.
struct CorridorSpec {
  std::vector<Eigen::Vector2d> centerline;
  std::vector<double> incline_deg;  // one entry per polyline piece; empty = flat
  double width = 0.22;
  double robot_diameter = kDefaultCrossSection;

  double length() const;
  double half_clearance() const { return 0.5 * (width - robot_diameter); }
};

void validate(const CorridorSpec& corridor);

struct CenterlineProjection {
  Eigen::Vector2d point;
  double arc_length = 0.0;  // along the centerline
  double distance = 0.0;    // from the query point
  std::size_t piece = 0;
};

CenterlineProjection project_onto_centerline(const CorridorSpec& corridor,
                                             const Eigen::Vector2d& p);

/// Point at the given arc length, clamped to the ends.
Eigen::Vector2d centerline_point(const CorridorSpec& corridor, double arc_length);

double incline_at(const CorridorSpec& corridor, double arc_length);

/// Builder for piecewise corridors made of straights and constant-radius arcs.
class CorridorBuilder {
 public:
  CorridorBuilder(Eigen::Vector2d start, double heading, double width);
  CorridorBuilder& straight(double length, double incline_deg = 0.0);
  /// Positive angles turn left. Arcs are sampled every `step` meters.
  CorridorBuilder& arc(double radius, double angle, double incline_deg = 0.0, double step = 0.01);
  CorridorSpec build() const { return spec_; }

 private:
  CorridorSpec spec_;
  double heading_;
};

/// Straight entry, a zigzag of four bends and a 15 degree inclined exit, in a
/// 0.22 m corridor.
CorridorSpec zigzag_incline_corridor();

}  // namespace screwsnake
