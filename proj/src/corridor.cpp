#include "screwsnake/corridor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace screwsnake {

double CorridorSpec::length() const {
  double s = 0.0;
  for (std::size_t i = 1; i < centerline.size(); ++i) s += (centerline[i] - centerline[i - 1]).norm();
  return s;
}

void validate(const CorridorSpec& c) {
  if (c.centerline.size() < 2) throw InvalidInput("corridor centerline needs at least 2 points");
  if (!(c.robot_diameter > 0)) throw InvalidInput("robot diameter must be positive");
  if (!(c.width >= c.robot_diameter))
    throw InvalidInput("corridor width must be at least the robot cross-section diameter");
  if (!c.incline_deg.empty() && c.incline_deg.size() != c.centerline.size() - 1)
    throw InvalidInput("corridor needs one incline entry per centerline piece");
  for (double a : c.incline_deg)
    if (!std::isfinite(a) || std::abs(a) >= 90.0) throw InvalidInput("incline must lie in (-90, 90) degrees");
}

CenterlineProjection project_onto_centerline(const CorridorSpec& c, const Eigen::Vector2d& p) {
  CenterlineProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  double s0 = 0.0;
  for (std::size_t i = 1; i < c.centerline.size(); ++i) {
    const Eigen::Vector2d a = c.centerline[i - 1];
    const Eigen::Vector2d ab = c.centerline[i] - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const Eigen::Vector2d q = a + t * ab;
    const double d = (p - q).norm();
    if (d < best.distance) {
      best.distance = d;
      best.point = q;
      best.arc_length = s0 + t * std::sqrt(len2);
      best.piece = i - 1;
    }
    s0 += std::sqrt(len2);
  }
  return best;
}

Eigen::Vector2d centerline_point(const CorridorSpec& c, double arc_length) {
  if (arc_length <= 0.0) return c.centerline.front();
  double s0 = 0.0;
  for (std::size_t i = 1; i < c.centerline.size(); ++i) {
    const Eigen::Vector2d ab = c.centerline[i] - c.centerline[i - 1];
    const double len = ab.norm();
    if (s0 + len >= arc_length && len > 0) return c.centerline[i - 1] + ab * ((arc_length - s0) / len);
    s0 += len;
  }
  return c.centerline.back();
}

double incline_at(const CorridorSpec& c, double arc_length) {
  if (c.incline_deg.empty()) return 0.0;
  double s0 = 0.0;
  for (std::size_t i = 1; i < c.centerline.size(); ++i) {
    s0 += (c.centerline[i] - c.centerline[i - 1]).norm();
    if (arc_length <= s0) return c.incline_deg[i - 1];
  }
  return c.incline_deg.back();
}

CorridorBuilder::CorridorBuilder(Eigen::Vector2d start, double heading, double width)
    : heading_(heading) {
  spec_.centerline.push_back(start);
  spec_.width = width;
}

CorridorBuilder& CorridorBuilder::straight(double length, double incline_deg) {
  const Eigen::Vector2d dir(std::cos(heading_), std::sin(heading_));
  spec_.centerline.push_back(spec_.centerline.back() + length * dir);
  spec_.incline_deg.push_back(incline_deg);
  return *this;
}

CorridorBuilder& CorridorBuilder::arc(double radius, double angle, double incline_deg, double step) {
  const int pieces = std::max(1, static_cast<int>(std::ceil(radius * std::abs(angle) / step)));
  const double dtheta = angle / pieces;
  const double chord = 2.0 * radius * std::sin(std::abs(dtheta) / 2.0);
  for (int k = 0; k < pieces; ++k) {
    const double mid = heading_ + dtheta / 2.0;
    spec_.centerline.push_back(spec_.centerline.back() +
                               chord * Eigen::Vector2d(std::cos(mid), std::sin(mid)));
    spec_.incline_deg.push_back(incline_deg);
    heading_ += dtheta;
  }
  return *this;
}

CorridorSpec zigzag_incline_corridor() {
  constexpr double deg = kPi<double> / 180.0;
  return CorridorBuilder({0.0, 0.0}, 0.0, 0.22)
      .straight(2.0)
      .arc(0.6, 35 * deg)
      .straight(0.3)
      .arc(0.6, -70 * deg)
      .straight(0.3)
      .arc(0.6, 70 * deg)
      .straight(0.3)
      .arc(0.6, -35 * deg)
      .straight(0.4)
      .straight(1.5, 15.0)
      .build();
}

}  // namespace screwsnake
