#pragma once

#include "screwsnake/types.hpp"

#include <random>

namespace test {

using namespace screwsnake;

inline constexpr int kCases = 1000;
inline constexpr double kDeg = kPi<double> / 180.0;

inline std::mt19937_64& rng() {
  static std::mt19937_64 gen(20220623);
  return gen;
}

inline double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }

inline JointState random_joints(const ChainGeometry& g, double max_rate = 1.0) {
  JointState j = JointState::straight(g.n_joints());
  for (std::size_t k = 0; k < g.n_joints(); ++k) {
    j.planar[static_cast<Eigen::Index>(k)] = angle_from_deflection(uniform(-g.joint_limit, g.joint_limit));
    j.rates[static_cast<Eigen::Index>(k)] = uniform(-max_rate, max_rate);
  }
  return j;
}

// Segment centers by walking rigid transforms joint to joint, head first.
inline std::vector<Eigen::Vector2d> chain_by_transforms(const ChainGeometry& g, const Eigen::VectorXd& planar) {
  std::vector<Eigen::Vector2d> out;
  Eigen::Vector2d center(0, 0);
  double heading = 0.0;
  out.push_back(center);
  for (Eigen::Index k = 0; k < planar.size(); ++k) {
    const Eigen::Vector2d joint = center - g.l * Eigen::Vector2d(std::cos(heading), std::sin(heading));
    heading -= kPi<double> - planar[k];
    center = joint - g.l * Eigen::Vector2d(std::cos(heading), std::sin(heading));
    out.push_back(center);
  }
  return out;
}

}  // namespace test
