#include "screwsnake/locomotion.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace screwsnake {

namespace {

Eigen::Vector2d unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

double heading_of(const Eigen::Vector2d& v) { return std::atan2(v.y(), v.x()); }

// Centerline extended straight past its ends.
Eigen::Vector2d extended_point(const CorridorSpec& c, double s) {
  const double total = c.length();
  if (s <= total) return centerline_point(c, s);
  const auto n = c.centerline.size();
  const Eigen::Vector2d dir = (c.centerline[n - 1] - c.centerline[n - 2]).normalized();
  return c.centerline.back() + (s - total) * dir;
}

// First centerline point past arc length s0 at Euclidean distance `dist` from `from`.
Eigen::Vector2d chord_point(const CorridorSpec& c, double s0, const Eigen::Vector2d& from, double dist) {
  constexpr double step = 0.005;
  double lo = s0;
  double hi = s0;
  while ((extended_point(c, hi) - from).norm() < dist && hi < s0 + 4 * dist) {
    lo = hi;
    hi += step;
  }
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((extended_point(c, mid) - from).norm() < dist)
      lo = mid;
    else
      hi = mid;
  }
  return extended_point(c, hi);
}

}  // namespace

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::Tunneling: return "TUNNELING";
    case Mode::MConfig: return "M_CONFIG";
    case Mode::Conforming: return "CONFORMING";
    case Mode::Teleop: return "TELEOP";
  }
  return "?";
}

Mode mode_from_string(const std::string& name) {
  if (name == "TUNNELING") return Mode::Tunneling;
  if (name == "M_CONFIG") return Mode::MConfig;
  if (name == "CONFORMING") return Mode::Conforming;
  if (name == "TELEOP") return Mode::Teleop;
  throw InvalidInput("unknown mode '" + name + "' (expected TUNNELING, M_CONFIG, CONFORMING or TELEOP)");
}

void validate(const SimSettings& s) {
  if (!(s.dt > 0 && s.dt <= 0.1)) throw InvalidInput("dt must lie in (0, 0.1] s");
  if (!(s.joint_rate_limit > 0)) throw InvalidInput("joint_rate_limit must be positive");
  if (!std::isfinite(s.incline_deg) || std::abs(s.incline_deg) >= 90.0)
    throw InvalidInput("incline must lie in (-90, 90) degrees");
  if (!(s.velocity_noise_sd >= 0)) throw InvalidInput("velocity noise must be non-negative");
}

double incline_factor(double incline_deg) { return std::cos(incline_deg * kPi<double> / 180.0); }

StepResult step(const ChainGeometry& geom, const PoseState& state, const SimCommand& cmd,
                const TerrainProfile& terrain, const SimSettings& settings,
                std::mt19937_64* noise) {
  validate(geom);
  validate(geom, state.joints);
  validate(settings);
  if (state.mode == Mode::Conforming)
    throw UnsupportedConfiguration("conforming mode needs a corridor-aware Simulator");
  const std::size_t n = geom.n_segments;
  const auto nj = static_cast<Eigen::Index>(geom.n_joints());
  if (static_cast<std::size_t>(cmd.screw_omegas.size()) != n)
    throw InvalidInput("screw command needs one rate per segment");
  if (cmd.joint_targets.size() != 0 && cmd.joint_targets.size() != nj)
    throw InvalidInput("joint targets need one angle per joint");

  const double dt = settings.dt;
  JointState kin = state.joints;
  for (Eigen::Index k = 0; k < nj; ++k) {
    double target = cmd.joint_targets.size() ? cmd.joint_targets[k] : kin.planar[k];
    const double lo = kPi<double> - geom.joint_limit;
    const double hi = kPi<double> + geom.joint_limit;
    target = std::clamp(target, lo, hi);
    kin.rates[k] = std::clamp((target - kin.planar[k]) / dt, -settings.joint_rate_limit,
                              settings.joint_rate_limit);
  }

  StepResult out;
  out.realized.resize(n);
  out.omegas.resize(static_cast<Eigen::Index>(n));
  const double factor = incline_factor(settings.incline_deg);
  std::normal_distribution<double> gauss(0.0, settings.velocity_noise_sd);
  const Eigen::Matrix2Xd pts = segment_positions(geom, kin);
  Eigen::Matrix2Xd rigid(2, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (!std::isfinite(cmd.screw_omegas[ii])) throw SimulationFault(i, "non-finite screw command");
    RealizedVelocity rv = realized_velocity(terrain, geom, cmd.screw_omegas[ii], i);
    rv.velocity.axial *= factor;
    rv.velocity.radial *= factor;
    if (noise && settings.velocity_noise_sd > 0) {
      rv.velocity.axial += gauss(*noise);
      rv.velocity.radial += gauss(*noise);
    }
    out.realized[i] = rv.velocity;
    out.omegas[ii] = rv.omega;
    if (rv.saturated) ++out.saturated;
    const Eigen::Vector2d local(rv.velocity.axial, rv.velocity.radial);
    const Eigen::Vector2d v = rotation(segment_heading(kin, i)) * local - induced_velocity(geom, kin, i);
    if (!v.allFinite()) throw SimulationFault(i, "non-finite segment velocity");
    rigid.col(ii) = v;
  }
  out.twist = fit_rigid_twist<double>(pts, rigid, Frame::Head);

  out.state = state;
  const Eigen::Vector2d world_v = rotation(state.psi) * Eigen::Vector2d(out.twist.vx, out.twist.vy);
  out.state.x += dt * world_v.x();
  out.state.y += dt * world_v.y();
  out.state.psi = wrap_angle(state.psi + dt * out.twist.yaw_rate);
  out.state.joints.rates = kin.rates;
  out.state.joints.planar = kin.planar + dt * kin.rates;
  return out;
}

PlanarFrame<double> reference_pose(const ChainGeometry& geom, const PoseState& state) {
  PlanarFrame<double> out;
  out.origin = Eigen::Vector2d(state.x, state.y);
  out.heading = state.psi;
  if (state.mode != Mode::MConfig) return out;
  const PlanarFrame<double> local = mconfig_frame_in_head(geom, state.joints);
  out.origin += rotation(state.psi) * local.origin;
  out.heading = wrap_angle(state.psi + local.heading);
  return out;
}

// ---------------------------------------------------------------------------
// Log and fits

void TrajectoryLog::append(LogRow row) {
  if (static_cast<std::size_t>(row.omegas.size()) != n_segments_ || row.realized.size() != n_segments_)
    throw InvalidInput("log row does not match the segment count");
  if (!rows_.empty()) {
    const double expected = rows_.back().t + dt_;
    if (std::abs(row.t - expected) > 1e-9 * std::max(1.0, std::abs(expected)))
      throw InvalidInput("log rows must advance by exactly one dt");
  }
  rows_.push_back(std::move(row));
}

void TrajectoryLog::write_csv(std::ostream& out) const {
  const std::size_t n = n_segments_;
  out << "t,x,y,psi";
  for (std::size_t k = 1; k < n; ++k) out << ",theta_" << k;
  for (std::size_t i = 1; i <= n; ++i) out << ",omega_" << i;
  for (std::size_t i = 1; i <= n; ++i) out << ",va_" << i;
  for (std::size_t i = 1; i <= n; ++i) out << ",vr_" << i;
  out << "\n" << std::setprecision(10);
  for (const LogRow& r : rows_) {
    out << r.t << ',' << r.reference.origin.x() << ',' << r.reference.origin.y() << ','
        << r.reference.heading;
    for (Eigen::Index k = 0; k < r.state.joints.planar.size(); ++k) out << ',' << r.state.joints.planar[k];
    for (Eigen::Index i = 0; i < r.omegas.size(); ++i) out << ',' << r.omegas[i];
    for (const auto& v : r.realized) out << ',' << v.axial;
    for (const auto& v : r.realized) out << ',' << v.radial;
    out << "\n";
  }
}

CircleFit fit_circle(const Eigen::Matrix2Xd& points) {
  if (points.cols() < 3) throw InvalidInput("circle fit needs at least 3 points");
  const Eigen::Vector2d mean = points.rowwise().mean();
  const Eigen::Matrix2Xd c = points.colwise() - mean;
  Eigen::MatrixX3d a(c.cols(), 3);
  Eigen::VectorXd b(c.cols());
  for (Eigen::Index i = 0; i < c.cols(); ++i) {
    a.row(i) << 2 * c(0, i), 2 * c(1, i), 1.0;
    b[i] = c.col(i).squaredNorm();
  }
  const Eigen::Vector3d s = a.colPivHouseholderQr().solve(b);
  CircleFit fit;
  fit.center = mean + s.head<2>();
  fit.radius = std::sqrt(std::max(0.0, s[2] + s.head<2>().squaredNorm()));
  double ss = 0.0;
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    const double e = (points.col(i) - fit.center).norm() - fit.radius;
    ss += e * e;
  }
  fit.rms = std::sqrt(ss / static_cast<double>(points.cols()));
  return fit;
}

double swept_heading(const TrajectoryLog& log) {
  double total = 0.0;
  const auto& rows = log.rows();
  for (std::size_t i = 1; i < rows.size(); ++i)
    total += wrap_angle(rows[i].reference.heading - rows[i - 1].reference.heading);
  return total;
}

TurnRadiusFit fit_turn_radius(const TrajectoryLog& log) {
  const double swept = std::abs(swept_heading(log));
  if (swept < kPi<double> / 2) throw InsufficientArc(swept);
  Eigen::Matrix2Xd pts(2, static_cast<Eigen::Index>(log.size()));
  for (std::size_t i = 0; i < log.size(); ++i)
    pts.col(static_cast<Eigen::Index>(i)) = log.rows()[i].reference.origin;
  const CircleFit c = fit_circle(pts);
  return {c.radius, c.rms, swept, c.center};
}

// ---------------------------------------------------------------------------
// Simulator

Simulator::Simulator(ChainGeometry geom, TerrainProfile terrain, SimSettings settings,
                     PoseState initial, std::optional<CorridorSpec> corridor)
    : geom_(std::move(geom)),
      terrain_(std::move(terrain)),
      settings_(settings),
      state_(std::move(initial)),
      corridor_(std::move(corridor)),
      rng_(settings.seed) {
  validate(geom_);
  validate(terrain_);
  validate(settings_);
  if (state_.joints.size() == 0) state_.joints = JointState::straight(geom_.n_joints());
  validate(geom_, state_.joints);
  if (corridor_) validate(*corridor_);
  if (state_.mode == Mode::Conforming) {
    if (!corridor_) throw InvalidInput("conforming mode needs a corridor");
    place_in_corridor();
  }
}

StepResult Simulator::advance(const SimCommand& cmd) {
  if (state_.mode == Mode::Conforming) return advance_conforming(cmd);
  StepResult r = step(geom_, state_, cmd, terrain_, settings_, &rng_);
  state_ = r.state;
  ++steps_;
  return r;
}

void Simulator::set_mode(Mode mode) {
  if (mode == state_.mode) return;
  if (mode == Mode::Conforming) {
    if (!corridor_) throw InvalidInput("conforming mode needs a corridor");
    links_ = chain_outline();
    trail_.clear();
    for (std::size_t k = links_.size(); k-- > 0;) trail_.push_back(links_[k]);
    j1_index_ = trail_.size() - 2;
    j1_param_ = 0.0;
    head_deflection_ = deflection_of(state_.joints.planar[0]);
  }
  state_.mode = mode;
}

std::vector<Eigen::Vector2d> Simulator::chain_outline() const {
  if (state_.mode == Mode::Conforming) return links_;
  const std::size_t n = geom_.n_segments;
  const Eigen::Matrix2d rot = rotation(state_.psi);
  const Eigen::Vector2d origin(state_.x, state_.y);
  std::vector<Eigen::Vector2d> out;
  out.reserve(n + 1);
  out.push_back(origin + rot * Eigen::Vector2d(geom_.l, 0.0));
  for (std::size_t k = 0; k + 1 < n; ++k)
    out.push_back(origin + rot * joint_position(geom_, state_.joints, k));
  const Eigen::Vector2d tail_center = segment_position(geom_, state_.joints, n - 1);
  const Eigen::Vector2d tail_end =
      tail_center - geom_.l * unit(segment_heading(state_.joints, n - 1));
  out.push_back(origin + rot * tail_end);
  return out;
}

void Simulator::place_in_corridor() {
  const CorridorSpec& c = *corridor_;
  const std::size_t n = geom_.n_segments;
  const double link = 2.0 * geom_.l;
  const double s_tail = 0.02;
  const double s_joint = s_tail + link * static_cast<double>(n - 1);
  if (s_joint + link > c.length()) throw InvalidInput("corridor is shorter than the robot");
  trail_.clear();
  for (double s = s_tail; s < s_joint; s += 0.01) trail_.push_back(centerline_point(c, s));
  trail_.push_back(centerline_point(c, s_joint));
  links_.assign(n + 1, Eigen::Vector2d::Zero());
  links_[1] = trail_.back();
  links_[0] = chord_point(c, s_joint, links_[1], link);
  trail_.push_back(links_[0]);
  j1_index_ = trail_.size() - 2;
  j1_param_ = 0.0;
  rebuild_chain_from_trail();
  head_deflection_ = wrap_angle(heading_of(links_[0] - links_[1]) - heading_of(links_[1] - links_[2]));
  update_state_from_chain(settings_.dt);
  state_.joints.rates.setZero();
  corridor_status_ = {};
  corridor_status_.head_arc_length = project_onto_centerline(c, links_[0]).arc_length;
}

Eigen::Vector2d Simulator::head_joint_on_trail() const {
  if (j1_index_ + 1 >= trail_.size()) return trail_.back();
  return trail_[j1_index_] + j1_param_ * (trail_[j1_index_ + 1] - trail_[j1_index_]);
}

void Simulator::advance_head_joint(double distance) {
  while (distance > 0 && j1_index_ + 1 < trail_.size()) {
    const double len = (trail_[j1_index_ + 1] - trail_[j1_index_]).norm();
    const double left = (1.0 - j1_param_) * len;
    if (len <= 0 || distance >= left) {
      distance -= std::max(0.0, left);
      ++j1_index_;
      j1_param_ = 0.0;
    } else {
      j1_param_ += distance / len;
      distance = 0;
    }
  }
  while (distance < 0) {
    const double len = j1_index_ + 1 < trail_.size() ? (trail_[j1_index_ + 1] - trail_[j1_index_]).norm() : 0.0;
    const double back = j1_param_ * len;
    if (-distance < back) {
      j1_param_ += distance / len;
      distance = 0;
    } else {
      distance += back;
      j1_param_ = 0.0;
      if (j1_index_ == 0) break;
      --j1_index_;
      j1_param_ = 1.0;
    }
  }
  if (j1_index_ + 1 >= trail_.size()) {
    j1_index_ = trail_.size() - 2;
    j1_param_ = 1.0;
  }
}

void Simulator::rebuild_chain_from_trail() {
  const double link = 2.0 * geom_.l;
  std::vector<Eigen::Vector2d> path(trail_.begin(), trail_.begin() + static_cast<long>(j1_index_) + 1);
  if ((path.back() - links_[1]).norm() > 1e-12) path.push_back(links_[1]);
  // Walk back from the head joint; `inner` is the last point known to be
  // closer than one link to the anchor.
  std::size_t idx = path.size() - 1;
  std::size_t oldest_used = idx;
  for (std::size_t k = 2; k < links_.size(); ++k) {
    const Eigen::Vector2d anchor = links_[k - 1];
    Eigen::Vector2d inner = anchor;
    bool found = false;
    std::size_t m = idx;
    while (m > 0) {
      --m;
      const Eigen::Vector2d outer = path[m];
      if ((outer - anchor).norm() >= link) {
        const Eigen::Vector2d d = outer - inner;
        const Eigen::Vector2d f = inner - anchor;
        const double a = d.squaredNorm();
        const double b = 2 * f.dot(d);
        const double cc = f.squaredNorm() - link * link;
        const double u = (-b + std::sqrt(std::max(0.0, b * b - 4 * a * cc))) / (2 * a);
        links_[k] = inner + std::clamp(u, 0.0, 1.0) * d;
        idx = m + 1;
        found = true;
        break;
      }
      inner = outer;
    }
    if (!found) {
      const Eigen::Vector2d dir =
          path.size() >= 2 ? (path[0] - path[1]).normalized() : Eigen::Vector2d(-1.0, 0.0);
      const Eigen::Vector2d f = inner - anchor;
      const double b = 2 * f.dot(dir);
      const double cc = f.squaredNorm() - link * link;
      const double u = (-b + std::sqrt(std::max(0.0, b * b - 4 * cc))) / 2;
      links_[k] = inner + u * dir;
      idx = 0;
    }
    oldest_used = std::min(oldest_used, idx == 0 ? 0 : idx - 1);
  }
  std::size_t keep_from = oldest_used > 2 ? oldest_used - 2 : 0;
  keep_from = std::min(keep_from, j1_index_);
  for (std::size_t i = 0; i < keep_from; ++i) trail_.pop_front();
  j1_index_ -= keep_from;
}

void Simulator::update_state_from_chain(double dt) {
  const std::size_t n = geom_.n_segments;
  std::vector<double> alpha(n);
  for (std::size_t s = 0; s < n; ++s) alpha[s] = heading_of(links_[s] - links_[s + 1]);
  const Eigen::Vector2d head_center = 0.5 * (links_[0] + links_[1]);
  state_.x = head_center.x();
  state_.y = head_center.y();
  state_.psi = wrap_angle(alpha[0]);
  const auto nj = static_cast<Eigen::Index>(geom_.n_joints());
  Eigen::VectorXd planar(nj);
  for (Eigen::Index k = 0; k < nj; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    planar[k] = angle_from_deflection(wrap_angle(alpha[kk] - alpha[kk + 1]));
  }
  if (state_.joints.size() == static_cast<std::size_t>(nj))
    state_.joints.rates = (planar - state_.joints.planar) / dt;
  else
    state_.joints = JointState::straight(geom_.n_joints());
  state_.joints.planar = planar;
}

void Simulator::check_walls() {
  const CorridorSpec& c = *corridor_;
  const double allowed = c.half_clearance();
  const double total = c.length();
  bool violated = false;
  for (std::size_t s = 0; s + 1 < links_.size(); ++s) {
    for (int i = 0; i <= 4; ++i) {
      const Eigen::Vector2d p = links_[s] + (links_[s + 1] - links_[s]) * (i / 4.0);
      const CenterlineProjection pr = project_onto_centerline(c, p);
      if (pr.arc_length <= 1e-9 || pr.arc_length >= total - 1e-9) continue;
      const double excess = pr.distance - allowed;
      corridor_status_.max_wall_excess = std::max(corridor_status_.max_wall_excess, excess);
      if (excess > 1e-9) violated = true;
    }
  }
  if (violated) ++corridor_status_.wall_violations;
}

StepResult Simulator::advance_conforming(const SimCommand& cmd) {
  const CorridorSpec& c = *corridor_;
  const std::size_t n = geom_.n_segments;
  if (static_cast<std::size_t>(cmd.screw_omegas.size()) != n)
    throw InvalidInput("screw command needs one rate per segment");
  const double dt = settings_.dt;
  const double link = 2.0 * geom_.l;

  StepResult out;
  out.realized.resize(n);
  out.omegas.resize(static_cast<Eigen::Index>(n));
  const double factor = incline_factor(incline_at(c, project_onto_centerline(c, links_[1]).arc_length)) *
                        incline_factor(settings_.incline_deg);
  std::normal_distribution<double> gauss(0.0, settings_.velocity_noise_sd);
  double mean_axial = 0.0;
  double mean_radial = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (!std::isfinite(cmd.screw_omegas[ii])) throw SimulationFault(i, "non-finite screw command");
    RealizedVelocity rv = realized_velocity(terrain_, geom_, cmd.screw_omegas[ii], i);
    rv.velocity.axial *= factor;
    rv.velocity.radial *= factor;
    if (settings_.velocity_noise_sd > 0) {
      rv.velocity.axial += gauss(rng_);
      rv.velocity.radial += gauss(rng_);
    }
    if (!std::isfinite(rv.velocity.axial) || !std::isfinite(rv.velocity.radial))
      throw SimulationFault(i, "non-finite segment velocity");
    out.realized[i] = rv.velocity;
    out.omegas[ii] = rv.omega;
    if (rv.saturated) ++out.saturated;
    mean_axial += rv.velocity.axial / static_cast<double>(n);
    mean_radial += rv.velocity.radial / static_cast<double>(n);
  }

  const Eigen::Vector2d center_before = 0.5 * (links_[0] + links_[1]);
  const double psi_before = state_.psi;

  // The body slides along the path the head tip carved.
  advance_head_joint(mean_axial * dt);
  links_[1] = head_joint_on_trail();
  rebuild_chain_from_trail();

  // Only the head joint is actuated: aim the tip at the centerline point one
  // link ahead of the head joint.
  const double psi1 = heading_of(links_[1] - links_[2]);
  const double s1 = project_onto_centerline(c, links_[1]).arc_length;
  const Eigen::Vector2d target = chord_point(c, s1, links_[1], link);
  const double limit = geom_.joint_limit;
  const double wanted = std::clamp(wrap_angle(heading_of(target - links_[1]) - psi1), -limit, limit);
  const double max_change = settings_.joint_rate_limit * dt;
  head_deflection_ += std::clamp(wanted - head_deflection_, -max_change, max_change);
  const double psi_head = psi1 + head_deflection_;
  Eigen::Vector2d tip = links_[1] + link * unit(psi_head);
  const double lateral = terrain_.lateral_damping * mean_radial;
  if (lateral != 0.0) {
    tip += dt * lateral * unit(psi_head + kPi<double> / 2);
    tip = links_[1] + link * (tip - links_[1]).normalized();
  }
  links_[0] = tip;
  trail_.push_back(tip);

  update_state_from_chain(dt);
  const Eigen::Vector2d center_after = 0.5 * (links_[0] + links_[1]);
  const Eigen::Vector2d v_head = rotation(-state_.psi) * ((center_after - center_before) / dt);
  out.twist = {Frame::Head, v_head.x(), v_head.y(), wrap_angle(state_.psi - psi_before) / dt};
  check_walls();
  const CenterlineProjection tip_proj = project_onto_centerline(c, links_[0]);
  corridor_status_.head_arc_length = tip_proj.arc_length;
  if (tip_proj.arc_length >= c.length() - 1e-6) corridor_status_.reached_exit = true;
  ++steps_;
  out.state = state_;
  return out;
}

}  // namespace screwsnake
