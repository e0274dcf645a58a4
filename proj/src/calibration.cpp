#include "screwsnake/calibration.hpp"

#include "screwsnake/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace screwsnake {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return out;
}

double to_number(const std::string& s, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw InvalidInput("observations line " + std::to_string(line_no) + ": '" + s + "' is not a number");
}

double sse(const Eigen::VectorXd& r, const Eigen::VectorXd& q, const Eigen::VectorXd& y,
           const Eigen::Vector2d& x) {
  return (x[0] * r + x[1] * q - y).squaredNorm();
}

}  // namespace

std::vector<SpeedObservation> parse_observations(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::vector<SpeedObservation> out;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (!header) {
      if (cells.size() < 3 || cells[0] != "surface" || cells[1] != "theta_m_deg" || cells[2] != "speed_mps")
        throw InvalidInput("observations header must be surface,theta_m_deg,speed_mps[,use]");
      header = true;
      continue;
    }
    if (cells.size() < 3 || cells.size() > 4)
      throw InvalidInput("observations line " + std::to_string(line_no) + " needs 3 or 4 fields");
    SpeedObservation o;
    o.surface = cells[0];
    o.theta_m_deg = to_number(cells[1], line_no);
    o.speed = to_number(cells[2], line_no);
    if (cells.size() == 4) o.use = to_number(cells[3], line_no) != 0.0;
    if (o.surface.empty()) throw InvalidInput("observations line " + std::to_string(line_no) + " lacks a surface");
    out.push_back(o);
  }
  if (!header) throw InvalidInput("observations file is empty");
  return out;
}

std::vector<SpeedObservation> load_observations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open observations file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_observations(buf.str());
}

std::vector<std::string> surfaces_of(const std::vector<SpeedObservation>& obs) {
  std::vector<std::string> out;
  for (const auto& o : obs)
    if (std::find(out.begin(), out.end(), o.surface) == out.end()) out.push_back(o.surface);
  return out;
}

Eigen::Vector2d bounded_lsq2(const Eigen::VectorXd& r, const Eigen::VectorXd& q,
                             const Eigen::VectorXd& y) {
  Eigen::MatrixX2d a(r.size(), 2);
  a << r, q;
  const Eigen::ColPivHouseholderQR<Eigen::MatrixX2d> qr(a);
  if (qr.rank() == 2) {
    const Eigen::Vector2d x = qr.solve(y);
    if ((x.array() >= 0.0).all() && (x.array() <= 1.0).all()) return x;
  }
  // The optimum lies on the boundary: best clamped 1-D solution on each edge.
  auto best_on = [](const Eigen::VectorXd& col, const Eigen::VectorXd& rhs) {
    const double den = col.squaredNorm();
    return den > 0 ? std::clamp(col.dot(rhs) / den, 0.0, 1.0) : 0.0;
  };
  Eigen::Vector2d best(0.0, 0.0);
  double best_sse = sse(r, q, y, best);
  for (double fixed : {0.0, 1.0}) {
    const Eigen::Vector2d c1(fixed, best_on(q, y - fixed * r));
    const Eigen::Vector2d c2(best_on(r, y - fixed * q), fixed);
    for (const auto& c : {c1, c2}) {
      const double e = sse(r, q, y, c);
      if (e < best_sse) {
        best_sse = e;
        best = c;
      }
    }
  }
  return best;
}

CalibrationResult calibrate(const std::string& surface, const std::vector<SpeedObservation>& obs,
                            const ChainGeometry& geom, const CalibrationOptions& options) {
  std::vector<SpeedObservation> mine;
  for (const auto& o : obs)
    if (o.surface == surface) mine.push_back(o);
  std::set<double> angles;
  for (const auto& o : mine)
    if (o.use) angles.insert(o.theta_m_deg);
  const std::size_t needed = options.fit_kappa ? 2 : 1;
  if (angles.size() < needed) {
    std::ostringstream msg;
    msg << "surface '" << surface << "' has " << angles.size()
        << " usable theta_m observation(s) but " << needed << " distinct angles are needed";
    if (options.fit_kappa) msg << " to fit both slip and kappa_axial";
    msg << "; add speeds at further angles (e.g. 100, 120, 140, 160 deg)";
    throw UnderdeterminedFit(msg.str());
  }

  const TerrainProfile rolling{"basis_rolling", 0.0, 0.0, 0.0, ""};
  const TerrainProfile axial{"basis_axial", 1.0, 1.0, 0.0, ""};
  constexpr double deg = kPi<double> / 180.0;
  const auto n = static_cast<Eigen::Index>(mine.size());
  Eigen::VectorXd r(n), q(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double th = mine[static_cast<std::size_t>(i)].theta_m_deg * deg;
    r[i] = mconfig_mean_speed(geom, rolling, th, options.settings, options.duration, options.base_speed);
    q[i] = mconfig_mean_speed(geom, axial, th, options.settings, options.duration, options.base_speed);
    y[i] = mine[static_cast<std::size_t>(i)].speed;
  }

  std::vector<Eigen::Index> used;
  for (Eigen::Index i = 0; i < n; ++i)
    if (mine[static_cast<std::size_t>(i)].use) used.push_back(i);
  const auto m = static_cast<Eigen::Index>(used.size());
  Eigen::VectorXd ru(m), qu(m), yu(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    ru[k] = r[used[static_cast<std::size_t>(k)]];
    qu[k] = q[used[static_cast<std::size_t>(k)]];
    yu[k] = y[used[static_cast<std::size_t>(k)]];
  }
  Eigen::Vector2d x;
  if (options.fit_kappa) {
    x = bounded_lsq2(ru, qu, yu);
  } else {
    const Eigen::VectorXd rhs = yu - options.fixed_kappa * qu;
    x = {std::clamp(ru.dot(rhs) / ru.squaredNorm(), 0.0, 1.0), options.fixed_kappa};
  }

  CalibrationResult out;
  out.profile.name = surface;
  out.profile.slip = 1.0 - x[0];
  out.profile.kappa_axial = x[1];
  out.profile.lateral_damping = x[0];
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = mine[static_cast<std::size_t>(i)];
    CalibrationResidual res;
    res.theta_m_deg = o.theta_m_deg;
    res.observed = o.speed;
    res.simulated = x[0] * r[i] + x[1] * q[i];
    res.residual = res.simulated - res.observed;
    res.used = o.use;
    if (o.use) out.max_abs_residual = std::max(out.max_abs_residual, std::abs(res.residual));
    out.residuals.push_back(res);
  }
  std::ostringstream prov;
  prov << std::setprecision(3) << "fitted to " << m << " M-configuration speed observations, max |residual| "
       << out.max_abs_residual << " m/s";
  out.profile.provenance = prov.str();
  validate(out.profile);
  return out;
}

}  // namespace screwsnake
