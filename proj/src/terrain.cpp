#include "screwsnake/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace screwsnake {

namespace {

bool in_unit_interval(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("terrain profile key '" + key + "' is not a number: " + value);
  }
}

}  // namespace

void validate(const TerrainProfile& p) {
  if (p.name.empty()) throw InvalidInput("terrain profile needs a name");
  if (!in_unit_interval(p.kappa_axial)) throw InvalidInput("kappa_axial must lie in [0, 1]");
  if (!in_unit_interval(p.slip)) throw InvalidInput("slip must lie in [0, 1]");
  if (!in_unit_interval(p.lateral_damping))
    throw InvalidInput("lateral_damping must lie in [0, 1]");
  if (p.kappa_axial == 0.0 && p.slip == 1.0)
    throw InvalidInput("terrain '" + p.name + "' affords neither axial nor radial propulsion");
}

TerrainProfile ideal_screw_medium() {
  return {"ideal_screw_medium", 1.0, 1.0, 0.0, "built-in: full axial engagement, no radial traction"};
}

const std::vector<std::string>& bundled_terrain_names() {
  static const std::vector<std::string> names = {"ideal_screw_medium", "concrete", "tile",
                                                 "grass",              "gravel",   "forest_floor"};
  return names;
}

RealizedVelocity realized_velocity(const TerrainProfile& profile, const ChainGeometry& geom,
                                   double omega, std::size_t seg) {
  check_segment_index(seg, geom.n_segments);
  if (!std::isfinite(omega)) throw InvalidInput("screw command must be finite");
  RealizedVelocity out;
  out.omega = omega;
  if (std::abs(omega) > geom.omega_max) {
    out.omega = std::copysign(geom.omega_max, omega);
    out.saturated = true;
  }
  out.velocity.axial =
      geom.handedness[seg] * profile.kappa_axial * out.omega * geom.lead_per_radian();
  out.velocity.radial = (1.0 - profile.slip) * out.omega * geom.r_s;
  return out;
}

TerrainProfile parse_terrain_profile(const std::string& text) {
  TerrainProfile p;
  p.kappa_axial = p.slip = p.lateral_damping = std::nan("");
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidInput("terrain profile line " + std::to_string(line_no) + " lacks '='");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "name") {
      p.name = value;
    } else if (key == "kappa_axial") {
      p.kappa_axial = parse_number(key, value);
    } else if (key == "slip") {
      p.slip = parse_number(key, value);
    } else if (key == "lateral_damping") {
      p.lateral_damping = parse_number(key, value);
    } else if (key == "provenance") {
      p.provenance = value;
    } else {
      throw InvalidInput("unknown terrain profile key '" + key + "'");
    }
  }
  validate(p);
  return p;
}

std::string format_terrain_profile(const TerrainProfile& p) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "name = " << p.name << "\n";
  out << "kappa_axial = " << p.kappa_axial << "\n";
  out << "slip = " << p.slip << "\n";
  out << "lateral_damping = " << p.lateral_damping << "\n";
  out << "provenance = " << p.provenance << "\n";
  return out.str();
}

TerrainProfile load_terrain_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open terrain profile " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_terrain_profile(buf.str());
}

void save_terrain_profile(const TerrainProfile& profile, const std::filesystem::path& path) {
  validate(profile);
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write terrain profile " + path.string());
  out << format_terrain_profile(profile);
}

TerrainProfile resolve_terrain(const std::string& reference,
                               const std::filesystem::path& config_dir) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(reference)) return load_terrain_profile(reference);
  const fs::path bundled = config_dir / "terrain" / (reference + ".profile");
  if (fs::is_regular_file(bundled)) return load_terrain_profile(bundled);
  if (reference == "ideal_screw_medium") return ideal_screw_medium();
  throw InvalidInput("unknown terrain '" + reference + "' (looked in " + bundled.string() + ")");
}

}  // namespace screwsnake
