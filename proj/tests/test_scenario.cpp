#include "screwsnake/scenario.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace screwsnake;
using namespace test;
using nlohmann::json;

namespace {

const std::filesystem::path kData = SCREWSNAKE_TEST_DATA_DIR;

std::string error_path(const json& doc) {
  try {
    parse_scenario(doc, kData);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("config errors name the offending field") {
  const json base = {{"mode", "TUNNELING"}, {"commands", json::array({{{"t", 0}, {"speed", 1.0}}})}};
  CHECK(error_path(base) == "<none>");
  CHECK(error_path(json::object()) == "mode");
  json bad = base;
  bad["dt"] = 0.5;
  CHECK(error_path(bad).find("dt") != std::string::npos);
  bad = base;
  bad["commands"].push_back({{"t", 2.0}, {"radius_m", 0.05}});
  CHECK(error_path(bad).rfind("commands[1]", 0) == 0);
  bad = base;
  bad["commands"][0]["speed"] = 3;
  CHECK(error_path(bad) == "commands[0].speed");
  bad = base;
  bad["colour"] = "red";
  CHECK(error_path(bad) == "colour");
  bad = base;
  bad["mode"] = "CONFORMING";
  CHECK(error_path(bad) == "corridor");
  bad = base;
  bad["terrain"] = "moon_dust";
  CHECK(error_path(bad) == "terrain");
  bad = base;
  bad["geometry"] = {{"l", -1}};
  CHECK(error_path(bad).rfind("geometry", 0) == 0);
  CHECK_THROWS_AS(load_scenario(kData / "scenarios" / "missing.json", kData), InvalidInput);
}

TEST_CASE("zero duration gives an empty log and a valid summary") {
  Scenario s = parse_scenario({{"mode", "M_CONFIG"}, {"duration", 0}, {"terrain", "concrete"}}, kData);
  const ScenarioResult r = run_scenario(s);
  CHECK(r.log.empty());
  CHECK(r.summary["duration"] == 0.0);
  CHECK(r.summary["mean_speed"] == 0.0);
  CHECK(r.summary["fitted_radius"].is_null());
}

TEST_CASE("command schedule switches at its times") {
  Scenario s = parse_scenario({{"mode", "TUNNELING"},
                               {"duration", 4},
                               {"commands", json::array({{{"t", 0}, {"speed", 1.0}}, {{"t", 2}, {"speed", 0.0}}})}},
                              kData);
  CHECK(command_at(s, 1.99).speed == 1.0);
  CHECK(command_at(s, 2.0).speed == 0.0);
  const ScenarioResult r = run_scenario(s);
  CHECK(r.summary["final_pose"]["x"].get<double>() == doctest::Approx(0.46).epsilon(1e-6));
}

TEST_CASE("shipped M-configuration scenario reproduces the measured concrete speed") {
  const Scenario s = load_scenario(kData / "scenarios" / "mconfig_concrete_140.json", kData);
  const ScenarioResult r = run_scenario(s);
  CHECK(r.summary["mean_speed"].get<double>() == doctest::Approx(0.24).epsilon(0.02 / 0.24));
  CHECK(r.log.size() == 1001);
}

TEST_CASE("shipped corridor scenario exits cleanly") {
  const Scenario s = load_scenario(kData / "scenarios" / "corridor_zigzag.json", kData);
  const ScenarioResult r = run_scenario(s);
  CHECK(r.summary["corridor"]["reached_exit"] == true);
  CHECK(r.summary["corridor"]["wall_violations"] == 0);
}

TEST_CASE("scenario runs are deterministic per seed") {
  const json doc = {{"mode", "TUNNELING"}, {"duration", 2}, {"noise_sd", 0.01}, {"seed", 3},
                    {"commands", json::array({{{"t", 0}, {"speed", 1.0}, {"radius_m", 0.5}}})}};
  auto csv = [&](const json& d) {
    std::ostringstream os;
    run_scenario(parse_scenario(d, kData)).log.write_csv(os);
    return os.str();
  };
  CHECK(csv(doc) == csv(doc));
  json other = doc;
  other["seed"] = 4;
  CHECK(csv(doc) != csv(other));
}
