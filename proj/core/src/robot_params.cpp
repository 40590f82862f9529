#include "slipgait/robot_params.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "slipgait/errors.hpp"

namespace slipgait {
namespace {

using nlohmann::json;

LinkParams link_from_json(const json& j, const std::string& name) {
  for (const char* key : {"mass", "length", "com_offset", "inertia"}) {
    if (!j.contains(key)) {
      throw ConfigError("robot link '" + name + "' missing field '" + key +
                        "'");
    }
  }
  return {j.at("mass").get<double>(), j.at("length").get<double>(),
          j.at("com_offset").get<double>(), j.at("inertia").get<double>()};
}

json link_to_json(const LinkParams& l) {
  return {{"mass", l.mass},
          {"length", l.length},
          {"com_offset", l.com_offset},
          {"inertia", l.inertia}};
}

}  // namespace

void RobotParams::validate() const {
  auto check_link = [](const LinkParams& l, const std::string& name) {
    if (!(l.mass > 0.0)) throw ConfigError(name + ": mass must be positive");
    if (!(l.length > 0.0))
      throw ConfigError(name + ": length must be positive");
    if (l.inertia < 0.0)
      throw ConfigError(name + ": inertia must be non-negative");
    if (l.com_offset < 0.0 || l.com_offset > l.length)
      throw ConfigError(name + ": com_offset must lie within the link");
  };
  check_link(torso, "torso");
  check_link(thigh, "thigh");
  check_link(shank, "shank");
  if (mu < 0.0) throw ConfigError("mu must be non-negative");
  if (!(gravity > 0.0)) throw ConfigError("gravity must be positive");
}

RobotParams RobotParams::default_biped() {
  RobotParams p;
  p.torso = {12.0, 0.50, 0.25, 0.250};
  p.thigh = {3.2, 0.40, 0.16, 0.043};
  p.shank = {1.6, 0.40, 0.16, 0.021};
  p.mu = 0.6;
  p.gravity = 9.81;
  return p;  // total mass 12 + 2*3.2 + 2*1.6 = 21.6 kg
}

RobotParams RobotParams::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open robot config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("robot config parse error in " + path + ": " +
                      e.what());
  }
  if (!j.contains("links")) throw ConfigError("robot config missing 'links'");
  const json& links = j.at("links");
  RobotParams p;
  p.torso = link_from_json(links.at("torso"), "torso");
  p.thigh = link_from_json(links.at("thigh"), "thigh");
  p.shank = link_from_json(links.at("shank"), "shank");
  p.mu = j.value("mu", 0.6);
  p.gravity = j.value("gravity", 9.81);
  p.validate();
  return p;
}

void RobotParams::save(const std::string& path) const {
  json j;
  j["links"] = {{"torso", link_to_json(torso)},
                {"thigh", link_to_json(thigh)},
                {"shank", link_to_json(shank)}};
  j["mu"] = mu;
  j["gravity"] = gravity;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write robot config: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace slipgait
