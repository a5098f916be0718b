#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "cmdp/errors.hpp"
#include "cmdp/scenario.hpp"
#include "json.hpp"

namespace cmdp {

// Scenario files store rates per minute (matching how they are quoted on
// site); in memory everything runs per second.

namespace detail {

using nlohmann::json;

inline const json& require(const json& j, const char* key, const char* where) {
  auto it = j.find(key);
  if (it == j.end())
    throw ParseError(std::string(where) + ": missing key '" + key + "'");
  return *it;
}

inline json vec_to_json(const Vec2& v) { return json::array({v.x, v.y}); }

inline Vec2 vec_from_json(const json& j, const char* where) {
  if (!j.is_array() || j.size() != 2)
    throw ParseError(std::string(where) + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json rect_to_json(const Rect& r) {
  return json::array({r.min.x, r.min.y, r.max.x, r.max.y});
}

inline Rect rect_from_json(const json& j, const char* where) {
  if (!j.is_array() || j.size() != 4)
    throw ParseError(std::string(where) + ": expected [minx, miny, maxx, maxy]");
  return {{j[0].get<double>(), j[1].get<double>()}, {j[2].get<double>(), j[3].get<double>()}};
}

// Smallest-adjustment per-minute value whose division by 60 reproduces the
// stored per-second rate exactly, so save/load round-trips bit for bit.
inline double exact_per_minute(double per_second) {
  double y = per_second * 60.0;
  if (y / 60.0 == per_second) return y;
  double up = y;
  double down = y;
  for (int i = 0; i < 4; ++i) {
    up = std::nextafter(up, std::numeric_limits<double>::infinity());
    if (up / 60.0 == per_second) return up;
    down = std::nextafter(down, -std::numeric_limits<double>::infinity());
    if (down / 60.0 == per_second) return down;
  }
  return y;
}

}  // namespace detail

inline nlohmann::json serialize_scenario(const Scenario& s) {
  using detail::exact_per_minute;
  using detail::rect_to_json;
  using detail::vec_to_json;
  nlohmann::json j;
  j["format"] = 1;
  j["name"] = s.name;
  j["plane"] = {{"width", s.plane_width}, {"height", s.plane_height}};
  j["outlet"] = vec_to_json(s.outlet);
  j["crane"] = {{"id", s.crane.id},
                {"position", vec_to_json(s.crane.position)},
                {"lift_duration_s", s.crane.lift_duration}};

  j["components"] = nlohmann::json::array();
  for (const auto& c : s.components)
    j["components"].push_back({{"id", c.id},
                               {"footprint", rect_to_json(c.footprint)},
                               {"kind", to_string(c.kind)}});

  j["tasks"] = nlohmann::json::array();
  for (const auto& t : s.tasks) {
    nlohmann::json preds = nlohmann::json::array();
    for (int p : t.predecessors) preds.push_back(s.tasks[p].id);
    j["tasks"].push_back({{"id", t.id},
                          {"type", to_string(t.type)},
                          {"component", s.components[t.component].id},
                          {"predecessors", preds},
                          {"work_quantity", t.work_quantity},
                          {"area_distance", t.area_distance},
                          {"congestion_index", t.congestion_index},
                          {"requires_crane", t.requires_crane},
                          {"material", to_string(t.material)},
                          {"material_per_unit", t.material_per_unit}});
  }

  j["storages"] = nlohmann::json::array();
  for (const auto& st : s.storages)
    j["storages"].push_back({{"id", st.id},
                             {"material", to_string(st.material)},
                             {"footprint", rect_to_json(st.footprint)},
                             {"acquire_per_min", exact_per_minute(st.acquire_rate)},
                             {"capacity", st.capacity},
                             {"initial_stock", st.initial_stock}});

  j["crews"] = nlohmann::json::array();
  for (const auto& a : s.crews)
    j["crews"].push_back({{"id", a.id},
                          {"type", to_string(a.crew)},
                          {"efficiency_per_min", exact_per_minute(a.efficiency_mean)},
                          {"efficiency_std_per_min", exact_per_minute(a.efficiency_std)},
                          {"occupation_area", a.occupation_area},
                          {"v_forward", a.v_forward},
                          {"v_lateral", a.v_lateral},
                          {"v_turn_deg", a.v_turn},
                          {"v_min", a.v_min},
                          {"carry_factor", a.carry_factor},
                          {"inefficiency_index", a.inefficiency_index},
                          {"max_load", a.max_load},
                          {"equipped", a.equipped},
                          {"spawn", vec_to_json(a.spawn)}});
  return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  using detail::rect_from_json;
  using detail::require;
  using detail::vec_from_json;

  Scenario s;
  s.name = j.value("name", "");
  const auto& plane = require(j, "plane", "scenario");
  s.plane_width = require(plane, "width", "plane").get<double>();
  s.plane_height = require(plane, "height", "plane").get<double>();
  s.outlet = vec_from_json(require(j, "outlet", "scenario"), "outlet");

  const auto& crane = require(j, "crane", "scenario");
  s.crane.id = require(crane, "id", "crane").get<std::string>();
  s.crane.position = vec_from_json(require(crane, "position", "crane"), "crane.position");
  s.crane.lift_duration = require(crane, "lift_duration_s", "crane").get<double>();

  for (const auto& cj : require(j, "components", "scenario")) {
    ComponentSpec c;
    c.id = require(cj, "id", "component").get<std::string>();
    c.footprint = rect_from_json(require(cj, "footprint", "component"), "component.footprint");
    c.kind = enum_from_string<ComponentKind>(require(cj, "kind", "component").get<std::string>());
    s.components.push_back(std::move(c));
  }

  for (const auto& stj : j.value("storages", nlohmann::json::array())) {
    StorageSpec st;
    st.id = require(stj, "id", "storage").get<std::string>();
    st.material =
        enum_from_string<MaterialKind>(require(stj, "material", "storage").get<std::string>());
    st.footprint = rect_from_json(require(stj, "footprint", "storage"), "storage.footprint");
    st.acquire_rate = require(stj, "acquire_per_min", "storage").get<double>() / 60.0;
    st.capacity = require(stj, "capacity", "storage").get<double>();
    st.initial_stock = stj.value("initial_stock", 0.0);
    s.storages.push_back(std::move(st));
  }

  for (const auto& aj : require(j, "crews", "scenario")) {
    AgentSpec a;
    a.id = require(aj, "id", "crew").get<std::string>();
    a.crew = enum_from_string<CrewType>(require(aj, "type", "crew").get<std::string>());
    a.efficiency_mean = require(aj, "efficiency_per_min", "crew").get<double>() / 60.0;
    a.efficiency_std = aj.value("efficiency_std_per_min", 0.0) / 60.0;
    a.occupation_area = require(aj, "occupation_area", "crew").get<double>();
    a.v_forward = require(aj, "v_forward", "crew").get<double>();
    a.v_lateral = aj.value("v_lateral", 0.1);
    a.v_turn = aj.value("v_turn_deg", 30.0);
    a.v_min = aj.value("v_min", 0.1);
    a.carry_factor = aj.value("carry_factor", 1.0);
    a.inefficiency_index = aj.value("inefficiency_index", 0.0);
    a.max_load = aj.value("max_load", 0.0);
    a.equipped = aj.value("equipped", true);
    a.spawn = vec_from_json(require(aj, "spawn", "crew"), "crew.spawn");
    s.crews.push_back(std::move(a));
  }

  // Tasks reference components and other tasks by id; ids must be declared
  // before use is not required, so resolve in two passes.
  std::vector<nlohmann::json> raw_tasks;
  for (const auto& tj : require(j, "tasks", "scenario")) raw_tasks.push_back(tj);
  for (const auto& tj : raw_tasks) {
    TaskSpec t;
    t.id = require(tj, "id", "task").get<std::string>();
    t.type = enum_from_string<TaskType>(require(tj, "type", "task").get<std::string>());
    std::string comp = require(tj, "component", "task").get<std::string>();
    t.component = s.component_index(comp);
    if (t.component < 0) throw ParseError("task '" + t.id + "' references unknown component '" + comp + "'");
    t.work_quantity = require(tj, "work_quantity", "task").get<double>();
    t.area_distance = require(tj, "area_distance", "task").get<double>();
    t.congestion_index = require(tj, "congestion_index", "task").get<double>();
    t.requires_crane = tj.value("requires_crane", false);
    t.material = enum_from_string<MaterialKind>(tj.value("material", "none"));
    t.material_per_unit = tj.value("material_per_unit", 1.0);
    s.tasks.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < raw_tasks.size(); ++i) {
    for (const auto& pj : raw_tasks[i].value("predecessors", nlohmann::json::array())) {
      std::string pid = pj.get<std::string>();
      int p = s.task_index(pid);
      if (p < 0)
        throw ParseError("task '" + s.tasks[i].id + "' references unknown predecessor '" + pid + "'");
      s.tasks[i].predecessors.push_back(p);
    }
  }

  check_and_finalize(s);
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid JSON in " + path + ": " + e.what());
  }
  return scenario_from_json(j);
}

inline void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write scenario file: " + path);
  out << serialize_scenario(s).dump(2) << "\n";
}

// Named built-ins or a path to a JSON file.
inline Scenario resolve_scenario(const std::string& ref) {
  if (ref == "case-study") return build_case_study();
  if (ref == "toy") return build_toy_scenario();
  return load_scenario(ref);
}

}  // namespace cmdp
