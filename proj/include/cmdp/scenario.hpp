#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cmdp/errors.hpp"
#include "cmdp/geometry.hpp"

namespace cmdp {

// Internal units are SI throughout: metres, seconds, rates per second.
// Turn rates are degrees per second. Work quantities are task-type specific
// (work-minutes for duration-style tasks, m^3 or m^2 for volume/area tasks).

enum class TaskType { JC, HI, G, R, F };
enum class CrewType { JCC, HIC, GC, RC, FC };
enum class ComponentKind { Precast, CastInPlace };
enum class MaterialKind { None, Struts, Rebars, Templates };

inline CrewType crew_for(TaskType t) {
  switch (t) {
    case TaskType::JC: return CrewType::JCC;
    case TaskType::HI: return CrewType::HIC;
    case TaskType::G: return CrewType::GC;
    case TaskType::R: return CrewType::RC;
    case TaskType::F: return CrewType::FC;
  }
  throw ContractViolation("unknown task type");
}

inline std::string to_string(TaskType t) {
  switch (t) {
    case TaskType::JC: return "JC";
    case TaskType::HI: return "HI";
    case TaskType::G: return "G";
    case TaskType::R: return "R";
    case TaskType::F: return "F";
  }
  return "?";
}

inline std::string to_string(CrewType c) {
  switch (c) {
    case CrewType::JCC: return "JCC";
    case CrewType::HIC: return "HIC";
    case CrewType::GC: return "GC";
    case CrewType::RC: return "RC";
    case CrewType::FC: return "FC";
  }
  return "?";
}

inline std::string to_string(ComponentKind k) {
  return k == ComponentKind::Precast ? "precast" : "cast-in-place";
}

inline std::string to_string(MaterialKind m) {
  switch (m) {
    case MaterialKind::None: return "none";
    case MaterialKind::Struts: return "struts";
    case MaterialKind::Rebars: return "rebars";
    case MaterialKind::Templates: return "templates";
  }
  return "?";
}

template <typename E>
E enum_from_string(std::string_view s);

template <>
inline TaskType enum_from_string<TaskType>(std::string_view s) {
  if (s == "JC") return TaskType::JC;
  if (s == "HI") return TaskType::HI;
  if (s == "G") return TaskType::G;
  if (s == "R") return TaskType::R;
  if (s == "F") return TaskType::F;
  throw ParseError("unknown task type: " + std::string(s));
}

template <>
inline CrewType enum_from_string<CrewType>(std::string_view s) {
  if (s == "JCC") return CrewType::JCC;
  if (s == "HIC") return CrewType::HIC;
  if (s == "GC") return CrewType::GC;
  if (s == "RC") return CrewType::RC;
  if (s == "FC") return CrewType::FC;
  throw ParseError("unknown crew type: " + std::string(s));
}

template <>
inline ComponentKind enum_from_string<ComponentKind>(std::string_view s) {
  if (s == "precast") return ComponentKind::Precast;
  if (s == "cast-in-place") return ComponentKind::CastInPlace;
  throw ParseError("unknown component kind: " + std::string(s));
}

template <>
inline MaterialKind enum_from_string<MaterialKind>(std::string_view s) {
  if (s == "none") return MaterialKind::None;
  if (s == "struts") return MaterialKind::Struts;
  if (s == "rebars") return MaterialKind::Rebars;
  if (s == "templates") return MaterialKind::Templates;
  throw ParseError("unknown material kind: " + std::string(s));
}

struct ComponentSpec {
  std::string id;
  Rect footprint;
  ComponentKind kind = ComponentKind::CastInPlace;

  Vec2 position() const { return footprint.center(); }
  bool operator==(const ComponentSpec&) const = default;
};

struct TaskSpec {
  std::string id;
  TaskType type = TaskType::JC;
  int component = -1;
  std::vector<int> predecessors;
  double work_quantity = 0.0;     // type-specific units
  double area_distance = 1.0;     // radius of the congestion area, metres
  double congestion_index = 1.0;  // (0, 1], lower slows traffic more
  bool requires_crane = false;
  MaterialKind material = MaterialKind::None;
  double material_per_unit = 1.0;  // load consumed per unit of work

  // Derived at finalize.
  std::vector<int> successors;
  int transitive_successors = 0;

  bool operator==(const TaskSpec&) const = default;
};

struct AgentSpec {
  std::string id;
  CrewType crew = CrewType::JCC;
  double efficiency_mean = 1.0;  // work units per second
  double efficiency_std = 0.0;
  double occupation_area = 1.0;  // m^2, body is a disk of equal area
  double v_forward = 0.5;        // m/s
  double v_lateral = 0.1;        // m/s
  double v_turn = 30.0;          // deg/s
  double v_min = 0.1;            // m/s, congestion floor
  double carry_factor = 1.0;     // (0, 1], applied while loaded
  double inefficiency_index = 0.0;
  double max_load = 0.0;
  bool equipped = true;
  Vec2 spawn;

  double radius() const { return std::sqrt(occupation_area / kPi); }
  bool operator==(const AgentSpec&) const = default;
};

struct StorageSpec {
  std::string id;
  MaterialKind material = MaterialKind::None;
  Rect footprint;
  double acquire_rate = 0.0;  // material units per second
  double capacity = 0.0;
  double initial_stock = 0.0;

  Vec2 position() const { return footprint.center(); }
  double area_radius() const { return footprint.half_diagonal() + 0.5; }
  bool operator==(const StorageSpec&) const = default;
};

struct CraneSpec {
  std::string id;
  Vec2 position;
  double lift_duration = 120.0;  // seconds per served request

  bool operator==(const CraneSpec&) const = default;
};

struct Scenario {
  std::string name;
  double plane_width = 0.0;
  double plane_height = 0.0;
  std::vector<ComponentSpec> components;
  std::vector<TaskSpec> tasks;
  std::vector<StorageSpec> storages;
  std::vector<AgentSpec> crews;
  CraneSpec crane;
  Vec2 outlet;

  bool operator==(const Scenario&) const = default;

  Rect bounds() const { return {{0.0, 0.0}, {plane_width, plane_height}}; }
  double diagonal() const { return std::hypot(plane_width, plane_height); }

  int component_index(std::string_view id) const { return find_id(components, id); }
  int task_index(std::string_view id) const { return find_id(tasks, id); }
  int storage_index(std::string_view id) const { return find_id(storages, id); }
  int crew_index(std::string_view id) const { return find_id(crews, id); }

  // First storage holding the material, -1 if none.
  int storage_for(MaterialKind m) const {
    for (int i = 0; i < static_cast<int>(storages.size()); ++i)
      if (storages[i].material == m) return i;
    return -1;
  }

  bool has_crew_of(CrewType c) const {
    for (const auto& a : crews)
      if (a.crew == c) return true;
    return false;
  }

 private:
  template <typename T>
  static int find_id(const std::vector<T>& items, std::string_view id) {
    for (int i = 0; i < static_cast<int>(items.size()); ++i)
      if (items[i].id == id) return i;
    return -1;
  }
};

struct ValidationIssue {
  std::string message;
};

namespace detail {

template <typename T>
inline void check_unique_ids(const std::vector<T>& items, const char* what,
                             std::vector<ValidationIssue>& out) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].id.empty())
      out.push_back({std::string(what) + " " + std::to_string(i) + " has an empty id"});
    for (std::size_t j = i + 1; j < items.size(); ++j)
      if (items[i].id == items[j].id)
        out.push_back({std::string(what) + " id duplicated: " + items[i].id});
  }
}

// Kahn topological check; true when the precedence graph is acyclic.
inline bool precedence_acyclic(const std::vector<TaskSpec>& tasks) {
  std::size_t n = tasks.size();
  std::vector<int> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (int p : tasks[i].predecessors)
      if (p >= 0 && p < static_cast<int>(n)) ++indegree[i];
  std::vector<std::vector<int>> succ(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int p : tasks[i].predecessors)
      if (p >= 0 && p < static_cast<int>(n)) succ[p].push_back(static_cast<int>(i));
  std::vector<int> queue;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) queue.push_back(static_cast<int>(i));
  std::size_t seen = 0;
  while (!queue.empty()) {
    int u = queue.back();
    queue.pop_back();
    ++seen;
    for (int v : succ[u])
      if (--indegree[v] == 0) queue.push_back(v);
  }
  return seen == n;
}

}  // namespace detail

inline std::vector<ValidationIssue> validate_scenario(const Scenario& s) {
  std::vector<ValidationIssue> issues;
  auto add = [&](std::string m) { issues.push_back({std::move(m)}); };

  if (s.plane_width <= 0.0 || s.plane_height <= 0.0) add("plane dimensions must be positive");
  if (s.components.empty()) add("scenario has no components");
  if (s.tasks.empty()) add("scenario has no tasks");
  if (s.crews.empty()) add("scenario has no crews");

  detail::check_unique_ids(s.components, "component", issues);
  detail::check_unique_ids(s.tasks, "task", issues);
  detail::check_unique_ids(s.storages, "storage", issues);
  detail::check_unique_ids(s.crews, "crew", issues);

  const Rect plane = s.bounds();
  for (const auto& c : s.components) {
    if (!(plane.contains(c.footprint.min) && plane.contains(c.footprint.max)))
      add("component outside plane: " + c.id);
    if (c.footprint.width() <= 0.0 || c.footprint.height() <= 0.0)
      add("component footprint degenerate: " + c.id);
  }
  for (std::size_t i = 0; i < s.components.size(); ++i)
    for (std::size_t j = i + 1; j < s.components.size(); ++j)
      if (s.components[i].footprint.intersects(s.components[j].footprint))
        add("component footprints overlap: " + s.components[i].id + " and " + s.components[j].id);

  int n_tasks = static_cast<int>(s.tasks.size());
  for (const auto& t : s.tasks) {
    if (t.component < 0 || t.component >= static_cast<int>(s.components.size()))
      add("task references missing component: " + t.id);
    for (int p : t.predecessors) {
      if (p < 0 || p >= n_tasks)
        add("task references missing predecessor: " + t.id);
      else if (s.tasks[p].id == t.id)
        add("task is its own predecessor: " + t.id);
    }
    if (t.work_quantity <= 0.0) add("task work quantity must be positive: " + t.id);
    if (t.area_distance <= 0.0) add("task area distance must be positive: " + t.id);
    if (t.congestion_index <= 0.0 || t.congestion_index > 1.0)
      add("task congestion index must be in (0, 1]: " + t.id);
    if (t.material != MaterialKind::None) {
      if (s.storage_for(t.material) < 0)
        add("task needs material with no storage: " + t.id);
      if (t.material_per_unit <= 0.0)
        add("task material consumption must be positive: " + t.id);
    }
    if (!s.has_crew_of(crew_for(t.type)))
      add("no crew can perform task: " + t.id);
  }
  if (!detail::precedence_acyclic(s.tasks)) add("task precedence graph has a cycle");

  for (const auto& a : s.crews) {
    if (a.efficiency_mean <= 0.0) add("crew efficiency must be positive: " + a.id);
    if (a.efficiency_std < 0.0) add("crew efficiency spread must be non-negative: " + a.id);
    if (a.occupation_area <= 0.0) add("crew occupation area must be positive: " + a.id);
    if (a.v_forward <= 0.0 || a.v_lateral <= 0.0 || a.v_turn <= 0.0)
      add("crew velocities must be positive: " + a.id);
    if (a.v_min <= 0.0) add("crew minimum velocity must be positive: " + a.id);
    if (a.carry_factor <= 0.0 || a.carry_factor > 1.0)
      add("crew carry factor must be in (0, 1]: " + a.id);
    if (a.inefficiency_index < 0.0 || a.inefficiency_index > 1.0)
      add("crew inefficiency index must be in [0, 1]: " + a.id);
    if (a.max_load < 0.0) add("crew max load must be non-negative: " + a.id);
    if (!plane.contains(a.spawn)) add("crew spawn outside plane: " + a.id);
  }
  for (std::size_t i = 0; i < s.crews.size(); ++i)
    for (std::size_t j = i + 1; j < s.crews.size(); ++j)
      if (circles_overlap(s.crews[i].spawn, s.crews[i].radius(), s.crews[j].spawn,
                          s.crews[j].radius()))
        add("crew spawns overlap: " + s.crews[i].id + " and " + s.crews[j].id);

  for (const auto& st : s.storages) {
    if (!(plane.contains(st.footprint.min) && plane.contains(st.footprint.max)))
      add("storage outside plane: " + st.id);
    if (st.material == MaterialKind::None) add("storage holds no material: " + st.id);
    if (st.acquire_rate <= 0.0) add("storage acquire rate must be positive: " + st.id);
    if (st.capacity <= 0.0) add("storage capacity must be positive: " + st.id);
    if (st.initial_stock < 0.0 || st.initial_stock > st.capacity)
      add("storage initial stock must be in [0, capacity]: " + st.id);
  }

  if (!plane.contains(s.outlet)) add("outlet outside plane");
  if (s.crane.lift_duration < 0.0) add("crane lift duration must be non-negative");

  return issues;
}

// Fills derived precedence fields (successor lists, transitive successor
// counts). Call after validation; cyclic graphs are tolerated but counts are
// then capped at the task count.
inline void finalize_scenario(Scenario& s) {
  int n = static_cast<int>(s.tasks.size());
  for (auto& t : s.tasks) {
    t.successors.clear();
    t.transitive_successors = 0;
  }
  for (int i = 0; i < n; ++i)
    for (int p : s.tasks[i].predecessors)
      if (p >= 0 && p < n) s.tasks[p].successors.push_back(i);

  for (int i = 0; i < n; ++i) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack = s.tasks[i].successors;
    int count = 0;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      if (seen[u]) continue;
      seen[u] = 1;
      ++count;
      if (count > n) break;
      for (int v : s.tasks[u].successors) stack.push_back(v);
    }
    s.tasks[i].transitive_successors = count;
  }
}

// Throws ValidationError on the first issue, then finalizes.
inline void check_and_finalize(Scenario& s) {
  auto issues = validate_scenario(s);
  if (!issues.empty()) throw ValidationError(issues.front().message);
  finalize_scenario(s);
}

namespace detail {

inline AgentSpec make_crew(std::string id, CrewType crew, double eff_mean_per_min,
                           double eff_std_per_min, double occupation, double v_forward,
                           double carry, double inefficiency, double max_load, Vec2 spawn) {
  AgentSpec a;
  a.id = std::move(id);
  a.crew = crew;
  a.efficiency_mean = eff_mean_per_min / 60.0;
  a.efficiency_std = eff_std_per_min / 60.0;
  a.occupation_area = occupation;
  a.v_forward = v_forward;
  a.v_lateral = 0.1;
  a.v_turn = 30.0;
  a.v_min = 0.1;
  a.carry_factor = carry;
  a.inefficiency_index = inefficiency;
  a.max_load = max_load;
  a.equipped = true;
  a.spawn = spawn;
  return a;
}

}  // namespace detail

// Reconstructed floor: a 30 m x 30 m work plane, 36 components on a 6x6 grid
// with 1.5 m aisles, 15 precast components (joint cutting -> hoist/install ->
// grouting) and 21 cast-in-place components (form-working -> reinforcing),
// where each cast-in-place form-working task waits for the install of every
// adjacent precast component. 87 tasks, 7 crews, one tower crane.
inline Scenario build_case_study() {
  Scenario s;
  s.name = "case-study";
  s.plane_width = 30.0;
  s.plane_height = 30.0;

  constexpr int kGrid = 6;
  constexpr double kPitch = 4.5;
  constexpr double kFootprint = 3.0;
  constexpr double kFirstCenter = 3.0;

  auto is_precast = [](int row, int col) {
    bool lattice = (row % 2 == 0 && col % 2 == 0) || (row % 2 == 1 && col % 2 == 1);
    if (!lattice) return false;
    if ((row == 0 && col == 0) || (row == 2 && col == 2) || (row == 4 && col == 4)) return false;
    return true;
  };

  std::vector<std::vector<int>> cell(kGrid, std::vector<int>(kGrid, -1));
  for (int row = 0; row < kGrid; ++row) {
    for (int col = 0; col < kGrid; ++col) {
      ComponentSpec c;
      c.id = "c" + std::to_string(row) + std::to_string(col);
      Vec2 center{kFirstCenter + kPitch * col, kFirstCenter + kPitch * row};
      c.footprint = Rect::centered(center, kFootprint, kFootprint);
      c.kind = is_precast(row, col) ? ComponentKind::Precast : ComponentKind::CastInPlace;
      cell[row][col] = static_cast<int>(s.components.size());
      s.components.push_back(c);
    }
  }

  auto add_task = [&](std::string id, TaskType type, int component, double quantity,
                      double area, double index, bool crane, MaterialKind material) {
    TaskSpec t;
    t.id = std::move(id);
    t.type = type;
    t.component = component;
    t.work_quantity = quantity;
    t.area_distance = area;
    t.congestion_index = index;
    t.requires_crane = crane;
    t.material = material;
    return static_cast<int>((s.tasks.push_back(std::move(t)), s.tasks.size() - 1));
  };

  // Deterministic per-component spread of work quantities.
  auto spread = [](int idx, double lo, double hi, int period) {
    return lo + (hi - lo) * static_cast<double>((idx * 7) % period) / (period - 1);
  };

  std::vector<std::vector<int>> hi_task(kGrid, std::vector<int>(kGrid, -1));
  for (int row = 0; row < kGrid; ++row) {
    for (int col = 0; col < kGrid; ++col) {
      if (!is_precast(row, col)) continue;
      int comp = cell[row][col];
      const std::string& cid = s.components[comp].id;
      int jc = add_task("jc-" + cid, TaskType::JC, comp, 11.8, 1.2, 0.9, false,
                        MaterialKind::None);
      int hi = add_task("hi-" + cid, TaskType::HI, comp, 11.5, 2.5, 0.4, true,
                        MaterialKind::Struts);
      int g = add_task("g-" + cid, TaskType::G, comp, 5.0, 1.1, 0.7, false,
                       MaterialKind::None);
      s.tasks[hi].predecessors = {jc};
      s.tasks[g].predecessors = {hi};
      hi_task[row][col] = hi;
    }
  }
  for (int row = 0; row < kGrid; ++row) {
    for (int col = 0; col < kGrid; ++col) {
      if (is_precast(row, col)) continue;
      int comp = cell[row][col];
      const std::string& cid = s.components[comp].id;
      int f = add_task("f-" + cid, TaskType::F, comp, spread(comp, 12.0, 18.0, 21), 2.0,
                       0.5, false, MaterialKind::Templates);
      int r = add_task("r-" + cid, TaskType::R, comp, spread(comp, 0.45, 0.70, 19), 1.5,
                       0.7, false, MaterialKind::Rebars);
      s.tasks[r].predecessors = {f};
      const int drow[] = {-1, 1, 0, 0};
      const int dcol[] = {0, 0, -1, 1};
      for (int d = 0; d < 4; ++d) {
        int nr = row + drow[d];
        int nc = col + dcol[d];
        if (nr < 0 || nr >= kGrid || nc < 0 || nc >= kGrid) continue;
        if (hi_task[nr][nc] >= 0) s.tasks[f].predecessors.push_back(hi_task[nr][nc]);
      }
    }
  }

  auto add_storage = [&](std::string id, MaterialKind material, Vec2 center,
                         double acquire_per_min, double capacity) {
    StorageSpec st;
    st.id = std::move(id);
    st.material = material;
    st.footprint = Rect::centered(center, 2.0, 3.0);
    st.acquire_rate = acquire_per_min / 60.0;
    st.capacity = capacity;
    st.initial_stock = 0.0;
    s.storages.push_back(std::move(st));
  };
  add_storage("struts", MaterialKind::Struts, {28.6, 7.5}, 1.0, 36.0);
  add_storage("rebars", MaterialKind::Rebars, {28.6, 15.0}, 0.1, 4.0);
  add_storage("templates", MaterialKind::Templates, {28.6, 22.5}, 5.0, 90.0);

  s.outlet = {15.0, 0.6};
  s.crane = {"tower-crane", {28.6, 27.5}, 120.0};

  using detail::make_crew;
  s.crews.push_back(make_crew("jcc-1", CrewType::JCC, 1.0, 1.2 / 11.8, 4.0, 0.4, 1.0, 0.40,
                              0.0, {9.0, 1.4}));
  s.crews.push_back(make_crew("hic-1", CrewType::HIC, 1.0, 0.6 / 11.5, 5.0, 0.3, 0.8, 0.50,
                              12.0, {11.8, 1.5}));
  s.crews.push_back(make_crew("gc-1", CrewType::GC, 1.0, 0.2 / 5.0, 1.5, 0.6, 1.0, 0.15,
                              0.0, {14.2, 1.0}));
  s.crews.push_back(make_crew("rc-1", CrewType::RC, 0.021, 0.007, 2.4, 0.7, 0.9, 0.24,
                              0.8, {16.4, 1.2}));
  s.crews.push_back(make_crew("rc-2", CrewType::RC, 0.021, 0.007, 2.4, 0.7, 0.9, 0.24,
                              0.8, {18.6, 1.2}));
  s.crews.push_back(make_crew("fc-1", CrewType::FC, 0.495, 0.134, 3.2, 0.5, 0.7, 0.32,
                              20.0, {21.0, 1.3}));
  s.crews.push_back(make_crew("fc-2", CrewType::FC, 0.495, 0.134, 3.2, 0.5, 0.7, 0.32,
                              20.0, {23.4, 1.3}));

  check_and_finalize(s);
  return s;
}

// Small drill scenario: 20 m x 20 m plane, two crews without materials or
// crane needs, six tasks on six components, no precedence. Used for policy
// training exercises and fast tests.
inline Scenario build_toy_scenario() {
  Scenario s;
  s.name = "toy";
  s.plane_width = 20.0;
  s.plane_height = 20.0;

  const Vec2 centers[6] = {{4.0, 14.0}, {10.0, 16.0}, {16.0, 14.0},
                           {4.0, 7.0},  {10.0, 9.0},  {16.0, 7.0}};
  for (int i = 0; i < 6; ++i) {
    ComponentSpec c;
    c.id = "t" + std::to_string(i);
    c.footprint = Rect::centered(centers[i], 2.0, 2.0);
    c.kind = ComponentKind::CastInPlace;
    s.components.push_back(c);
  }

  for (int i = 0; i < 6; ++i) {
    TaskSpec t;
    t.id = (i < 3 ? "jc-t" : "g-t") + std::to_string(i);
    t.type = i < 3 ? TaskType::JC : TaskType::G;
    t.component = i;
    t.work_quantity = 2.0 + 0.5 * i;  // work-minutes, only felt with durations on
    t.area_distance = 1.8;
    t.congestion_index = i < 3 ? 0.5 : 0.6;
    s.tasks.push_back(std::move(t));
  }

  s.outlet = {10.0, 0.8};
  s.crane = {"crane", {19.0, 19.0}, 30.0};

  using detail::make_crew;
  s.crews.push_back(
      make_crew("jcc-1", CrewType::JCC, 1.0, 0.1, 1.8, 0.6, 1.0, 0.3, 0.0, {8.0, 2.0}));
  s.crews.push_back(
      make_crew("gc-1", CrewType::GC, 1.0, 0.04, 1.8, 0.6, 1.0, 0.2, 0.0, {12.0, 2.0}));

  check_and_finalize(s);
  return s;
}

}  // namespace cmdp
