#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "cmdp/errors.hpp"
#include "cmdp/scenario.hpp"

namespace cmdp {

// Task life cycle: wait (predecessors unfinished) -> queue (ready) ->
// on (being performed, possibly paused) -> end. Pool moves never go backwards.
enum class PoolLabel : std::uint8_t { Wait = 0, Queue = 1, On = 2, End = 3 };

enum class AgentMode : std::uint8_t {
  TargetReaching = 0,
  Tasking = 1,
  Fetching = 2,
  Waiting = 3,
  Deregistered = 4,
};

inline const char* to_cstring(AgentMode m) {
  switch (m) {
    case AgentMode::TargetReaching: return "target_reaching";
    case AgentMode::Tasking: return "tasking";
    case AgentMode::Fetching: return "fetching";
    case AgentMode::Waiting: return "waiting";
    case AgentMode::Deregistered: return "deregistered";
  }
  return "?";
}

// Object taxonomy shared by perception and targeting. The numeric values are
// the codes reported in ray observations.
enum class ObjectKind : std::uint8_t {
  None = 0,
  Wall = 1,
  Agent = 2,
  Component = 3,
  TaskArea = 4,
  Storage = 5,
  Outlet = 6,
};

struct ObjectRef {
  ObjectKind kind = ObjectKind::None;
  int index = -1;

  bool is_none() const { return kind == ObjectKind::None; }
  auto operator<=>(const ObjectRef&) const = default;

  static ObjectRef component(int i) { return {ObjectKind::Component, i}; }
  static ObjectRef storage(int i) { return {ObjectKind::Storage, i}; }
  static ObjectRef outlet() { return {ObjectKind::Outlet, 0}; }
};

inline Vec2 object_position(const Scenario& s, const ObjectRef& ref) {
  switch (ref.kind) {
    case ObjectKind::Component: return s.components[ref.index].position();
    case ObjectKind::Storage: return s.storages[ref.index].position();
    case ObjectKind::Outlet: return s.outlet;
    default: throw ContractViolation("object has no position");
  }
}

struct CraneRequest {
  enum class Kind : std::uint8_t { Material = 0, TaskAssist = 1 };
  int agent = -1;
  Kind kind = Kind::Material;
  int storage = -1;  // material requests only
  int task = -1;     // task-assist requests only
  long issued_at = 0;

  bool operator==(const CraneRequest&) const = default;
};

struct AgentStatus {
  AgentMode mode = AgentMode::TargetReaching;
  int current_task = -1;
  int paused_task = -1;
  double load = 0.0;
  std::vector<ObjectRef> target_scope;
  std::vector<double> target_values;  // aligned with target_scope
  // Per-tick sampled work efficiency (work units/s before congestion losses),
  // refreshed by the environment while tasking.
  double tick_rate = 0.0;

  double value_for(const ObjectRef& ref) const {
    for (std::size_t i = 0; i < target_scope.size() && i < target_values.size(); ++i)
      if (target_scope[i] == ref) return target_values[i];
    return 0.0;
  }

  bool in_scope(const ObjectRef& ref) const {
    return std::find(target_scope.begin(), target_scope.end(), ref) != target_scope.end();
  }

  bool operator==(const AgentStatus&) const = default;
};

struct ConstructionState {
  std::vector<PoolLabel> pools;      // per task
  std::vector<double> progress;      // per task, [0, work_quantity]
  std::vector<bool> crane_served;    // per task, assist already provided
  std::vector<double> stocks;        // per storage
  std::deque<CraneRequest> crane_queue;
  std::vector<AgentStatus> agents;
  std::vector<long> task_started;    // tick of queue -> on, -1 until then
  std::vector<long> task_ended;      // tick of on -> end, -1 until then

  static ConstructionState initial(const Scenario& s) {
    ConstructionState c;
    c.pools.assign(s.tasks.size(), PoolLabel::Wait);
    c.progress.assign(s.tasks.size(), 0.0);
    c.crane_served.assign(s.tasks.size(), false);
    c.stocks.reserve(s.storages.size());
    for (const auto& st : s.storages) c.stocks.push_back(st.initial_stock);
    c.agents.resize(s.crews.size());
    c.task_started.assign(s.tasks.size(), -1);
    c.task_ended.assign(s.tasks.size(), -1);
    return c;
  }

  int pool_count(PoolLabel p) const {
    return static_cast<int>(std::count(pools.begin(), pools.end(), p));
  }

  bool all_tasks_done() const {
    return std::all_of(pools.begin(), pools.end(),
                       [](PoolLabel p) { return p == PoolLabel::End; });
  }

  bool operator==(const ConstructionState&) const = default;
};

// Moves every wait-pool task whose predecessors have all ended into the queue.
inline void promote_tasks(ConstructionState& c, const Scenario& s) {
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    if (c.pools[i] != PoolLabel::Wait) continue;
    bool ready = true;
    for (int p : s.tasks[i].predecessors)
      if (c.pools[p] != PoolLabel::End) {
        ready = false;
        break;
      }
    if (ready) c.pools[i] = PoolLabel::Queue;
  }
}

struct ComponentTasks {
  std::vector<int> executable;  // queue-pool tasks on the component
  std::vector<int> performing;  // on-pool tasks on the component
};

inline std::vector<ComponentTasks> project_to_components(const ConstructionState& c,
                                                         const Scenario& s) {
  std::vector<ComponentTasks> out(s.components.size());
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    if (c.pools[i] == PoolLabel::Queue)
      out[s.tasks[i].component].executable.push_back(static_cast<int>(i));
    else if (c.pools[i] == PoolLabel::On)
      out[s.tasks[i].component].performing.push_back(static_cast<int>(i));
  }
  return out;
}

// Lowest-index queue-pool task of the crew's type on the component, -1 if none.
inline int executable_task_of_type(const ConstructionState& c, const Scenario& s, int component,
                                   CrewType crew) {
  for (std::size_t i = 0; i < s.tasks.size(); ++i)
    if (c.pools[i] == PoolLabel::Queue && s.tasks[i].component == component &&
        crew_for(s.tasks[i].type) == crew)
      return static_cast<int>(i);
  return -1;
}

// Components currently offering a queue-pool task for the crew type. When the
// type has nothing left in either queue or wait, the outlet is the only
// remaining destination.
inline std::vector<ObjectRef> executable_targets(const ConstructionState& c, const Scenario& s,
                                                 CrewType crew) {
  std::vector<ObjectRef> out;
  bool any_pending = false;
  std::vector<char> seen(s.components.size(), 0);
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    if (crew_for(s.tasks[i].type) != crew) continue;
    if (c.pools[i] == PoolLabel::Wait) any_pending = true;
    if (c.pools[i] == PoolLabel::Queue) {
      any_pending = true;
      if (!seen[s.tasks[i].component]) {
        seen[s.tasks[i].component] = 1;
        out.push_back(ObjectRef::component(s.tasks[i].component));
      }
    }
  }
  if (!any_pending) return {ObjectRef::outlet()};
  std::sort(out.begin(), out.end());
  return out;
}

// Adds work to an on-pool task; progress is clamped at the work quantity.
// Pool movement on completion is the decision model's job.
inline void advance_task(ConstructionState& c, const Scenario& s, int task, double delta) {
  if (task < 0 || task >= static_cast<int>(s.tasks.size()))
    throw ContractViolation("advance_task: bad task index");
  if (c.pools[task] != PoolLabel::On)
    throw ContractViolation("advance_task: task not in the on pool: " + s.tasks[task].id);
  if (delta < 0.0) throw ContractViolation("advance_task: negative work delta");
  c.progress[task] = std::min(c.progress[task] + delta, s.tasks[task].work_quantity);
}

struct CraneServeOutcome {
  bool served = false;
  CraneRequest request;
};

// Single-server FIFO crane: at most the head request is served per tick, once
// its lift time has elapsed. Material requests refill the storage to capacity
// and release the waiting agent back to fetching; task-assist requests mark
// the task served and release the agent back to tasking.
inline CraneServeOutcome serve_crane(ConstructionState& c, const Scenario& s, long tick) {
  CraneServeOutcome out;
  if (c.crane_queue.empty()) return out;
  const CraneRequest& head = c.crane_queue.front();
  if (static_cast<double>(tick - head.issued_at) < s.crane.lift_duration) return out;
  out.served = true;
  out.request = head;
  if (head.kind == CraneRequest::Kind::Material) {
    if (head.storage < 0 || head.storage >= static_cast<int>(c.stocks.size()))
      throw ContractViolation("serve_crane: bad storage index in request");
    c.stocks[head.storage] = s.storages[head.storage].capacity;
    if (head.agent >= 0 && c.agents[head.agent].mode == AgentMode::Waiting)
      c.agents[head.agent].mode = AgentMode::Fetching;
  } else {
    if (head.task < 0 || head.task >= static_cast<int>(c.crane_served.size()))
      throw ContractViolation("serve_crane: bad task index in request");
    c.crane_served[head.task] = true;
    if (head.agent >= 0 && c.agents[head.agent].mode == AgentMode::Waiting)
      c.agents[head.agent].mode = AgentMode::Tasking;
  }
  c.crane_queue.pop_front();
  return out;
}

}  // namespace cmdp
