#pragma once

#include <optional>
#include <vector>

#include "cmdp/errors.hpp"
#include "cmdp/physics.hpp"
#include "cmdp/scenario.hpp"
#include "cmdp/taskflow.hpp"

namespace cmdp {

// The ten production rules of the crew decision model. At most one fires per
// agent per tick, checked in a fixed priority order.
enum class RuleCode : int {
  None = 0,
  InitiateTask = 1,
  ExecuteTask = 2,
  PauseTask = 3,
  ResumeTask = 4,
  FetchMaterials = 5,
  FetchingCompleted = 6,
  RequestCraneMaterial = 7,
  RequestCraneTask = 8,
  CompleteTask = 9,
  AcquireTarget = 10,
};

// Curriculum simplifications: the first training stage runs with all three
// enabled (instant tasks, bottomless storages, no crane waits).
struct StageFlags {
  bool zero_durations = false;
  bool infinite_stock = false;
  bool instant_crane = false;
};

struct DecisionContext {
  const Scenario& scenario;
  StageFlags stage;
  double dt = 1.0;
  long tick = 0;
};

struct DecisionOutcome {
  RuleCode rule = RuleCode::None;
  int task = -1;
  int storage = -1;
  double work_delta = 0.0;   // execute / complete
  double fetch_delta = 0.0;  // fetch transfer this tick
  std::optional<std::vector<ObjectRef>> new_scope;
  std::optional<AgentMode> transition;
  bool deregister = false;
  bool arrival = false;  // the rule fired because the agent reached a target
  ObjectRef arrived_at;
};

// How close counts as having reached the object. Components use the pending
// task's working distance; storages their area radius; the outlet a fixed
// metre. The agent body radius is added so arrival means touching the zone.
inline double reach_distance(const ConstructionState& c, const Scenario& s, int agent,
                             const ObjectRef& ref) {
  double base = 1.0;
  if (ref.kind == ObjectKind::Component) {
    const AgentStatus& st = c.agents[agent];
    int task = -1;
    if (st.paused_task >= 0 && s.tasks[st.paused_task].component == ref.index)
      task = st.paused_task;
    else
      task = executable_task_of_type(c, s, ref.index, s.crews[agent].crew);
    if (task >= 0) {
      base = s.tasks[task].area_distance;
    } else {
      for (const auto& t : s.tasks)
        if (t.component == ref.index) base = std::max(base, t.area_distance);
    }
  } else if (ref.kind == ObjectKind::Storage) {
    base = s.storages[ref.index].area_radius();
  }
  return base + s.crews[agent].radius();
}

inline bool arrived_at(const ConstructionState& c, const PhysicalState& p, const Scenario& s,
                       int agent, const ObjectRef& ref) {
  return distance(p.poses[agent].position, object_position(s, ref)) <=
         reach_distance(c, s, agent, ref);
}

// A queue task whose would-be congestion area intersects the active area of a
// different task cannot start yet.
inline bool task_spatially_blocked(const PhysicalState& p, const Scenario& s, int task) {
  Vec2 center = s.components[s.tasks[task].component].position();
  double radius = s.tasks[task].area_distance;
  for (const auto& a : p.areas) {
    if (a.source != ObjectKind::TaskArea || a.owner == task) continue;
    if (circles_overlap(center, radius, a.center, a.radius)) return true;
  }
  return false;
}

// Target acquisition set: executable components filtered by spatial
// feasibility. Keeps the outlet fallback from executable_targets.
inline std::vector<ObjectRef> feasible_targets(const ConstructionState& c,
                                               const PhysicalState& p, const Scenario& s,
                                               CrewType crew) {
  std::vector<ObjectRef> raw = executable_targets(c, s, crew);
  std::vector<ObjectRef> out;
  for (const auto& ref : raw) {
    if (ref.kind != ObjectKind::Component) {
      out.push_back(ref);
      continue;
    }
    int task = executable_task_of_type(c, s, ref.index, crew);
    if (task >= 0 && !task_spatially_blocked(p, s, task)) out.push_back(ref);
  }
  return out;
}

enum class IdleCause { None, Precedence, Space, Exhausted };

// Why a scopeless target-reaching agent has nothing to do right now. A ready
// task in the agent's trade implies the hold-up is space: were it reachable,
// target acquisition would have claimed it.
inline IdleCause classify_idle_cause(const ConstructionState& c, const Scenario& s, int agent) {
  const AgentStatus& st = c.agents[agent];
  if (st.mode != AgentMode::TargetReaching || !st.target_scope.empty() || st.paused_task >= 0)
    return IdleCause::None;
  CrewType crew = s.crews[agent].crew;
  bool any_queue = false;
  bool any_wait = false;
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    if (crew_for(s.tasks[i].type) != crew) continue;
    if (c.pools[i] == PoolLabel::Queue) any_queue = true;
    if (c.pools[i] == PoolLabel::Wait) any_wait = true;
  }
  if (any_queue) return IdleCause::Space;       // executable but spatially blocked
  if (any_wait) return IdleCause::Precedence;   // predecessors still running
  return IdleCause::Exhausted;
}

namespace detail {

inline double material_per_unit(const Scenario& s, int task, const StageFlags& stage) {
  if (stage.infinite_stock) return 0.0;
  const TaskSpec& t = s.tasks[task];
  return t.material == MaterialKind::None ? 0.0 : t.material_per_unit;
}

inline int storage_area_index(const PhysicalState& p, int storage) {
  for (std::size_t i = 0; i < p.areas.size(); ++i)
    if (p.areas[i].source == ObjectKind::Storage && p.areas[i].owner == storage)
      return static_cast<int>(i);
  return -1;
}

}  // namespace detail

// Evaluates the rule table for one agent. Pure: no state is modified and the
// per-tick efficiency sample is read from AgentStatus::tick_rate.
inline DecisionOutcome decide(int agent, const ConstructionState& c, const PhysicalState& p,
                              const DecisionContext& ctx) {
  const Scenario& s = ctx.scenario;
  const AgentSpec& spec = s.crews[agent];
  const AgentStatus& st = c.agents[agent];
  DecisionOutcome out;
  constexpr double kEps = 1e-12;

  if (st.mode == AgentMode::Deregistered || st.mode == AgentMode::Waiting) return out;

  if (st.mode == AgentMode::Tasking) {
    int task = st.current_task;
    if (task < 0) throw ContractViolation("tasking agent without a current task");
    const TaskSpec& t = s.tasks[task];
    int area = p.area_of_task(task);
    int invaders = area >= 0 ? invaders_in_area(p, p.areas[area], agent) : 0;
    double eff = effective_efficiency(st.tick_rate, invaders, spec.inefficiency_index);
    double remaining = t.work_quantity - c.progress[task];
    double raw = ctx.stage.zero_durations ? remaining : eff * ctx.dt;
    bool crane_ok = !t.requires_crane || c.crane_served[task] || ctx.stage.instant_crane;
    double mpu = detail::material_per_unit(s, task, ctx.stage);
    // The tick's slice is capped by the carried material, so the load drains
    // to exactly zero instead of stranding an unusable remainder.
    double delta = mpu > 0.0 ? std::min(raw, st.load / mpu) : raw;

    // Complete: this tick's work covers what is left, materials included.
    if (spec.equipped && crane_ok && delta >= remaining - kEps &&
        st.load >= remaining * mpu - kEps) {
      out.rule = RuleCode::CompleteTask;
      out.task = task;
      out.work_delta = remaining;
      out.transition = AgentMode::TargetReaching;
      return out;
    }
    // Pause: the material ran out before the job was done.
    if (mpu > 0.0 && st.load <= kEps) {
      out.rule = RuleCode::PauseTask;
      out.task = task;
      out.storage = s.storage_for(t.material);
      if (out.storage < 0) throw ContractViolation("no storage for task material: " + t.id);
      out.new_scope = std::vector<ObjectRef>{ObjectRef::storage(out.storage)};
      out.transition = AgentMode::TargetReaching;
      return out;
    }
    // Execute: equipment, crane assistance and materials all in place.
    if (spec.equipped && crane_ok) {
      out.rule = RuleCode::ExecuteTask;
      out.task = task;
      out.work_delta = delta;
      return out;
    }
    // Request the crane once per task, after materials are secured.
    if (t.requires_crane && !c.crane_served[task]) {
      out.rule = RuleCode::RequestCraneTask;
      out.task = task;
      out.transition = AgentMode::Waiting;
      return out;
    }
    return out;
  }

  if (st.mode == AgentMode::Fetching) {
    int paused = st.paused_task;
    if (paused < 0) throw ContractViolation("fetching agent without a paused task");
    const TaskSpec& t = s.tasks[paused];
    int storage = s.storage_for(t.material);
    if (storage < 0) throw ContractViolation("fetching with no storage for material");
    double stock = c.stocks[storage];
    double capacity = s.storages[storage].capacity;
    double need = spec.max_load - st.load;

    if (st.load >= spec.max_load - 1e-9) {
      out.rule = RuleCode::FetchingCompleted;
      out.new_scope =
          std::vector<ObjectRef>{ObjectRef::component(s.tasks[paused].component)};
      out.transition = AgentMode::TargetReaching;
      return out;
    }
    if (!ctx.stage.infinite_stock && stock < need - kEps && stock < capacity - kEps) {
      out.rule = RuleCode::RequestCraneMaterial;
      out.storage = storage;
      out.transition = AgentMode::Waiting;
      return out;
    }
    if (ctx.stage.infinite_stock) {
      out.rule = RuleCode::FetchMaterials;
      out.storage = storage;
      out.fetch_delta = need;
      return out;
    }
    if (stock > kEps) {
      int area = detail::storage_area_index(p, storage);
      int invaders = area >= 0 ? invaders_in_area(p, p.areas[area], agent) : 0;
      double rate =
          effective_efficiency(s.storages[storage].acquire_rate, invaders, spec.inefficiency_index);
      out.rule = RuleCode::FetchMaterials;
      out.storage = storage;
      out.fetch_delta = std::min({rate * ctx.dt, stock, need});
      return out;
    }
    return out;
  }

  // Target reaching. Arrival-triggered rules first, in table priority order.
  for (const auto& ref : st.target_scope) {
    if (ref.kind != ObjectKind::Storage) continue;
    if (!arrived_at(c, p, s, agent, ref)) continue;
    double stock = c.stocks[ref.index];
    double capacity = s.storages[ref.index].capacity;
    double need = spec.max_load - st.load;
    if (!ctx.stage.infinite_stock && stock < need - kEps && stock < capacity - kEps) {
      // Arrived at a near-empty storage: ask the crane to restock.
      out.rule = RuleCode::RequestCraneMaterial;
      out.storage = ref.index;
      out.transition = AgentMode::Waiting;
      out.arrival = true;
      out.arrived_at = ref;
      return out;
    }
    if (ctx.stage.infinite_stock || stock > kEps) {
      out.rule = RuleCode::FetchMaterials;
      out.storage = ref.index;
      out.transition = AgentMode::Fetching;
      out.arrival = true;
      out.arrived_at = ref;
      if (ctx.stage.infinite_stock) {
        out.fetch_delta = need;
      } else {
        int area = detail::storage_area_index(p, ref.index);
        int invaders = area >= 0 ? invaders_in_area(p, p.areas[area], agent) : 0;
        double rate = effective_efficiency(s.storages[ref.index].acquire_rate, invaders,
                                           spec.inefficiency_index);
        out.fetch_delta = std::min({rate * ctx.dt, stock, need});
      }
      return out;
    }
  }

  if (st.paused_task < 0 && spec.equipped) {
    for (const auto& ref : st.target_scope) {
      if (ref.kind != ObjectKind::Component) continue;
      if (!arrived_at(c, p, s, agent, ref)) continue;
      int task = executable_task_of_type(c, s, ref.index, spec.crew);
      if (task < 0 || task_spatially_blocked(p, s, task)) continue;
      out.rule = RuleCode::InitiateTask;
      out.task = task;
      out.transition = AgentMode::Tasking;
      out.arrival = true;
      out.arrived_at = ref;
      return out;
    }
  }

  if (st.paused_task >= 0) {
    // Resuming without anything to work with would bounce straight back into
    // a pause; stay en route to the storage until something is carried.
    double mpu = detail::material_per_unit(s, st.paused_task, ctx.stage);
    bool supplied = mpu <= 0.0 || st.load > kEps;
    ObjectRef home = ObjectRef::component(s.tasks[st.paused_task].component);
    if (supplied && arrived_at(c, p, s, agent, home)) {
      out.rule = RuleCode::ResumeTask;
      out.task = st.paused_task;
      out.transition = AgentMode::Tasking;
      out.arrival = true;
      out.arrived_at = home;
      return out;
    }
  }

  if (st.in_scope(ObjectRef::outlet()) && arrived_at(c, p, s, agent, ObjectRef::outlet())) {
    out.rule = RuleCode::AcquireTarget;
    out.deregister = true;
    out.transition = AgentMode::Deregistered;
    out.arrival = true;
    out.arrived_at = ObjectRef::outlet();
    return out;
  }

  if (st.target_scope.empty() && st.paused_task < 0) {
    std::vector<ObjectRef> targets = feasible_targets(c, p, s, spec.crew);
    if (!targets.empty()) {
      out.rule = RuleCode::AcquireTarget;
      out.new_scope = std::move(targets);
      return out;
    }
  }
  return out;
}

struct TransitionEffects {
  ObjectRef arrival;  // None when no target was reached this tick
  double arrival_value = 0.0;
  int initiated_task = -1;
  int completed_task = -1;
  bool crane_requested = false;
  double work_done = 0.0;
  double material_used = 0.0;
  double fetched = 0.0;
};

// Executes a decision outcome against construction and physical state.
inline TransitionEffects apply_transition(int agent, const DecisionOutcome& out,
                                          ConstructionState& c, PhysicalState& p,
                                          const DecisionContext& ctx) {
  const Scenario& s = ctx.scenario;
  AgentStatus& st = c.agents[agent];
  TransitionEffects fx;

  if (out.arrival) {
    fx.arrival = out.arrived_at;
    fx.arrival_value = st.value_for(out.arrived_at);
  }

  auto consume = [&](int task, double work) {
    double mpu = detail::material_per_unit(s, task, ctx.stage);
    if (mpu <= 0.0) return;
    double used = work * mpu;
    st.load = std::max(0.0, st.load - used);
    fx.material_used += used;
  };

  switch (out.rule) {
    case RuleCode::None:
      break;

    case RuleCode::InitiateTask: {
      if (st.mode != AgentMode::TargetReaching || st.paused_task >= 0)
        throw ContractViolation("initiate from a wrong state");
      if (c.pools[out.task] != PoolLabel::Queue)
        throw ContractViolation("initiate on a task not in queue");
      c.pools[out.task] = PoolLabel::On;
      c.task_started[out.task] = ctx.tick;
      fx.initiated_task = out.task;
      if (ctx.stage.instant_crane) c.crane_served[out.task] = true;
      st.target_scope.clear();
      st.target_values.clear();
      if (ctx.stage.zero_durations) {
        fx.work_done = s.tasks[out.task].work_quantity;
        c.progress[out.task] = s.tasks[out.task].work_quantity;
        c.pools[out.task] = PoolLabel::End;
        c.task_ended[out.task] = ctx.tick;
        fx.completed_task = out.task;
        st.mode = AgentMode::TargetReaching;
        st.current_task = -1;
        promote_tasks(c, s);
      } else {
        p.register_task_area(s, out.task);
        st.mode = AgentMode::Tasking;
        st.current_task = out.task;
      }
      break;
    }

    case RuleCode::ExecuteTask: {
      if (st.mode != AgentMode::Tasking || st.current_task != out.task)
        throw ContractViolation("execute from a wrong state");
      advance_task(c, s, out.task, out.work_delta);
      consume(out.task, out.work_delta);
      fx.work_done = out.work_delta;
      break;
    }

    case RuleCode::PauseTask: {
      if (st.mode != AgentMode::Tasking || st.current_task != out.task)
        throw ContractViolation("pause from a wrong state");
      st.paused_task = out.task;
      st.current_task = -1;
      st.mode = AgentMode::TargetReaching;
      st.target_scope = *out.new_scope;
      st.target_values.assign(st.target_scope.size(), 0.0);
      break;
    }

    case RuleCode::ResumeTask: {
      if (st.paused_task < 0) throw ContractViolation("resume with no paused task");
      if (c.pools[st.paused_task] != PoolLabel::On)
        throw ContractViolation("resume on a task not in the on pool");
      st.current_task = st.paused_task;
      st.paused_task = -1;
      st.mode = AgentMode::Tasking;
      st.target_scope.clear();
      st.target_values.clear();
      break;
    }

    case RuleCode::FetchMaterials: {
      if (out.transition == AgentMode::Fetching) st.mode = AgentMode::Fetching;
      if (st.mode != AgentMode::Fetching)
        throw ContractViolation("fetch from a wrong state");
      double amount = std::min(out.fetch_delta, s.crews[agent].max_load - st.load);
      st.load += amount;
      fx.fetched = amount;
      if (!ctx.stage.infinite_stock && out.storage >= 0) {
        c.stocks[out.storage] = std::max(0.0, c.stocks[out.storage] - amount);
        p.update_storage_index(s, out.storage, c.stocks[out.storage]);
      }
      if (out.arrival) {
        st.target_scope.clear();
        st.target_values.clear();
      }
      break;
    }

    case RuleCode::FetchingCompleted: {
      if (st.mode != AgentMode::Fetching)
        throw ContractViolation("fetch completion from a wrong state");
      st.mode = AgentMode::TargetReaching;
      st.target_scope = *out.new_scope;
      st.target_values.assign(st.target_scope.size(), 0.0);
      break;
    }

    case RuleCode::RequestCraneMaterial: {
      CraneRequest req;
      req.agent = agent;
      req.kind = CraneRequest::Kind::Material;
      req.storage = out.storage;
      req.issued_at = ctx.tick;
      c.crane_queue.push_back(req);
      st.mode = AgentMode::Waiting;
      fx.crane_requested = true;
      if (out.arrival) {
        st.target_scope.clear();
        st.target_values.clear();
      }
      break;
    }

    case RuleCode::RequestCraneTask: {
      if (st.current_task != out.task)
        throw ContractViolation("crane request for a task the agent is not performing");
      CraneRequest req;
      req.agent = agent;
      req.kind = CraneRequest::Kind::TaskAssist;
      req.task = out.task;
      req.issued_at = ctx.tick;
      c.crane_queue.push_back(req);
      st.mode = AgentMode::Waiting;
      fx.crane_requested = true;
      break;
    }

    case RuleCode::CompleteTask: {
      if (st.mode != AgentMode::Tasking || st.current_task != out.task)
        throw ContractViolation("complete from a wrong state");
      advance_task(c, s, out.task, out.work_delta);
      consume(out.task, out.work_delta);
      fx.work_done = out.work_delta;
      c.pools[out.task] = PoolLabel::End;
      c.task_ended[out.task] = ctx.tick;
      if (p.area_of_task(out.task) >= 0) p.deregister_task_area(s, out.task);
      st.mode = AgentMode::TargetReaching;
      st.current_task = -1;
      st.target_scope.clear();
      st.target_values.clear();
      fx.completed_task = out.task;
      promote_tasks(c, s);
      break;
    }

    case RuleCode::AcquireTarget: {
      if (out.deregister) {
        st.mode = AgentMode::Deregistered;
        st.target_scope.clear();
        st.target_values.clear();
      } else {
        st.target_scope = *out.new_scope;
        st.target_values.assign(st.target_scope.size(), 0.0);
      }
      break;
    }
  }

  return fx;
}

}  // namespace cmdp
