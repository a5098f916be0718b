#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "cmdp/geometry.hpp"
#include "cmdp/physics.hpp"
#include "cmdp/scenario.hpp"
#include "cmdp/taskflow.hpp"

namespace cmdp {

struct PerceptionConfig {
  int n_frontal = 12;
  int m_surround = 16;
  double sight_distance = 20.0;      // frontal ray range, m
  double field_of_view_deg = 120.0;  // frontal spread about the heading
  double surround_distance = 4.0;    // short omnidirectional range, m
};

struct RayHit {
  double relative_length = 1.0;  // hit distance / ray range, 1 when nothing hit
  double emit_angle_deg = 0.0;   // relative to the agent heading
  ObjectKind kind = ObjectKind::None;
  int index = -1;
  double value = 0.0;  // priority value of the hit object, if any is known

  ObjectRef object() const { return {kind, index}; }
};

namespace detail {

struct RaySolidHit {
  double t = std::numeric_limits<double>::infinity();
  ObjectKind kind = ObjectKind::None;
  int index = -1;
};

inline RaySolidHit nearest_solid(const Ray& ray, const PhysicalState& p, const Scenario& s,
                                 int agent) {
  RaySolidHit best;
  auto consider = [&](std::optional<double> t, ObjectKind kind, int index) {
    if (t && *t < best.t) best = {*t, kind, index};
  };
  consider(ray_bounds_exit(ray, p.bounds), ObjectKind::Wall, 0);
  for (int i = 0; i < static_cast<int>(s.components.size()); ++i)
    consider(ray_rect(ray, s.components[i].footprint), ObjectKind::Component, i);
  for (int i = 0; i < static_cast<int>(s.storages.size()); ++i)
    consider(ray_rect(ray, s.storages[i].footprint), ObjectKind::Storage, i);
  for (int j = 0; j < static_cast<int>(p.poses.size()); ++j) {
    if (j == agent) continue;
    consider(ray_circle(ray, p.poses[j].position, s.crews[j].radius()), ObjectKind::Agent, j);
  }
  consider(ray_circle(ray, s.outlet, 0.5), ObjectKind::Outlet, 0);
  return best;
}

inline RaySolidHit nearest_area_boundary(const Ray& ray, const PhysicalState& p) {
  RaySolidHit best;
  for (const auto& a : p.areas) {
    auto t = ray_circle(ray, a.center, a.radius);
    if (t && *t < best.t)
      best = {*t, a.source == ObjectKind::Storage ? ObjectKind::Storage : ObjectKind::TaskArea,
              a.owner};
  }
  return best;
}

inline RayHit trace_one(const PhysicalState& p, const Scenario& s, int agent, double angle_deg,
                        double range, const std::map<ObjectRef, double>& memory) {
  const AgentPose& pose = p.poses[agent];
  Ray ray{pose.position, heading_vector(pose.heading_deg + angle_deg)};
  RayHit hit;
  hit.emit_angle_deg = angle_deg;

  RaySolidHit solid = nearest_solid(ray, p, s, agent);
  // Congestion areas never occlude objects; their boundary is only reported
  // when the ray would otherwise see nothing at all.
  if (solid.t > range) {
    RaySolidHit area = nearest_area_boundary(ray, p);
    if (area.t <= range) solid = area;
  }
  if (solid.t <= range) {
    hit.relative_length = solid.t / range;
    hit.kind = solid.kind;
    hit.index = solid.index;
    auto it = memory.find(hit.object());
    hit.value = it != memory.end() ? it->second : 0.0;
  }
  return hit;
}

}  // namespace detail

// Casts the frontal fan plus the short surround ring. Frontal ray k points at
// (k - n/2) * fov/n degrees off the heading, so the fan always contains a
// straight-ahead ray; surround ray k points at k * 360/m.
inline std::vector<RayHit> cast_rays(const PhysicalState& p, const Scenario& s, int agent,
                                     const PerceptionConfig& cfg,
                                     const std::map<ObjectRef, double>& value_memory) {
  std::vector<RayHit> hits;
  hits.reserve(cfg.n_frontal + cfg.m_surround);
  for (int k = 0; k < cfg.n_frontal; ++k) {
    double angle = (k - cfg.n_frontal / 2) * (cfg.field_of_view_deg / cfg.n_frontal);
    hits.push_back(detail::trace_one(p, s, agent, angle, cfg.sight_distance, value_memory));
  }
  for (int k = 0; k < cfg.m_surround; ++k) {
    double angle = k * (360.0 / cfg.m_surround);
    hits.push_back(detail::trace_one(p, s, agent, angle, cfg.surround_distance, value_memory));
  }
  return hits;
}

// Target filter over ray values: hits on objects inside the agent's target
// scope carry exactly the scope valuation, every other value reads zero.
inline std::vector<RayHit> modify_observation(std::vector<RayHit> hits,
                                              const std::vector<ObjectRef>& scope,
                                              const std::vector<double>& values) {
  for (auto& h : hits) {
    h.value = 0.0;
    if (h.kind == ObjectKind::None) continue;
    ObjectRef ref = h.object();
    for (std::size_t i = 0; i < scope.size() && i < values.size(); ++i) {
      if (scope[i] == ref) {
        h.value = values[i];
        break;
      }
    }
  }
  return hits;
}

inline int reach_observation_size(const PerceptionConfig& cfg) {
  return (cfg.n_frontal + cfg.m_surround) * 4 + 3;
}

// Flat low-level policy input: per ray (relative length, emit angle, object
// type code, value), then the agent's realized planar velocity. Angles are
// scaled by 180, type codes by the code range, velocities by the crew's
// nominal forward speed.
inline std::vector<double> assemble_reaching_obs(const std::vector<RayHit>& hits,
                                                 const Vec2& velocity, const AgentSpec& spec) {
  std::vector<double> obs;
  obs.reserve(hits.size() * 4 + 3);
  for (const auto& h : hits) {
    obs.push_back(h.relative_length);
    obs.push_back(h.emit_angle_deg / 180.0);
    obs.push_back(static_cast<double>(h.kind) / 6.0);
    obs.push_back(h.value);
  }
  double v = spec.v_forward > 0.0 ? spec.v_forward : 1.0;
  obs.push_back(velocity.x / v);
  obs.push_back(velocity.y / v);
  obs.push_back(velocity.norm() / v);
  return obs;
}

// Space conflicts for a task: pending tasks on other components whose
// would-be congestion areas intersect this one's.
inline int space_conflicts(const ConstructionState& c, const Scenario& s, int task,
                           bool include_wait) {
  const TaskSpec& t = s.tasks[task];
  Vec2 center = s.components[t.component].position();
  int n = 0;
  for (std::size_t j = 0; j < s.tasks.size(); ++j) {
    if (static_cast<int>(j) == task) continue;
    const TaskSpec& other = s.tasks[j];
    if (other.component == t.component) continue;
    bool pending = c.pools[j] == PoolLabel::Queue ||
                   (include_wait && c.pools[j] == PoolLabel::Wait);
    if (!pending) continue;
    if (circles_overlap(center, t.area_distance, s.components[other.component].position(),
                        other.area_distance))
      ++n;
  }
  return n;
}

// The component's most imminent task: first queue-pool task, else first
// wait-pool, else first on-pool; -1 when everything on it has ended.
inline int next_pending_task(const ConstructionState& c, const Scenario& s, int component) {
  int waiting = -1;
  int running = -1;
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    if (s.tasks[i].component != component) continue;
    if (c.pools[i] == PoolLabel::Queue) return static_cast<int>(i);
    if (waiting < 0 && c.pools[i] == PoolLabel::Wait) waiting = static_cast<int>(i);
    if (running < 0 && c.pools[i] == PoolLabel::On) running = static_cast<int>(i);
  }
  return waiting >= 0 ? waiting : running;
}

// Potential targets for the whole episode: every component, every storage,
// then the outlet. Fixed order and row count from reset to termination.
struct EvalTargetSet {
  std::vector<ObjectRef> targets;
  double max_action_time = 1.0;  // normalizer for expected task durations, s
};

inline double expected_task_duration(const Scenario& s, int task) {
  CrewType crew = crew_for(s.tasks[task].type);
  for (const auto& a : s.crews)
    if (a.crew == crew && a.efficiency_mean > 0.0)
      return s.tasks[task].work_quantity / a.efficiency_mean;
  return 0.0;
}

inline EvalTargetSet make_eval_target_set(const Scenario& s) {
  EvalTargetSet set;
  for (int i = 0; i < static_cast<int>(s.components.size()); ++i)
    set.targets.push_back(ObjectRef::component(i));
  for (int i = 0; i < static_cast<int>(s.storages.size()); ++i)
    set.targets.push_back(ObjectRef::storage(i));
  set.targets.push_back(ObjectRef::outlet());
  for (std::size_t i = 0; i < s.tasks.size(); ++i)
    set.max_action_time = std::max(set.max_action_time, expected_task_duration(s, static_cast<int>(i)));
  return set;
}

inline constexpr int kEvalRowWidth = 10;

inline int eval_observation_size(const EvalTargetSet& set) {
  return static_cast<int>(set.targets.size()) * kEvalRowWidth + 3;
}

// High-level policy input: one fixed-width row per potential target (type,
// pool stage, normalized position, area scale, expected action time, current-
// target flag, distance, downstream task count, space-conflict count), rows
// of finished targets zeroed, then the agent's own normalized pose.
inline std::vector<double> assemble_evaluation_obs(const ConstructionState& c,
                                                   const PhysicalState& p, const Scenario& s,
                                                   int agent, const EvalTargetSet& set) {
  std::vector<double> obs;
  obs.reserve(eval_observation_size(set));
  const AgentStatus& st = c.agents[agent];
  const Vec2 pos = p.poses[agent].position;
  const double diag = s.diagonal();
  const double n_tasks = static_cast<double>(s.tasks.size());

  for (const auto& ref : set.targets) {
    double type_code = static_cast<double>(ref.kind) / 6.0;
    double pool_code = 0.0;
    Vec2 target_pos = object_position(s, ref);
    double area_scale = 0.0;
    double action_time = 0.0;
    double successors = 0.0;
    double conflicts = 0.0;
    bool finished = false;

    if (ref.kind == ObjectKind::Component) {
      int task = next_pending_task(c, s, ref.index);
      if (task < 0) {
        finished = true;
      } else {
        pool_code = static_cast<double>(c.pools[task]) / 3.0;
        area_scale = s.tasks[task].area_distance / diag;
        action_time = expected_task_duration(s, task) / set.max_action_time;
        successors = s.tasks[task].transitive_successors / n_tasks;
        conflicts = space_conflicts(c, s, task, true) / n_tasks;
      }
    } else if (ref.kind == ObjectKind::Storage) {
      area_scale = s.storages[ref.index].area_radius() / diag;
    } else {
      area_scale = 1.0 / diag;
    }

    if (finished) {
      for (int k = 0; k < kEvalRowWidth; ++k) obs.push_back(0.0);
      continue;
    }
    obs.push_back(type_code);
    obs.push_back(pool_code);
    obs.push_back(target_pos.x / s.plane_width);
    obs.push_back(target_pos.y / s.plane_height);
    obs.push_back(area_scale);
    obs.push_back(action_time);
    obs.push_back(st.in_scope(ref) ? 1.0 : 0.0);
    obs.push_back(distance(pos, target_pos) / diag);
    obs.push_back(successors);
    obs.push_back(conflicts);
  }

  obs.push_back(pos.x / s.plane_width);
  obs.push_back(pos.y / s.plane_height);
  obs.push_back(p.poses[agent].heading_deg / 360.0);
  return obs;
}

// Centralized critic input: agent poses and modes, pool occupancy, stock
// fractions, episode clock.
inline std::vector<double> global_state_summary(const ConstructionState& c,
                                                const PhysicalState& p, const Scenario& s,
                                                long tick, long max_ticks) {
  std::vector<double> out;
  out.reserve(p.poses.size() * 4 + 4 + c.stocks.size() + 1);
  for (std::size_t i = 0; i < p.poses.size(); ++i) {
    out.push_back(p.poses[i].position.x / s.plane_width);
    out.push_back(p.poses[i].position.y / s.plane_height);
    out.push_back(p.poses[i].heading_deg / 360.0);
    out.push_back(static_cast<double>(c.agents[i].mode) / 4.0);
  }
  double n = std::max<std::size_t>(s.tasks.size(), 1);
  out.push_back(c.pool_count(PoolLabel::Wait) / n);
  out.push_back(c.pool_count(PoolLabel::Queue) / n);
  out.push_back(c.pool_count(PoolLabel::On) / n);
  out.push_back(c.pool_count(PoolLabel::End) / n);
  for (std::size_t i = 0; i < c.stocks.size(); ++i)
    out.push_back(s.storages[i].capacity > 0.0 ? c.stocks[i] / s.storages[i].capacity : 0.0);
  out.push_back(max_ticks > 0 ? static_cast<double>(tick) / max_ticks : 0.0);
  return out;
}

inline int global_state_size(const Scenario& s) {
  return static_cast<int>(s.crews.size()) * 4 + 4 + static_cast<int>(s.storages.size()) + 1;
}

}  // namespace cmdp
