#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cmdp/errors.hpp"
#include "cmdp/geometry.hpp"
#include "cmdp/rng.hpp"
#include "cmdp/scenario.hpp"
#include "cmdp/taskflow.hpp"

namespace cmdp {

// Circular slow-down zone. Task areas come and go with task execution;
// storage areas are permanent and their index follows the stock level.
struct CongestionArea {
  Vec2 center;
  double radius = 1.0;
  double index = 1.0;  // (0, 1], multiplies agent velocity inside
  ObjectKind source = ObjectKind::TaskArea;
  int owner = -1;  // task index or storage index

  bool contains(const Vec2& p) const { return (p - center).norm() <= radius; }

  bool operator==(const CongestionArea&) const = default;
};

struct AgentPose {
  Vec2 position;
  double heading_deg = 0.0;
  Vec2 velocity;  // realized, m/s, from the last movement step

  bool operator==(const AgentPose&) const = default;
};

struct PhysicalState {
  Rect bounds;
  std::vector<AgentPose> poses;
  std::vector<CongestionArea> areas;

  static PhysicalState initial(const Scenario& s) {
    PhysicalState p;
    p.bounds = s.bounds();
    p.poses.resize(s.crews.size());
    for (std::size_t i = 0; i < s.crews.size(); ++i) {
      p.poses[i].position = s.crews[i].spawn;
      p.poses[i].heading_deg = 90.0;  // facing into the plane from the south edge
    }
    for (int i = 0; i < static_cast<int>(s.storages.size()); ++i) {
      CongestionArea a;
      a.center = s.storages[i].position();
      a.radius = s.storages[i].area_radius();
      a.index = storage_congestion_index(s.storages[i], s.storages[i].initial_stock);
      a.source = ObjectKind::Storage;
      a.owner = i;
      p.areas.push_back(a);
    }
    return p;
  }

  // Fuller storage is tidier to move through: affine in the stock fraction
  // with a floor of one half.
  static double storage_congestion_index(const StorageSpec& st, double stock) {
    double frac = st.capacity > 0.0 ? std::clamp(stock / st.capacity, 0.0, 1.0) : 1.0;
    return 0.5 + 0.5 * frac;
  }

  int area_of_task(int task) const {
    for (std::size_t i = 0; i < areas.size(); ++i)
      if (areas[i].source == ObjectKind::TaskArea && areas[i].owner == task)
        return static_cast<int>(i);
    return -1;
  }

  void register_task_area(const Scenario& s, int task) {
    if (area_of_task(task) >= 0)
      throw ContractViolation("task area already registered: " + s.tasks[task].id);
    CongestionArea a;
    a.center = s.components[s.tasks[task].component].position();
    a.radius = s.tasks[task].area_distance;
    a.index = s.tasks[task].congestion_index;
    a.source = ObjectKind::TaskArea;
    a.owner = task;
    areas.push_back(a);
  }

  void deregister_task_area(const Scenario& s, int task) {
    int i = area_of_task(task);
    if (i < 0) throw ContractViolation("task area not registered: " + s.tasks[task].id);
    areas.erase(areas.begin() + i);
  }

  void update_storage_index(const Scenario& s, int storage, double stock) {
    for (auto& a : areas)
      if (a.source == ObjectKind::Storage && a.owner == storage)
        a.index = storage_congestion_index(s.storages[storage], stock);
  }

  bool operator==(const PhysicalState&) const = default;
};

// Velocity cap inside congestion: v = max(c * I * v_nominal, v_min), with the
// carry factor c applied only while loaded.
inline double max_velocity(double v_nominal, bool carrying, double carry_factor,
                           double congestion_index, double v_min) {
  double c = carrying ? carry_factor : 1.0;
  return std::max(c * congestion_index * v_nominal, v_min);
}

// Work rate with n other agents invading the same area: e * (1 - n * I),
// never negative.
inline double effective_efficiency(double rate, int invaders, double inefficiency_index) {
  return std::max(0.0, rate * (1.0 - static_cast<double>(invaders) * inefficiency_index));
}

// Overlapping areas combine pessimistically: the smallest index wins.
inline double congestion_index_at(const PhysicalState& p, const Vec2& pos) {
  double index = 1.0;
  for (const auto& a : p.areas)
    if (a.contains(pos)) index = std::min(index, a.index);
  return index;
}

inline int invaders_in_area(const PhysicalState& p, const CongestionArea& area, int self) {
  int n = 0;
  for (std::size_t i = 0; i < p.poses.size(); ++i)
    if (static_cast<int>(i) != self && area.contains(p.poses[i].position)) ++n;
  return n;
}

// Per-tick work rate draw, truncated to [0.1, 2] times the mean so a single
// sample can neither stall nor teleport the task.
inline double sample_task_efficiency(const AgentSpec& spec, Rng& rng) {
  double lo = 0.1 * spec.efficiency_mean;
  double hi = 2.0 * spec.efficiency_mean;
  double v = rng.normal(spec.efficiency_mean, spec.efficiency_std);
  return std::clamp(v, lo, hi);
}

struct MotionCommand {
  double forward = 0.0;   // m/s along heading, never negative
  double lateral = 0.0;   // m/s, positive to the agent's left
  double turn = 0.0;      // deg/s, positive counter-clockwise
};

struct MoveEvents {
  int wall = 0;
  int agents = 0;
  int task_areas = 0;     // foreign task areas entered this step
  int storage_areas = 0;  // storage areas entered this step
};

namespace detail {

inline std::vector<int> containing_areas(const PhysicalState& p, const Vec2& pos) {
  std::vector<int> out;
  for (std::size_t i = 0; i < p.areas.size(); ++i)
    if (p.areas[i].contains(pos)) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace detail

// Integrates one movement tick: turn first, then advance along the new
// heading with both translational axes capped by the congestion law.
// Collisions resolve by positional projection against other agent bodies and
// the plane walls; if projection cannot find a clear pose the agent stays
// put. `own_task` and `paused_task` areas do not count as intrusions.
inline MoveEvents step_movement(PhysicalState& p, const Scenario& s, int agent,
                                const MotionCommand& cmd, double dt, bool carrying,
                                int own_task = -1, int paused_task = -1) {
  if (agent < 0 || agent >= static_cast<int>(p.poses.size()))
    throw ContractViolation("step_movement: bad agent index");
  const AgentSpec& spec = s.crews[agent];
  AgentPose& pose = p.poses[agent];
  MoveEvents events;

  pose.heading_deg = wrap_degrees(pose.heading_deg + cmd.turn * dt);

  double index = congestion_index_at(p, pose.position);
  double cap_f = max_velocity(spec.v_forward, carrying, spec.carry_factor, index, spec.v_min);
  double cap_l = max_velocity(spec.v_lateral, carrying, spec.carry_factor, index, spec.v_min);
  double forward = std::clamp(cmd.forward, 0.0, cap_f);
  double lateral = std::copysign(std::min(std::abs(cmd.lateral), cap_l), cmd.lateral);

  Vec2 ahead = heading_vector(pose.heading_deg);
  Vec2 left{-ahead.y, ahead.x};
  Vec2 old_pos = pose.position;
  auto before = detail::containing_areas(p, old_pos);
  Vec2 next = old_pos + ahead * (forward * dt) + left * (lateral * dt);

  const double r = spec.radius();
  bool resolved = true;
  for (int pass = 0; pass < 16; ++pass) {
    bool moved = false;
    for (std::size_t j = 0; j < p.poses.size(); ++j) {
      if (static_cast<int>(j) == agent) continue;
      Vec2 d = next - p.poses[j].position;
      double min_dist = r + s.crews[j].radius();
      double dist = d.norm();
      if (dist < min_dist - 1e-12) {
        events.agents = 1;
        Vec2 dir = dist > 1e-9 ? d * (1.0 / dist) : Vec2{1.0, 0.0};
        next = p.poses[j].position + dir * min_dist;
        moved = true;
      }
    }
    double cx = std::clamp(next.x, p.bounds.min.x + r, p.bounds.max.x - r);
    double cy = std::clamp(next.y, p.bounds.min.y + r, p.bounds.max.y - r);
    if (cx != next.x || cy != next.y) {
      events.wall = 1;
      next = {cx, cy};
      moved = true;
    }
    if (!moved) break;
    if (pass == 15) resolved = false;
  }
  if (!resolved) {
    for (std::size_t j = 0; j < p.poses.size(); ++j) {
      if (static_cast<int>(j) == agent) continue;
      if (circles_overlap(next, r - 1e-9, p.poses[j].position, s.crews[j].radius()))
        next = old_pos;  // keep the previous, known-good pose
    }
  }

  pose.velocity = (next - old_pos) * (1.0 / dt);
  pose.position = next;

  auto after = detail::containing_areas(p, next);
  for (int idx : after) {
    if (std::find(before.begin(), before.end(), idx) != before.end()) continue;
    const CongestionArea& a = p.areas[idx];
    if (a.source == ObjectKind::Storage) {
      ++events.storage_areas;
    } else if (a.owner != own_task && a.owner != paused_task) {
      ++events.task_areas;
    }
  }
  return events;
}

}  // namespace cmdp
