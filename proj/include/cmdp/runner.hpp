#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "cmdp/environment.hpp"
#include "cmdp/policy.hpp"
#include "cmdp/rng.hpp"

namespace cmdp {

// Pluggable per-agent deciders for running episodes outside training.
// A valuer prices the agent's current targets (exactly one of the two forms);
// a controller picks the movement action.
struct Drivers {
  std::function<std::array<double, 2>(const Environment&, int)> eval_point;
  std::function<std::map<ObjectRef, double>(const Environment&, int)> eval_values;
  std::function<ReachAction(const Environment&, int)> controller;
};

struct RunOutcome {
  long ticks = 0;
  bool completed = false;  // every task reached the end pool
  int tasks_completed = 0;
  EpisodeStats stats;
  double eval_return = 0.0;   // undiscounted sum of team evaluation rewards
  double reach_return = 0.0;  // undiscounted sum over agents of reaching rewards
  long arrivals = 0;

  double mean_steps_to_target() const {
    return static_cast<double>(stats.reaching_steps) / std::max<long>(arrivals, 1);
  }
};

using StepHook =
    std::function<void(const Environment&, const StepActions&, const StepResult&)>;

inline RunOutcome run_episode(Environment& env, std::uint64_t seed, const Drivers& drivers,
                              const StepHook& on_step = {}) {
  if (!drivers.controller) throw ContractViolation("episode driver needs a controller");
  if (drivers.eval_point && drivers.eval_values)
    throw ContractViolation("episode driver needs at most one valuation form");
  env.reset(seed);
  RunOutcome out;
  while (!env.episode().terminated) {
    StepActions actions;
    for (int agent : env.due_eval()) {
      if (drivers.eval_point)
        actions.eval[agent] = drivers.eval_point(env, agent);
      else if (drivers.eval_values)
        actions.values[agent] = drivers.eval_values(env, agent);
    }
    for (int agent : env.due_reach()) actions.reach[agent] = drivers.controller(env, agent);
    StepResult res = env.step(actions);
    out.eval_return += res.eval_tick_reward.total();
    for (const auto& rec : res.agents) {
      out.reach_return += rec.reach_reward.total();
      if (rec.arrived) ++out.arrivals;
    }
    if (on_step) on_step(env, actions, res);
  }
  const Episode& ep = env.episode();
  out.ticks = ep.tick;
  out.completed = ep.construction.all_tasks_done();
  out.tasks_completed = ep.construction.pool_count(PoolLabel::End);
  out.stats = ep.stats;
  return out;
}

// Deterministic rule-based movement: turn toward the highest-valued target,
// walk when roughly facing it. Stand still without targets.
inline std::function<ReachAction(const Environment&, int)> make_scripted_controller() {
  return [](const Environment& env, int agent) {
    const AgentStatus& st = env.episode().construction.agents[agent];
    ReachAction a{0, 1, 1};
    if (st.target_scope.empty()) return a;
    std::size_t best = 0;
    for (std::size_t k = 1; k < st.target_scope.size(); ++k)
      if (st.value_for(st.target_scope[k]) > st.value_for(st.target_scope[best])) best = k;
    const AgentPose& pose = env.episode().physical.poses[agent];
    Vec2 delta = object_position(env.scenario(), st.target_scope[best]) - pose.position;
    if (delta.norm() < 1e-9) return a;
    double bearing = rad_to_deg(std::atan2(delta.y, delta.x));
    double err = angle_difference(bearing, pose.heading_deg);
    double turn_step = env.scenario().crews[agent].v_turn * env.config().dt;
    if (std::abs(err) > 0.5 * turn_step) a.turn = err > 0.0 ? 2 : 0;
    if (std::abs(err) <= 30.0)
      a.forward = 3;
    else if (std::abs(err) <= 75.0)
      a.forward = 2;
    return a;
  };
}

inline std::function<ReachAction(const Environment&, int)> make_random_controller(Rng& rng) {
  return [&rng](const Environment&, int) {
    return ReachAction{rng.uniform_int(4), rng.uniform_int(3), rng.uniform_int(3)};
  };
}

inline std::function<ReachAction(const Environment&, int)> make_policy_controller(
    const ReachingActor& actor, bool deterministic, Rng& rng) {
  return [&actor, deterministic, &rng](const Environment& env, int agent) {
    std::vector<double> obs = env.reach_observation(agent);
    return deterministic ? mode_reaching(actor, obs).action
                         : sample_reaching(actor, obs, rng).action;
  };
}

inline std::function<std::array<double, 2>(const Environment&, int)> make_policy_valuer(
    const GaussianActor& actor, bool deterministic, Rng& rng) {
  return [&actor, deterministic, &rng](const Environment& env, int agent) {
    std::vector<double> obs = env.eval_observation(agent);
    return deterministic ? mean_gaussian(actor, obs).action
                         : sample_gaussian(actor, obs, rng).action;
  };
}

}  // namespace cmdp
