#pragma once

#include <algorithm>

#include "cmdp/errors.hpp"
#include "cmdp/knowledge.hpp"
#include "cmdp/physics.hpp"
#include "cmdp/taskflow.hpp"

namespace cmdp {

struct RewardConfig {
  // Per-tick evaluation terms (per idle agent / per tick).
  double w_idle_precedence = 0.01;
  double w_idle_area = 0.01;
  double w_efficiency = 0.002;
  // Terminal evaluation terms, normalized so a reference-length episode
  // contributes O(1).
  double w_episode = 1.0;
  double w_path = 1.0;
  double episode_ref_ticks = 10000.0;
  double path_ref_steps = 10000.0;
  // Reaching terms.
  double collision_base = 1.0;
  double eta_agents = 0.5;    // collision index for agents and task areas
  double eta_passable = 0.05; // walls and storage areas: soft enough to pass
  double k_reach = 2.0;
  double r_time = 0.005;
  double gamma = 0.99;
};

inline void validate_reward_config(const RewardConfig& cfg) {
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw ValidationError("discount must be in (0,1)");
  if (!(cfg.eta_agents > cfg.eta_passable && cfg.eta_passable > 0.0))
    throw ValidationError("collision indices must satisfy eta_agents > eta_passable > 0");
  if (!(cfg.k_reach > 0.0)) throw ValidationError("reach scale must be positive");
}

struct IdleCounts {
  int precedence = 0;
  int space = 0;
  int exhausted = 0;
  int active_agents = 0;  // not yet deregistered

  int idle_total() const { return precedence + space + exhausted; }
};

inline IdleCounts count_idle(const ConstructionState& c, const Scenario& s) {
  IdleCounts out;
  for (std::size_t i = 0; i < c.agents.size(); ++i) {
    if (c.agents[i].mode == AgentMode::Deregistered) continue;
    ++out.active_agents;
    switch (classify_idle_cause(c, s, static_cast<int>(i))) {
      case IdleCause::Precedence: ++out.precedence; break;
      case IdleCause::Space: ++out.space; break;
      case IdleCause::Exhausted: ++out.exhausted; break;
      case IdleCause::None: break;
    }
  }
  return out;
}

struct EvalReward {
  double idle_precedence = 0.0;
  double idle_area = 0.0;
  double efficiency = 0.0;
  double episode_term = 0.0;
  double path_term = 0.0;

  double total() const {
    return idle_precedence + idle_area + efficiency + episode_term + path_term;
  }
};

// Per-tick team reward for the evaluation policy: idling penalties broken out
// by cause plus an efficiency bonus proportional to the busy fraction.
inline EvalReward evaluation_reward(const IdleCounts& idle, const RewardConfig& cfg) {
  EvalReward r;
  r.idle_precedence = -cfg.w_idle_precedence * idle.precedence;
  r.idle_area = -cfg.w_idle_area * idle.space;
  if (idle.active_agents > 0)
    r.efficiency =
        cfg.w_efficiency * (1.0 - static_cast<double>(idle.idle_total()) / idle.active_agents);
  return r;
}

// End-of-episode terms: shorter schedules and shorter travel are better.
inline EvalReward terminal_evaluation_terms(long ticks, long movement_steps,
                                            const RewardConfig& cfg) {
  EvalReward r;
  if (cfg.episode_ref_ticks > 0.0) r.episode_term = -cfg.w_episode * ticks / cfg.episode_ref_ticks;
  if (cfg.path_ref_steps > 0.0) r.path_term = -cfg.w_path * movement_steps / cfg.path_ref_steps;
  return r;
}

struct ReachReward {
  double collision = 0.0;
  double reach = 0.0;
  double time = 0.0;

  double total() const { return collision + reach + time; }
};

// Per-tick reward for the reaching policy of one agent. Hard contacts (other
// agents, foreign task areas) hurt more than soft ones (walls, storage areas,
// which agents are allowed to push through). Arrival pays out the priority
// value the agent was chasing, scaled by k.
inline ReachReward reaching_reward(const MoveEvents& events, bool arrived, double arrival_value,
                                   bool holding_target, const RewardConfig& cfg) {
  ReachReward r;
  int hard = events.agents + events.task_areas;
  int soft = events.wall + events.storage_areas;
  r.collision = -cfg.collision_base * (cfg.eta_agents * hard + cfg.eta_passable * soft);
  if (arrived) r.reach = cfg.k_reach * arrival_value;
  if (holding_target) r.time = -cfg.r_time;
  return r;
}

}  // namespace cmdp
