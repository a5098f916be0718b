#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <vector>

#include "cmdp/errors.hpp"
#include "cmdp/knowledge.hpp"
#include "cmdp/perception.hpp"
#include "cmdp/physics.hpp"
#include "cmdp/policy.hpp"
#include "cmdp/rewards.hpp"
#include "cmdp/rng.hpp"
#include "cmdp/scenario.hpp"
#include "cmdp/taskflow.hpp"

namespace cmdp {

struct EnvConfig {
  double dt = 1.0;              // seconds per tick
  long max_ticks = 60000;       // hard episode bound
  int reevaluate_period = 300;  // ticks between forced target revaluations
  StageFlags stage;
  PerceptionConfig perception;
  RewardConfig rewards;
};

inline void validate_env_config(const EnvConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw ValidationError("tick length must be positive");
  if (cfg.max_ticks < 0) throw ValidationError("max_ticks must be non-negative");
  if (cfg.reevaluate_period <= 0) throw ValidationError("reevaluate period must be positive");
  validate_reward_config(cfg.rewards);
}

// Curriculum switch: the first training stage removes everything that delays
// reward (task durations, storage stocks, crane waits).
inline EnvConfig apply_stage1(EnvConfig cfg) {
  cfg.stage = StageFlags{true, true, true};
  return cfg;
}

// How an agent spent one tick; exactly one bucket per live agent per tick.
enum class TickBucket : int { Movement = 0, Tasking = 1, Fetching = 2, Waiting = 3, Idle = 4 };

struct EpisodeStats {
  long movement_steps = 0;
  long tasking_ticks = 0;
  long fetching_ticks = 0;
  long waiting_ticks = 0;
  long idle_precedence_ticks = 0;
  long idle_space_ticks = 0;
  long idle_exhausted_ticks = 0;
  long reaching_steps = 0;  // ticks spent holding a not-yet-reached target
  long live_agent_ticks = 0;

  long idle_ticks() const {
    return idle_precedence_ticks + idle_space_ticks + idle_exhausted_ticks;
  }
  long bucket_sum() const {
    return movement_steps + tasking_ticks + fetching_ticks + waiting_ticks + idle_ticks();
  }

  bool operator==(const EpisodeStats&) const = default;
};

struct Episode {
  long tick = 0;
  ConstructionState construction;
  PhysicalState physical;
  std::vector<double> pending_eval_credit;  // accrued team reward per agent
  std::vector<long> last_eval_tick;
  std::vector<char> scope_valued;  // current scope has been priced
  EpisodeStats stats;
  bool terminated = false;
  std::uint64_t seed = 0;
  Rng rng;

  bool operator==(const Episode&) const = default;
};

// What one agent did during a step.
struct AgentStepRecord {
  RuleCode rule = RuleCode::None;
  int rule_task = -1;
  bool acted = false;    // consumed a reaching action
  bool arrived = false;  // reached a scoped target this tick
  double arrival_value = 0.0;
  ReachReward reach_reward;
  bool eval_consumed = false;         // consumed an evaluation action/valuation
  double eval_credit_released = 0.0;  // reward for the agent's previous evaluation decision
  double eval_final_credit = 0.0;     // terminal payout of the still-open decision
  TickBucket bucket = TickBucket::Idle;
  IdleCause idle_cause = IdleCause::None;  // set when bucket == Idle
};

struct StepResult {
  std::vector<AgentStepRecord> agents;
  EvalReward eval_tick_reward;  // team-shared; includes terminal terms on the last tick
  bool terminated = false;
  std::vector<int> due_reach;  // agents that must supply reaching actions next step
  std::vector<int> due_eval;   // agents whose targets need (re)valuation next step
};

struct StepActions {
  std::map<int, ReachAction> reach;
  std::map<int, std::array<double, 2>> eval;     // policy point in [-1,1]^2
  std::map<int, std::map<ObjectRef, double>> values;  // direct valuation override
};

// The construction process simulator: decision model, valuation gate,
// movement, construction progress, crane service and rewards composed into
// one tick per step() call. Fully deterministic given (scenario, config,
// seed, action sequence).
class Environment {
 public:
  Environment(Scenario scenario, EnvConfig cfg)
      : scenario_(std::move(scenario)), cfg_(cfg), eval_targets_(make_eval_target_set(scenario_)) {
    validate_env_config(cfg_);
  }

  const Scenario& scenario() const { return scenario_; }
  const EnvConfig& config() const { return cfg_; }
  const EvalTargetSet& eval_targets() const { return eval_targets_; }
  const Episode& episode() const { return ep_; }
  Episode& episode() { return ep_; }
  const std::vector<int>& due_reach() const { return due_reach_; }
  const std::vector<int>& due_eval() const { return due_eval_; }

  void reset(std::uint64_t seed) {
    ep_ = Episode{};
    ep_.seed = seed;
    ep_.rng = Rng(seed);
    ep_.construction = ConstructionState::initial(scenario_);
    ep_.physical = PhysicalState::initial(scenario_);
    int n = static_cast<int>(scenario_.crews.size());
    ep_.pending_eval_credit.assign(n, 0.0);
    ep_.last_eval_tick.assign(n, -1);
    ep_.scope_valued.assign(n, 0);
    promote_tasks(ep_.construction, scenario_);
    ep_.terminated = ep_.tick >= cfg_.max_ticks || ep_.construction.all_tasks_done();
    refresh_due();
  }

  // Restores a serialized episode; due lists are recomputed from state.
  void restore(Episode ep) {
    ep_ = std::move(ep);
    refresh_due();
  }

  StepResult step(const StepActions& actions) {
    if (ep_.terminated) throw ContractViolation("step on a terminated episode");
    check_action_keys(actions);

    const int n = static_cast<int>(scenario_.crews.size());
    StepResult out;
    out.agents.resize(n);
    ConstructionState& c = ep_.construction;
    PhysicalState& p = ep_.physical;
    DecisionContext ctx{scenario_, cfg_.stage, cfg_.dt, ep_.tick};

    for (int i = 0; i < n; ++i) {
      AgentStatus& st = c.agents[i];
      if (st.mode == AgentMode::Deregistered) continue;
      AgentStepRecord& rec = out.agents[i];

      if (st.mode == AgentMode::Tasking && st.current_task >= 0)
        st.tick_rate = sample_task_efficiency(scenario_.crews[i], ep_.rng);
      prune_scope(i);

      DecisionOutcome outcome = decide(i, c, p, ctx);
      TransitionEffects fx = apply_transition(i, outcome, c, p, ctx);
      rec.rule = outcome.rule;
      rec.rule_task = outcome.task;
      rec.arrived = !fx.arrival.is_none();
      rec.arrival_value = fx.arrival_value;
      if (outcome.new_scope) ep_.scope_valued[i] = 0;

      bool consumed = false;
      if (auto it = actions.eval.find(i); it != actions.eval.end()) {
        st.target_values = value_scope(it->second, scenario_, st.target_scope);
        consumed = true;
      } else if (auto vt = actions.values.find(i); vt != actions.values.end()) {
        st.target_values.assign(st.target_scope.size(), 0.0);
        for (std::size_t k = 0; k < st.target_scope.size(); ++k)
          if (auto f = vt->second.find(st.target_scope[k]); f != vt->second.end())
            st.target_values[k] = f->second;
        consumed = true;
      }
      if (consumed) {
        rec.eval_consumed = true;
        rec.eval_credit_released = ep_.pending_eval_credit[i];
        ep_.pending_eval_credit[i] = 0.0;
        ep_.last_eval_tick[i] = ep_.tick;
        ep_.scope_valued[i] = 1;
      }

      MoveEvents events;
      if (st.mode == AgentMode::TargetReaching) {
        MotionCommand cmd;
        if (auto it = actions.reach.find(i); it != actions.reach.end()) {
          cmd = action_to_command(it->second, scenario_.crews[i]);
          rec.acted = true;
        }
        events = step_movement(p, scenario_, i, cmd, cfg_.dt, st.load > 0.0, st.current_task,
                               st.paused_task);
      }
      bool holding = st.mode == AgentMode::TargetReaching && !st.target_scope.empty();
      rec.reach_reward =
          reaching_reward(events, rec.arrived, fx.arrival_value, holding, cfg_.rewards);
      if (rec.acted && holding) ++ep_.stats.reaching_steps;
    }

    serve_crane(c, scenario_, ep_.tick);
    promote_tasks(c, scenario_);

    // Attribution and bookkeeping from the post-transition state.
    for (int i = 0; i < n; ++i) {
      const AgentStatus& st = c.agents[i];
      AgentStepRecord& rec = out.agents[i];
      bool was_live = st.mode != AgentMode::Deregistered || rec.rule != RuleCode::None;
      if (!was_live) continue;
      ++ep_.stats.live_agent_ticks;
      rec.bucket = classify_bucket(rec.rule, st, i);
      switch (rec.bucket) {
        case TickBucket::Movement: ++ep_.stats.movement_steps; break;
        case TickBucket::Tasking: ++ep_.stats.tasking_ticks; break;
        case TickBucket::Fetching: ++ep_.stats.fetching_ticks; break;
        case TickBucket::Waiting: ++ep_.stats.waiting_ticks; break;
        case TickBucket::Idle:
          rec.idle_cause = classify_idle_cause(c, scenario_, i);
          switch (rec.idle_cause) {
            case IdleCause::Space: ++ep_.stats.idle_space_ticks; break;
            case IdleCause::Precedence: ++ep_.stats.idle_precedence_ticks; break;
            default: ++ep_.stats.idle_exhausted_ticks; break;
          }
          break;
      }
    }

    ++ep_.tick;
    bool no_live_agents = true;
    for (const auto& st : c.agents)
      if (st.mode != AgentMode::Deregistered) no_live_agents = false;
    ep_.terminated = c.all_tasks_done() || ep_.tick >= cfg_.max_ticks || no_live_agents;

    out.eval_tick_reward = evaluation_reward(count_idle(c, scenario_), cfg_.rewards);
    if (ep_.terminated) {
      EvalReward terminal =
          terminal_evaluation_terms(ep_.tick, ep_.stats.movement_steps, cfg_.rewards);
      out.eval_tick_reward.episode_term = terminal.episode_term;
      out.eval_tick_reward.path_term = terminal.path_term;
    }
    double r_e = out.eval_tick_reward.total();
    for (int i = 0; i < n; ++i) ep_.pending_eval_credit[i] += r_e;
    if (ep_.terminated) {
      for (int i = 0; i < n; ++i) {
        out.agents[i].eval_final_credit = ep_.pending_eval_credit[i];
        ep_.pending_eval_credit[i] = 0.0;
      }
    }

    out.terminated = ep_.terminated;
    refresh_due();
    out.due_reach = due_reach_;
    out.due_eval = due_eval_;
    return out;
  }

  // Observations reflect the state after the most recent step.
  std::vector<double> reach_observation(int agent) const {
    const AgentStatus& st = ep_.construction.agents[agent];
    auto hits = cast_rays(ep_.physical, scenario_, agent, cfg_.perception, {});
    hits = modify_observation(std::move(hits), st.target_scope, st.target_values);
    return assemble_reaching_obs(hits, ep_.physical.poses[agent].velocity,
                                 scenario_.crews[agent]);
  }

  std::vector<double> eval_observation(int agent) const {
    return assemble_evaluation_obs(ep_.construction, ep_.physical, scenario_, agent,
                                   eval_targets_);
  }

  std::vector<double> global_state() const {
    return global_state_summary(ep_.construction, ep_.physical, scenario_, ep_.tick,
                                cfg_.max_ticks);
  }

 private:
  void check_action_keys(const StepActions& actions) const {
    for (const auto& [agent, _] : actions.reach)
      if (!contains(due_reach_, agent))
        throw ContractViolation("reaching action for an agent not due to act");
    for (const auto& [agent, _] : actions.eval) {
      if (!contains(due_eval_, agent))
        throw ContractViolation("evaluation action for an agent not due for one");
      if (actions.values.count(agent))
        throw ContractViolation("both evaluation action and value override for one agent");
    }
    for (const auto& [agent, _] : actions.values)
      if (!contains(due_eval_, agent))
        throw ContractViolation("value override for an agent not due for one");
  }

  static bool contains(const std::vector<int>& v, int x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  }

  // Drops scope entries that no longer lead anywhere: finished components and
  // components whose matching tasks were claimed by someone else. Storage and
  // outlet entries stay.
  void prune_scope(int agent) {
    AgentStatus& st = ep_.construction.agents[agent];
    if (st.mode != AgentMode::TargetReaching || st.target_scope.empty()) return;
    CrewType crew = scenario_.crews[agent].crew;
    std::vector<ObjectRef> scope;
    std::vector<double> values;
    for (std::size_t k = 0; k < st.target_scope.size(); ++k) {
      const ObjectRef& ref = st.target_scope[k];
      if (ref.kind == ObjectKind::Component) {
        bool paused_here = st.paused_task >= 0 &&
                           scenario_.tasks[st.paused_task].component == ref.index;
        if (!paused_here &&
            executable_task_of_type(ep_.construction, scenario_, ref.index, crew) < 0)
          continue;
      }
      scope.push_back(ref);
      values.push_back(k < st.target_values.size() ? st.target_values[k] : 0.0);
    }
    if (scope.size() != st.target_scope.size()) {
      st.target_scope = std::move(scope);
      st.target_values = std::move(values);
    }
  }

  TickBucket classify_bucket(RuleCode rule, const AgentStatus& st, int agent) const {
    switch (rule) {
      case RuleCode::ExecuteTask:
      case RuleCode::CompleteTask:
      case RuleCode::InitiateTask: return TickBucket::Tasking;
      case RuleCode::FetchMaterials:
      case RuleCode::FetchingCompleted: return TickBucket::Fetching;
      case RuleCode::RequestCraneTask:
      case RuleCode::RequestCraneMaterial: return TickBucket::Waiting;
      default: break;
    }
    switch (st.mode) {
      case AgentMode::Tasking: return TickBucket::Tasking;
      case AgentMode::Fetching: return TickBucket::Fetching;
      case AgentMode::Waiting: return TickBucket::Waiting;
      case AgentMode::Deregistered: return TickBucket::Movement;  // walked off via the outlet
      case AgentMode::TargetReaching:
        return classify_idle_cause(ep_.construction, scenario_, agent) == IdleCause::None
                   ? TickBucket::Movement
                   : TickBucket::Idle;
    }
    return TickBucket::Idle;
  }

  void refresh_due() {
    due_reach_.clear();
    due_eval_.clear();
    if (ep_.terminated) return;
    const int n = static_cast<int>(scenario_.crews.size());
    for (int i = 0; i < n; ++i) {
      const AgentStatus& st = ep_.construction.agents[i];
      if (st.mode != AgentMode::TargetReaching) continue;
      due_reach_.push_back(i);
      if (st.target_scope.empty()) continue;
      bool stale = ep_.last_eval_tick[i] < 0 ||
                   ep_.tick - ep_.last_eval_tick[i] >= cfg_.reevaluate_period;
      if (!ep_.scope_valued[i] || stale) due_eval_.push_back(i);
    }
  }

  Scenario scenario_;
  EnvConfig cfg_;
  EvalTargetSet eval_targets_;
  Episode ep_;
  std::vector<int> due_reach_;
  std::vector<int> due_eval_;
};

}  // namespace cmdp
