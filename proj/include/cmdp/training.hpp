#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "cmdp/environment.hpp"
#include "cmdp/errors.hpp"
#include "cmdp/net.hpp"
#include "cmdp/policy.hpp"
#include "cmdp/rng.hpp"
#include "cmdp/runner.hpp"

namespace cmdp {

struct TrainConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double learning_rate = 3e-4;
  int minibatch = 256;
  int epochs = 4;
  int rollout_ticks = 512;  // env ticks collected per environment per update
  int n_envs = 4;
  long stage1_steps = 100000;  // env ticks (summed over envs) spent in stage 1
  long total_steps = 200000;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  bool normalize_advantages = true;
  int hidden = 64;
  std::uint64_t seed = 1;
  EnvConfig env;

  bool operator==(const TrainConfig&) const = default;
};

inline void validate_train_config(const TrainConfig& cfg) {
  if (!(cfg.clip > 0.0)) throw ValidationError("clip range must be positive");
  if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0)) throw ValidationError("gamma must be in (0,1]");
  if (!(cfg.gae_lambda >= 0.0 && cfg.gae_lambda <= 1.0))
    throw ValidationError("gae lambda must be in [0,1]");
  if (cfg.minibatch < 1 || cfg.epochs < 1) throw ValidationError("batch settings must be positive");
  if (cfg.rollout_ticks < 0 || cfg.n_envs < 1) throw ValidationError("rollout shape invalid");
  if (cfg.stage1_steps < 0 || cfg.total_steps < 0) throw ValidationError("budgets must be >= 0");
  if (cfg.hidden < 1) throw ValidationError("hidden width must be positive");
  validate_env_config(cfg.env);
}

// ----- advantage estimation ---------------------------------------------------

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Generalized advantage estimation over one stream. `last_value` bootstraps
// past the final entry when the stream did not end an episode there.
inline GaeResult compute_gae(const std::vector<double>& rewards,
                             const std::vector<double>& values, const std::vector<char>& dones,
                             double gamma, double lambda, double last_value = 0.0) {
  if (rewards.size() != values.size() || rewards.size() != dones.size())
    throw ContractViolation("advantage inputs are misaligned");
  const int n = static_cast<int>(rewards.size());
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double adv = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    double not_done = dones[t] ? 0.0 : 1.0;
    double next_value = t + 1 < n ? values[t + 1] : last_value;
    double delta = rewards[t] + gamma * next_value * not_done - values[t];
    adv = delta + gamma * lambda * not_done * adv;
    out.advantages[t] = adv;
    out.returns[t] = adv + values[t];
  }
  return out;
}

// ----- rollout storage ---------------------------------------------------------

struct EvalStep {
  std::vector<double> obs;    // actor input
  std::vector<double> state;  // critic input
  std::array<double, 2> action{};
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;  // credit accumulated until the next decision
  char done = 0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct ReachStep {
  std::vector<double> obs;
  std::vector<double> state;
  ReachAction action;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  char done = 0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct RolloutBuffer {
  std::vector<EvalStep> eval;
  std::vector<ReachStep> reach;
  long env_ticks = 0;
  double reach_reward_sum = 0.0;  // over collected reach samples
  double eval_reward_sum = 0.0;   // over closed eval samples
  long episodes_finished = 0;
  double finished_ticks_sum = 0.0;
};

// ----- trainer state ------------------------------------------------------------

struct TrainerState {
  PolicyBundle bundle;
  AdamState opt_eval_actor;
  AdamState opt_eval_log_std;
  AdamState opt_reach_actor;
  AdamState opt_eval_critic;
  AdamState opt_reach_critic;
  long steps_done = 0;
  int stage = 1;
  long updates_done = 0;

  bool operator==(const TrainerState&) const = default;
};

inline TrainerState make_trainer_state(const Scenario& s, const TrainConfig& cfg, Rng& rng) {
  TrainerState ts;
  EvalTargetSet targets = make_eval_target_set(s);
  int eval_obs = eval_observation_size(targets);
  int reach_obs = reach_observation_size(cfg.env.perception);
  int global = global_state_size(s);
  ts.bundle = make_policy_bundle(eval_obs, reach_obs, global, cfg.hidden, rng);
  ts.opt_eval_actor = AdamState(ts.bundle.eval_actor.net.params().size());
  ts.opt_eval_log_std = AdamState(ts.bundle.eval_actor.log_std.size());
  ts.opt_reach_actor = AdamState(ts.bundle.reach_actor.net.params().size());
  ts.opt_eval_critic = AdamState(ts.bundle.eval_critic.params().size());
  ts.opt_reach_critic = AdamState(ts.bundle.reach_critic.params().size());
  return ts;
}

// ----- rollout collection --------------------------------------------------------

namespace detail {

struct PendingEval {
  bool open = false;
  EvalStep sample;
};

struct StreamsGae {
  template <typename Sample>
  static void finalize(std::vector<Sample>& stream, double gamma, double lambda,
                       double last_value, std::vector<Sample>& out) {
    if (stream.empty()) return;
    std::vector<double> rewards, values;
    std::vector<char> dones;
    for (const auto& s : stream) {
      rewards.push_back(s.reward);
      values.push_back(s.value);
      dones.push_back(s.done);
    }
    if (dones.back()) last_value = 0.0;
    GaeResult g = compute_gae(rewards, values, dones, gamma, lambda, last_value);
    for (std::size_t i = 0; i < stream.size(); ++i) {
      stream[i].advantage = g.advantages[i];
      stream[i].ret = g.returns[i];
      out.push_back(std::move(stream[i]));
    }
    stream.clear();
  }
};

inline double critic_value(const Mlp& critic, const std::vector<double>& state) {
  return critic.forward(state)[0];
}

}  // namespace detail

// A persistent pool of environments stepped in lockstep by the current
// policy; episodes reset automatically with derived seeds as they end.
class EnvPool {
 public:
  EnvPool(const Scenario& scenario, const EnvConfig& cfg, int n_envs, std::uint64_t seed)
      : seed_(seed) {
    for (int e = 0; e < n_envs; ++e) {
      envs_.emplace_back(scenario, cfg);
      envs_[e].reset(Rng::derive_seed(seed, static_cast<std::uint64_t>(e)));
    }
  }

  std::vector<Environment>& envs() { return envs_; }

  // Steps every environment `ticks` times with actions sampled from the
  // bundle, recording experience for both policy levels.
  RolloutBuffer collect(const PolicyBundle& bundle, int ticks, double gamma, double lambda,
                        Rng& rng, bool collect_eval = true) {
    RolloutBuffer buf;
    const int n_envs = static_cast<int>(envs_.size());
    const int n_agents = static_cast<int>(envs_.front().scenario().crews.size());

    std::vector<std::vector<std::vector<ReachStep>>> reach_streams(n_envs);
    std::vector<std::vector<detail::PendingEval>> pending(n_envs);
    std::vector<std::vector<std::vector<EvalStep>>> eval_streams(n_envs);
    for (int e = 0; e < n_envs; ++e) {
      reach_streams[e].resize(n_agents);
      pending[e].resize(n_agents);
      eval_streams[e].resize(n_agents);
    }

    for (int t = 0; t < ticks; ++t) {
      for (int e = 0; e < n_envs; ++e) {
        Environment& env = envs_[e];
        std::vector<double> gs = env.global_state();
        StepActions actions;
        std::vector<detail::PendingEval> fresh(n_agents);

        for (int agent : env.due_eval()) {
          std::vector<double> obs = env.eval_observation(agent);
          GaussianSample s = sample_gaussian(bundle.eval_actor, obs, rng);
          actions.eval[agent] = s.action;
          if (collect_eval) {
            EvalStep& es = fresh[agent].sample;
            es.obs = std::move(obs);
            es.state = gs;
            es.action = s.action;
            es.log_prob = s.log_prob;
            es.value = detail::critic_value(bundle.eval_critic, gs);
            fresh[agent].open = true;
          }
        }
        std::vector<int> reach_agents = env.due_reach();
        for (int agent : reach_agents) {
          ReachStep rs;
          rs.obs = env.reach_observation(agent);
          rs.state = gs;
          auto sample = sample_reaching(bundle.reach_actor, rs.obs, rng);
          rs.action = sample.action;
          rs.log_prob = sample.log_prob;
          rs.value = detail::critic_value(bundle.reach_critic, rs.state);
          actions.reach[agent] = sample.action;
          reach_streams[e][agent].push_back(std::move(rs));
        }

        StepResult res = env.step(actions);
        ++buf.env_ticks;

        for (int agent : reach_agents) {
          ReachStep& rs = reach_streams[e][agent].back();
          rs.reward = res.agents[agent].reach_reward.total();
          bool deregistered = env.episode().construction.agents[agent].mode ==
                              AgentMode::Deregistered;
          rs.done = (res.terminated || deregistered) ? 1 : 0;
          buf.reach_reward_sum += rs.reward;
        }
        if (collect_eval) {
          for (int agent = 0; agent < n_agents; ++agent) {
            const AgentStepRecord& rec = res.agents[agent];
            if (rec.eval_consumed) {
              if (pending[e][agent].open) {
                EvalStep closed = std::move(pending[e][agent].sample);
                closed.reward = rec.eval_credit_released;
                closed.done = 0;
                buf.eval_reward_sum += closed.reward;
                eval_streams[e][agent].push_back(std::move(closed));
              }
              pending[e][agent] = std::move(fresh[agent]);
            }
            if (res.terminated && pending[e][agent].open) {
              EvalStep closed = std::move(pending[e][agent].sample);
              closed.reward = rec.eval_final_credit;
              closed.done = 1;
              buf.eval_reward_sum += closed.reward;
              eval_streams[e][agent].push_back(std::move(closed));
              pending[e][agent] = detail::PendingEval{};
            }
          }
        }
        if (res.terminated) {
          ++buf.episodes_finished;
          buf.finished_ticks_sum += static_cast<double>(env.episode().tick);
          env.reset(Rng::derive_seed(seed_, 7777 + (++reset_counter_)));
        }
      }
    }

    for (int e = 0; e < n_envs; ++e) {
      std::vector<double> gs = envs_[e].global_state();
      for (int agent = 0; agent < n_agents; ++agent) {
        double boot_r = detail::critic_value(bundle.reach_critic, gs);
        detail::StreamsGae::finalize(reach_streams[e][agent], gamma, lambda, boot_r, buf.reach);
        double boot_e = detail::critic_value(bundle.eval_critic, gs);
        detail::StreamsGae::finalize(eval_streams[e][agent], gamma, lambda, boot_e, buf.eval);
      }
    }
    return buf;
  }

 private:
  std::vector<Environment> envs_;
  std::uint64_t seed_;
  long reset_counter_ = 0;
};

// ----- optimization ---------------------------------------------------------------

struct PpoDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  int samples = 0;
};

namespace detail {

inline void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DivergenceError(std::string("non-finite ") + what);
}

inline void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
}

inline void normalize(std::vector<double>& adv) {
  if (adv.size() < 2) return;
  double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / adv.size();
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  double sd = std::sqrt(var / adv.size());
  if (sd < 1e-8) sd = 1e-8;
  for (double& a : adv) a = (a - mean) / sd;
}

// Surrogate gradient gate: the clipped objective has zero actor gradient when
// the min() picks the clipped branch.
inline bool clip_active(double ratio, double adv, double clip) {
  return adv >= 0.0 ? ratio > 1.0 + clip : ratio < 1.0 - clip;
}

}  // namespace detail

// One PPO update of the reaching actor + critic over the whole buffer.
inline PpoDiagnostics update_reaching(TrainerState& ts, const RolloutBuffer& buf,
                                      const TrainConfig& cfg, Rng& rng) {
  PpoDiagnostics diag;
  const int n = static_cast<int>(buf.reach.size());
  if (n == 0) return diag;
  std::vector<double> adv(n);
  for (int i = 0; i < n; ++i) adv[i] = buf.reach[i].advantage;
  if (cfg.normalize_advantages) detail::normalize(adv);

  AdamConfig opt{cfg.learning_rate, 0.9, 0.999, 1e-8};
  Mlp& actor = ts.bundle.reach_actor.net;
  Mlp& critic = ts.bundle.reach_critic;
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);

  double loss_sum = 0.0, vloss_sum = 0.0, ent_sum = 0.0, ratio_sum = 0.0;
  long clipped = 0, seen = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    detail::shuffle_indices(idx, rng);
    for (int start = 0; start < n; start += cfg.minibatch) {
      int end = std::min(n, start + cfg.minibatch);
      int m = end - start;
      std::vector<double> g_actor(actor.params().size(), 0.0);
      std::vector<double> g_critic(critic.params().size(), 0.0);

      for (int k = start; k < end; ++k) {
        const ReachStep& s = buf.reach[idx[k]];
        double a = adv[idx[k]];

        Mlp::Trace trace;
        std::vector<double> logits = actor.forward(s.obs, &trace);
        auto heads = reach_head_probs(logits);
        double logp = std::log(heads[0][s.action.forward]) +
                      std::log(heads[1][s.action.lateral]) + std::log(heads[2][s.action.turn]);
        double ratio = std::exp(logp - s.log_prob);
        detail::check_finite(ratio, "probability ratio");
        double surr = std::min(ratio * a, std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * a);
        bool gate = detail::clip_active(ratio, a, cfg.clip);
        if (gate) ++clipped;
        ratio_sum += ratio;
        loss_sum += -surr;
        ++seen;

        double ent = 0.0;
        std::vector<double> dlogits(kReachLogits, 0.0);
        const std::array<int, 3> picks = {s.action.forward, s.action.lateral, s.action.turn};
        int at = 0;
        for (int h = 0; h < 3; ++h) {
          const auto& p = heads[h];
          double h_ent = 0.0;
          for (double v : p)
            if (v > 0.0) h_ent -= v * std::log(v);
          ent += h_ent;
          for (int j = 0; j < kReachHeads[h]; ++j) {
            double dlogp = (j == picks[h] ? 1.0 : 0.0) - p[j];
            double dent = -p[j] * ((p[j] > 0.0 ? std::log(p[j]) : 0.0) + h_ent);
            double coeff = gate ? 0.0 : ratio * a;
            // loss = -(surrogate + entropy bonus); accumulate dLoss/dlogit
            dlogits[at + j] = -(coeff * dlogp + cfg.entropy_coef * dent) / m;
          }
          at += kReachHeads[h];
        }
        ent_sum += ent;
        actor.backward(trace, dlogits, g_actor);

        Mlp::Trace vtrace;
        double v = critic.forward(s.state, &vtrace)[0];
        double verr = v - s.ret;
        vloss_sum += 0.5 * verr * verr;
        critic.backward(vtrace, {cfg.value_coef * verr / m}, g_critic);
      }
      adam_step(actor.params(), g_actor, ts.opt_reach_actor, opt);
      adam_step(critic.params(), g_critic, ts.opt_reach_critic, opt);
    }
  }
  diag.samples = n;
  diag.policy_loss = loss_sum / std::max<long>(seen, 1);
  diag.value_loss = vloss_sum / std::max<long>(seen, 1);
  diag.entropy = ent_sum / std::max<long>(seen, 1);
  diag.mean_ratio = ratio_sum / std::max<long>(seen, 1);
  diag.clip_fraction = static_cast<double>(clipped) / std::max<long>(seen, 1);
  detail::check_finite(diag.policy_loss, "policy loss");
  detail::check_finite(diag.value_loss, "value loss");
  return diag;
}

// One PPO update of the evaluation actor (mean net + log-std) + critic.
inline PpoDiagnostics update_evaluation(TrainerState& ts, const RolloutBuffer& buf,
                                        const TrainConfig& cfg, Rng& rng) {
  PpoDiagnostics diag;
  const int n = static_cast<int>(buf.eval.size());
  if (n == 0) return diag;
  std::vector<double> adv(n);
  for (int i = 0; i < n; ++i) adv[i] = buf.eval[i].advantage;
  if (cfg.normalize_advantages) detail::normalize(adv);

  AdamConfig opt{cfg.learning_rate, 0.9, 0.999, 1e-8};
  GaussianActor& actor = ts.bundle.eval_actor;
  Mlp& critic = ts.bundle.eval_critic;
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);

  double loss_sum = 0.0, vloss_sum = 0.0, ent_sum = 0.0, ratio_sum = 0.0;
  long clipped = 0, seen = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    detail::shuffle_indices(idx, rng);
    for (int start = 0; start < n; start += cfg.minibatch) {
      int end = std::min(n, start + cfg.minibatch);
      int m = end - start;
      std::vector<double> g_net(actor.net.params().size(), 0.0);
      std::vector<double> g_ls(actor.log_std.size(), 0.0);
      std::vector<double> g_critic(critic.params().size(), 0.0);

      for (int k = start; k < end; ++k) {
        const EvalStep& s = buf.eval[idx[k]];
        double a = adv[idx[k]];

        Mlp::Trace trace;
        std::vector<double> mean = actor.net.forward(s.obs, &trace);
        double logp = gaussian_log_prob(mean, actor.log_std, s.action);
        double ratio = std::exp(logp - s.log_prob);
        detail::check_finite(ratio, "probability ratio");
        double surr = std::min(ratio * a, std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * a);
        bool gate = detail::clip_active(ratio, a, cfg.clip);
        if (gate) ++clipped;
        ratio_sum += ratio;
        loss_sum += -surr;
        ent_sum += gaussian_entropy(actor.log_std);
        ++seen;

        double coeff = gate ? 0.0 : ratio * a;
        std::vector<double> dmean(2, 0.0);
        for (int d = 0; d < 2; ++d) {
          double sigma = std::exp(actor.log_std[d]);
          double z = (s.action[d] - mean[d]) / sigma;
          double dlogp_dmean = z / sigma;
          double dlogp_dls = z * z - 1.0;
          dmean[d] = -(coeff * dlogp_dmean) / m;
          g_ls[d] += -(coeff * dlogp_dls + cfg.entropy_coef * 1.0) / m;
        }
        actor.net.backward(trace, dmean, g_net);

        Mlp::Trace vtrace;
        double v = critic.forward(s.state, &vtrace)[0];
        double verr = v - s.ret;
        vloss_sum += 0.5 * verr * verr;
        critic.backward(vtrace, {cfg.value_coef * verr / m}, g_critic);
      }
      adam_step(actor.net.params(), g_net, ts.opt_eval_actor, opt);
      adam_step(actor.log_std, g_ls, ts.opt_eval_log_std, opt);
      for (double& ls : actor.log_std) ls = std::clamp(ls, -5.0, 1.5);
      adam_step(critic.params(), g_critic, ts.opt_eval_critic, opt);
    }
  }
  diag.samples = n;
  diag.policy_loss = loss_sum / std::max<long>(seen, 1);
  diag.value_loss = vloss_sum / std::max<long>(seen, 1);
  diag.entropy = ent_sum / std::max<long>(seen, 1);
  diag.mean_ratio = ratio_sum / std::max<long>(seen, 1);
  diag.clip_fraction = static_cast<double>(clipped) / std::max<long>(seen, 1);
  detail::check_finite(diag.policy_loss, "policy loss");
  detail::check_finite(diag.value_loss, "value loss");
  return diag;
}

// ----- the two-stage curriculum ----------------------------------------------------

struct TrainUpdateRow {
  long update = 0;
  int stage = 1;
  long env_steps = 0;  // cumulative env ticks
  double reach_reward_mean = 0.0;
  double eval_reward_mean = 0.0;
  double mean_episode_ticks = 0.0;  // over episodes finished in this window
  PpoDiagnostics reach_diag;
  PpoDiagnostics eval_diag;
};

struct TrainResult {
  TrainerState state;
  std::vector<TrainUpdateRow> curve;
};

using UpdateHook = std::function<void(const TrainerState&, const TrainUpdateRow&)>;

// Stage 1 trains reaching alone under simplified dynamics; stage 2 restores
// full dynamics and trains both levels until the total budget is spent.
// Passing `resume` continues a previous run: its step counter keeps counting
// against the same budgets.
inline TrainResult train_two_stage(const Scenario& scenario, const TrainConfig& cfg,
                                   const UpdateHook& hook = {},
                                   const TrainerState* resume = nullptr) {
  validate_train_config(cfg);
  Rng init_rng(Rng::derive_seed(cfg.seed, 0));
  Rng rollout_rng(Rng::derive_seed(cfg.seed, 1));
  Rng update_rng(Rng::derive_seed(cfg.seed, 2));

  TrainResult result;
  result.state = make_trainer_state(scenario, cfg, init_rng);
  TrainerState& ts = result.state;
  if (resume) {
    if (resume->bundle.eval_actor.net.sizes() != ts.bundle.eval_actor.net.sizes() ||
        resume->bundle.reach_actor.net.sizes() != ts.bundle.reach_actor.net.sizes() ||
        resume->bundle.eval_critic.sizes() != ts.bundle.eval_critic.sizes() ||
        resume->bundle.reach_critic.sizes() != ts.bundle.reach_critic.sizes())
      throw ValidationError("checkpoint does not match the scenario and config shapes");
    ts = *resume;
  }

  auto run_stage = [&](int stage, long budget_end) {
    if (ts.steps_done >= budget_end) return;
    EnvConfig env_cfg = stage == 1 ? apply_stage1(cfg.env) : cfg.env;
    EnvPool pool(scenario, env_cfg, cfg.n_envs,
                 Rng::derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(stage)));
    ts.stage = stage;
    while (ts.steps_done < budget_end) {
      RolloutBuffer buf = pool.collect(ts.bundle, cfg.rollout_ticks, cfg.gamma, cfg.gae_lambda,
                                       rollout_rng, /*collect_eval=*/stage == 2);
      ts.steps_done += buf.env_ticks;
      TrainUpdateRow row;
      row.update = ++ts.updates_done;
      row.stage = stage;
      row.env_steps = ts.steps_done;
      row.reach_reward_mean =
          buf.reach.empty() ? 0.0 : buf.reach_reward_sum / static_cast<double>(buf.reach.size());
      row.eval_reward_mean =
          buf.eval.empty() ? 0.0 : buf.eval_reward_sum / static_cast<double>(buf.eval.size());
      row.mean_episode_ticks = buf.episodes_finished > 0
                                   ? buf.finished_ticks_sum / buf.episodes_finished
                                   : 0.0;
      row.reach_diag = update_reaching(ts, buf, cfg, update_rng);
      if (stage == 2) row.eval_diag = update_evaluation(ts, buf, cfg, update_rng);
      result.curve.push_back(row);
      if (hook) hook(ts, row);
      if (buf.env_ticks == 0) break;  // degenerate rollout config
    }
  };

  run_stage(1, std::min(cfg.stage1_steps, cfg.total_steps));
  run_stage(2, cfg.total_steps);
  return result;
}

}  // namespace cmdp
