#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "cmdp/errors.hpp"
#include "cmdp/scenario_io.hpp"
#include "cmdp/training.hpp"

namespace cmdp {
namespace {

constexpr double kTight = 1e-10;

TEST(Gae, PinnedThreeStepEpisode) {
  // gamma 0.9, lambda 1, unit rewards, zero values, episode ends on the last
  // step: the advantages are the plain discounted returns.
  GaeResult g = compute_gae({1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}, {0, 0, 1}, 0.9, 1.0);
  ASSERT_EQ(g.advantages.size(), 3u);
  EXPECT_NEAR(g.advantages[0], 2.71, kTight);
  EXPECT_NEAR(g.advantages[1], 1.9, kTight);
  EXPECT_NEAR(g.advantages[2], 1.0, kTight);
  EXPECT_NEAR(g.returns[0], 2.71, kTight);
  EXPECT_NEAR(g.returns[1], 1.9, kTight);
  EXPECT_NEAR(g.returns[2], 1.0, kTight);
}

TEST(Gae, LambdaOneMatchesMonteCarloMinusValue) {
  Rng rng(101);
  const double gamma = 0.97;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 10;
    std::vector<double> rewards(n), values(n);
    std::vector<char> dones(n, 0);
    for (int t = 0; t < n; ++t) {
      rewards[t] = rng.uniform(-1.0, 1.0);
      values[t] = rng.uniform(-1.0, 1.0);
      dones[t] = rng.uniform_int(4) == 0 ? 1 : 0;
    }
    double last_value = rng.uniform(-1.0, 1.0);

    GaeResult g = compute_gae(rewards, values, dones, gamma, 1.0, last_value);

    // Discounted return computed forward from the back, restarting at
    // episode boundaries and bootstrapping the truncated tail.
    std::vector<double> mc(n, 0.0);
    for (int t = n - 1; t >= 0; --t) {
      double next = dones[t] ? 0.0 : (t + 1 < n ? mc[t + 1] : last_value);
      mc[t] = rewards[t] + gamma * next;
    }
    for (int t = 0; t < n; ++t) {
      EXPECT_NEAR(g.advantages[t], mc[t] - values[t], kTight) << "trial " << trial << " t " << t;
      EXPECT_NEAR(g.returns[t], mc[t], kTight);
    }
  }
}

TEST(Gae, LambdaZeroIsTheOneStepResidual) {
  Rng rng(202);
  const double gamma = 0.9;
  const int n = 12;
  std::vector<double> rewards(n), values(n);
  std::vector<char> dones(n, 0);
  for (int t = 0; t < n; ++t) {
    rewards[t] = rng.uniform(-2.0, 2.0);
    values[t] = rng.uniform(-2.0, 2.0);
    dones[t] = rng.uniform_int(3) == 0 ? 1 : 0;
  }
  double last_value = 0.4;

  GaeResult g = compute_gae(rewards, values, dones, gamma, 0.0, last_value);
  for (int t = 0; t < n; ++t) {
    double next_value = t + 1 < n ? values[t + 1] : last_value;
    double delta = rewards[t] + gamma * next_value * (dones[t] ? 0.0 : 1.0) - values[t];
    EXPECT_NEAR(g.advantages[t], delta, kTight) << "t " << t;
    EXPECT_NEAR(g.returns[t], delta + values[t], kTight);
  }
}

TEST(Gae, BootstrapsThroughTheLastValueOnlyWhenTruncated) {
  // Open-ended stream: the bootstrap flows into every advantage.
  GaeResult open_a = compute_gae({0.0, 0.0}, {0.0, 0.0}, {0, 0}, 0.5, 1.0, 8.0);
  GaeResult open_b = compute_gae({0.0, 0.0}, {0.0, 0.0}, {0, 0}, 0.5, 1.0, 0.0);
  EXPECT_NEAR(open_a.advantages[1], 4.0, kTight);
  EXPECT_NEAR(open_a.advantages[0], 2.0, kTight);
  EXPECT_NEAR(open_b.advantages[1], 0.0, kTight);

  // Terminated stream: the bootstrap must be ignored.
  GaeResult done_a = compute_gae({1.0, 1.0}, {0.0, 0.0}, {0, 1}, 0.5, 1.0, 8.0);
  GaeResult done_b = compute_gae({1.0, 1.0}, {0.0, 0.0}, {0, 1}, 0.5, 1.0, -3.0);
  for (int t = 0; t < 2; ++t) {
    EXPECT_DOUBLE_EQ(done_a.advantages[t], done_b.advantages[t]);
    EXPECT_DOUBLE_EQ(done_a.returns[t], done_b.returns[t]);
  }
}

TEST(Gae, RejectsMisalignedInputs) {
  EXPECT_THROW(compute_gae({1.0, 1.0}, {0.0}, {0, 0}, 0.9, 1.0), ContractViolation);
  EXPECT_THROW(compute_gae({1.0}, {0.0}, {0, 0}, 0.9, 1.0), ContractViolation);
}

// ----- PPO updates on hand-built buffers ------------------------------------

TrainerState tiny_state(std::uint64_t seed) {
  Rng rng(seed);
  TrainerState ts;
  ts.bundle = make_policy_bundle(/*eval_obs=*/4, /*reach_obs=*/6, /*global_state=*/3,
                                 /*hidden=*/8, rng);
  ts.opt_eval_actor = AdamState(ts.bundle.eval_actor.net.params().size());
  ts.opt_eval_log_std = AdamState(ts.bundle.eval_actor.log_std.size());
  ts.opt_reach_actor = AdamState(ts.bundle.reach_actor.net.params().size());
  ts.opt_eval_critic = AdamState(ts.bundle.eval_critic.params().size());
  ts.opt_reach_critic = AdamState(ts.bundle.reach_critic.params().size());
  return ts;
}

// Single-pass config: every diagnostic reflects exactly one sweep over the
// buffer with the parameters the samples were priced against.
TrainConfig single_pass_config() {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.minibatch = 4096;
  cfg.normalize_advantages = false;
  cfg.entropy_coef = 0.0;
  cfg.learning_rate = 1e-5;
  cfg.clip = 0.2;
  return cfg;
}

std::vector<double> random_vec(int n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// Builds a sample whose stored log-probability is offset so that the update
// recomputes exactly the requested probability ratio.
ReachStep forced_ratio_sample(const TrainerState& ts, double ratio, double advantage, Rng& rng) {
  ReachStep s;
  s.obs = random_vec(6, rng);
  s.state = random_vec(3, rng);
  s.action = ReachAction{static_cast<int>(rng.uniform_int(4)), static_cast<int>(rng.uniform_int(3)),
                         static_cast<int>(rng.uniform_int(3))};
  double logp = reach_log_prob(ts.bundle.reach_actor.net.forward(s.obs), s.action);
  s.log_prob = logp - std::log(ratio);
  s.advantage = advantage;
  return s;
}

TEST(Ppo, SurrogateTakesTheClippedMinimum) {
  TrainerState ts = tiny_state(7);
  TrainConfig cfg = single_pass_config();
  Rng rng(8);

  RolloutBuffer buf;
  // ratio 1.5 with advantage +1: min(1.5, 1.2) = 1.2 and the gradient gates.
  buf.reach.push_back(forced_ratio_sample(ts, 1.5, 1.0, rng));
  // ratio 0.5 with advantage -1: min(-0.5, -0.8) = -0.8, gated as well.
  buf.reach.push_back(forced_ratio_sample(ts, 0.5, -1.0, rng));

  std::vector<double> actor_before = ts.bundle.reach_actor.net.params();
  Rng update_rng(9);
  PpoDiagnostics diag = update_reaching(ts, buf, cfg, update_rng);

  EXPECT_EQ(diag.samples, 2);
  EXPECT_NEAR(diag.policy_loss, -(1.2 + -0.8) / 2.0, 1e-9);
  EXPECT_DOUBLE_EQ(diag.clip_fraction, 1.0);
  EXPECT_NEAR(diag.mean_ratio, 1.0, 1e-9);
  // Both samples sit past the clip, so the actor receives a zero gradient.
  EXPECT_EQ(ts.bundle.reach_actor.net.params(), actor_before);
}

TEST(Ppo, UnclippedRatiosKeepThePlainSurrogate) {
  TrainerState ts = tiny_state(11);
  TrainConfig cfg = single_pass_config();
  Rng rng(12);

  RolloutBuffer buf;
  // ratio 1.1, advantage +2: min(2.2, 2.4) = 2.2, inside the band.
  buf.reach.push_back(forced_ratio_sample(ts, 1.1, 2.0, rng));
  // ratio 0.9, advantage -1: min(-0.9, -0.8) = -0.9, inside the band.
  buf.reach.push_back(forced_ratio_sample(ts, 0.9, -1.0, rng));

  Rng update_rng(13);
  PpoDiagnostics diag = update_reaching(ts, buf, cfg, update_rng);
  EXPECT_NEAR(diag.policy_loss, -(2.2 + -0.9) / 2.0, 1e-9);
  EXPECT_DOUBLE_EQ(diag.clip_fraction, 0.0);
}

TEST(Ppo, OnPolicyBufferShowsUnitRatiosAndNoClipping) {
  TrainerState ts = tiny_state(21);
  TrainConfig cfg = single_pass_config();
  Rng rng(22);

  RolloutBuffer buf;
  for (int i = 0; i < 32; ++i) {
    ReachStep s;
    s.obs = random_vec(6, rng);
    s.state = random_vec(3, rng);
    ReachSample pick = sample_reaching(ts.bundle.reach_actor, s.obs, rng);
    s.action = pick.action;
    s.log_prob = pick.log_prob;
    s.advantage = rng.uniform(-1.0, 1.0);
    s.ret = rng.uniform(-1.0, 1.0);
    buf.reach.push_back(s);
  }

  Rng update_rng(23);
  PpoDiagnostics diag = update_reaching(ts, buf, cfg, update_rng);
  EXPECT_EQ(diag.samples, 32);
  EXPECT_NEAR(diag.mean_ratio, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(diag.clip_fraction, 0.0);
  EXPECT_GT(diag.entropy, 0.0);
}

TEST(Ppo, ClipFractionMatchesABruteForceCount) {
  TrainerState ts = tiny_state(31);
  TrainConfig cfg = single_pass_config();
  Rng rng(32);

  // Ratios drawn from bands with a wide margin around the 0.8 / 1.2 edges.
  RolloutBuffer buf;
  int expected_clipped = 0;
  for (int i = 0; i < 64; ++i) {
    double ratio = 0.0;
    switch (rng.uniform_int(3)) {
      case 0: ratio = rng.uniform(0.3, 0.75); break;
      case 1: ratio = rng.uniform(0.85, 1.15); break;
      default: ratio = rng.uniform(1.25, 1.7); break;
    }
    double advantage = (rng.uniform_int(2) == 0 ? 1.0 : -1.0) * rng.uniform(0.2, 2.0);
    if (advantage >= 0.0 ? ratio > 1.0 + cfg.clip : ratio < 1.0 - cfg.clip) ++expected_clipped;
    buf.reach.push_back(forced_ratio_sample(ts, ratio, advantage, rng));
  }

  Rng update_rng(33);
  PpoDiagnostics diag = update_reaching(ts, buf, cfg, update_rng);
  EXPECT_DOUBLE_EQ(diag.clip_fraction, expected_clipped / 64.0);
}

TEST(Ppo, NonFiniteInputsRaiseDivergence) {
  TrainerState ts = tiny_state(41);
  TrainConfig cfg = single_pass_config();
  Rng rng(42);

  RolloutBuffer buf;
  ReachStep s = forced_ratio_sample(ts, 1.0, 1.0, rng);
  s.log_prob = std::numeric_limits<double>::quiet_NaN();
  buf.reach.push_back(s);

  Rng update_rng(43);
  EXPECT_THROW(update_reaching(ts, buf, cfg, update_rng), DivergenceError);
}

TEST(Ppo, EmptyBufferIsANoOp) {
  TrainerState ts = tiny_state(51);
  TrainerState before = ts;
  TrainConfig cfg = single_pass_config();
  Rng update_rng(52);

  RolloutBuffer buf;
  PpoDiagnostics reach = update_reaching(ts, buf, cfg, update_rng);
  PpoDiagnostics eval = update_evaluation(ts, buf, cfg, update_rng);
  EXPECT_EQ(reach.samples, 0);
  EXPECT_EQ(eval.samples, 0);
  EXPECT_TRUE(ts == before);
}

TEST(Ppo, CriticRegressesTowardReturns) {
  TrainerState ts = tiny_state(61);
  TrainConfig cfg = single_pass_config();
  cfg.learning_rate = 3e-3;

  // Zero advantages keep the actor frozen so only the critic moves.
  Rng rng(62);
  RolloutBuffer buf;
  for (int i = 0; i < 32; ++i) {
    ReachStep s;
    s.obs = random_vec(6, rng);
    s.state = random_vec(3, rng);
    ReachSample pick = sample_reaching(ts.bundle.reach_actor, s.obs, rng);
    s.action = pick.action;
    s.log_prob = pick.log_prob;
    s.advantage = 0.0;
    s.ret = 1.0;
    buf.reach.push_back(s);
  }

  Rng update_rng(63);
  double first = update_reaching(ts, buf, cfg, update_rng).value_loss;
  double last = first;
  for (int it = 0; it < 80; ++it) last = update_reaching(ts, buf, cfg, update_rng).value_loss;
  EXPECT_LT(last, first * 0.5);
  EXPECT_DOUBLE_EQ(update_reaching(ts, buf, cfg, update_rng).policy_loss, 0.0);
}

TEST(Ppo, EvaluationUpdateMirrorsTheReachingBehaviour) {
  TrainerState ts = tiny_state(71);
  TrainConfig cfg = single_pass_config();
  Rng rng(72);

  RolloutBuffer buf;
  for (int i = 0; i < 16; ++i) {
    EvalStep s;
    s.obs = random_vec(4, rng);
    s.state = random_vec(3, rng);
    GaussianSample pick = sample_gaussian(ts.bundle.eval_actor, s.obs, rng);
    s.action = pick.action;
    s.log_prob = pick.log_prob;
    s.advantage = rng.uniform(-1.0, 1.0);
    s.ret = rng.uniform(-1.0, 1.0);
    buf.eval.push_back(s);
  }

  // The diagnostic reflects the spread the samples were scored with, before
  // the update nudges it.
  double entropy_before = gaussian_entropy(ts.bundle.eval_actor.log_std);
  Rng update_rng(73);
  PpoDiagnostics diag = update_evaluation(ts, buf, cfg, update_rng);
  EXPECT_EQ(diag.samples, 16);
  EXPECT_NEAR(diag.mean_ratio, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(diag.clip_fraction, 0.0);
  EXPECT_NEAR(diag.entropy, entropy_before, 1e-12);
}

// ----- trainer state & config ------------------------------------------------

TEST(Trainer, StateShapesFollowScenarioAndConfig) {
  Scenario s = resolve_scenario("toy");
  TrainConfig cfg;
  cfg.hidden = 16;
  Rng rng(5);
  TrainerState ts = make_trainer_state(s, cfg, rng);

  int eval_obs = eval_observation_size(make_eval_target_set(s));
  int reach_obs = reach_observation_size(cfg.env.perception);
  int global = global_state_size(s);
  EXPECT_EQ(ts.bundle.eval_actor.net.sizes(), (std::vector<int>{eval_obs, 16, 16, 2}));
  EXPECT_EQ(ts.bundle.reach_actor.net.sizes(), (std::vector<int>{reach_obs, 16, 16, kReachLogits}));
  EXPECT_EQ(ts.bundle.eval_critic.sizes(), (std::vector<int>{global, 16, 16, 1}));
  EXPECT_EQ(ts.bundle.reach_critic.sizes(), (std::vector<int>{global, 16, 16, 1}));
  EXPECT_EQ(ts.opt_reach_actor.m.size(), ts.bundle.reach_actor.net.params().size());
  EXPECT_EQ(ts.opt_eval_log_std.m.size(), ts.bundle.eval_actor.log_std.size());
  EXPECT_EQ(ts.steps_done, 0);
  EXPECT_EQ(ts.stage, 1);
}

TEST(Trainer, ConfigValidationRejectsBadSettings) {
  auto broken = [](auto&& tweak) {
    TrainConfig cfg;
    tweak(cfg);
    return cfg;
  };
  EXPECT_THROW(validate_train_config(broken([](TrainConfig& c) { c.clip = 0.0; })),
               ValidationError);
  EXPECT_THROW(validate_train_config(broken([](TrainConfig& c) { c.gamma = 0.0; })),
               ValidationError);
  EXPECT_THROW(validate_train_config(broken([](TrainConfig& c) { c.gae_lambda = 1.5; })),
               ValidationError);
  EXPECT_THROW(validate_train_config(broken([](TrainConfig& c) { c.minibatch = 0; })),
               ValidationError);
  EXPECT_THROW(validate_train_config(broken([](TrainConfig& c) { c.n_envs = 0; })),
               ValidationError);
  EXPECT_THROW(validate_train_config(broken([](TrainConfig& c) { c.hidden = 0; })),
               ValidationError);
  EXPECT_NO_THROW(validate_train_config(TrainConfig{}));
}

// ----- rollout collection ------------------------------------------------------

TEST(Pool, CollectFillsTickAlignedBuffers) {
  Scenario s = resolve_scenario("toy");
  EnvConfig env_cfg;
  env_cfg.max_ticks = 30;  // short episodes so evaluation samples get closed
  TrainConfig cfg;
  cfg.hidden = 8;
  Rng init(1);
  TrainerState ts = make_trainer_state(s, cfg, init);

  EnvPool pool(s, env_cfg, /*n_envs=*/2, /*seed=*/77);
  Rng rollout(2);
  RolloutBuffer buf = pool.collect(ts.bundle, /*ticks=*/90, 0.99, 0.95, rollout);

  EXPECT_EQ(buf.env_ticks, 180);
  EXPECT_EQ(buf.episodes_finished, 6);  // 90 ticks / 30-tick episodes, twice
  EXPECT_DOUBLE_EQ(buf.finished_ticks_sum / buf.episodes_finished, 30.0);
  ASSERT_FALSE(buf.reach.empty());
  ASSERT_FALSE(buf.eval.empty());

  int reach_obs = reach_observation_size(env_cfg.perception);
  int eval_obs = eval_observation_size(make_eval_target_set(s));
  int global = global_state_size(s);
  double reach_sum = 0.0;
  for (const ReachStep& step : buf.reach) {
    EXPECT_EQ(step.obs.size(), static_cast<std::size_t>(reach_obs));
    EXPECT_EQ(step.state.size(), static_cast<std::size_t>(global));
    EXPECT_LE(step.log_prob, 0.0);
    reach_sum += step.reward;
  }
  EXPECT_NEAR(reach_sum, buf.reach_reward_sum, 1e-9);
  bool saw_terminal_eval = false;
  for (const EvalStep& step : buf.eval) {
    EXPECT_EQ(step.obs.size(), static_cast<std::size_t>(eval_obs));
    EXPECT_EQ(step.state.size(), static_cast<std::size_t>(global));
    saw_terminal_eval = saw_terminal_eval || step.done;
  }
  EXPECT_TRUE(saw_terminal_eval);
}

TEST(Pool, CollectIsDeterministicForASeed) {
  Scenario s = resolve_scenario("toy");
  EnvConfig env_cfg;
  TrainConfig cfg;
  cfg.hidden = 8;
  Rng init(9);
  TrainerState ts = make_trainer_state(s, cfg, init);

  auto run = [&]() {
    EnvPool pool(s, env_cfg, 2, 31);
    Rng rollout(4);
    return pool.collect(ts.bundle, 40, 0.99, 0.95, rollout);
  };
  RolloutBuffer a = run();
  RolloutBuffer b = run();

  ASSERT_EQ(a.reach.size(), b.reach.size());
  ASSERT_EQ(a.eval.size(), b.eval.size());
  EXPECT_DOUBLE_EQ(a.reach_reward_sum, b.reach_reward_sum);
  EXPECT_DOUBLE_EQ(a.eval_reward_sum, b.eval_reward_sum);
  for (std::size_t i = 0; i < a.reach.size(); ++i) {
    EXPECT_EQ(a.reach[i].log_prob, b.reach[i].log_prob);
    EXPECT_EQ(a.reach[i].reward, b.reach[i].reward);
    EXPECT_EQ(a.reach[i].advantage, b.reach[i].advantage);
    EXPECT_EQ(a.reach[i].action.forward, b.reach[i].action.forward);
  }
}

TEST(Pool, CollectEvalFlagFiltersTheEvalStream) {
  Scenario s = resolve_scenario("toy");
  EnvConfig env_cfg;
  TrainConfig cfg;
  cfg.hidden = 8;
  Rng init(3);
  TrainerState ts = make_trainer_state(s, cfg, init);

  EnvPool pool(s, env_cfg, 1, 15);
  Rng rollout(6);
  RolloutBuffer buf = pool.collect(ts.bundle, 50, 0.99, 0.95, rollout, /*collect_eval=*/false);
  EXPECT_EQ(buf.env_ticks, 50);
  EXPECT_TRUE(buf.eval.empty());
  EXPECT_FALSE(buf.reach.empty());
}

// ----- the two-stage driver -----------------------------------------------------

TrainConfig tiny_curriculum() {
  TrainConfig cfg;
  cfg.hidden = 8;
  cfg.n_envs = 1;
  cfg.rollout_ticks = 32;
  cfg.stage1_steps = 64;
  cfg.total_steps = 128;
  cfg.minibatch = 256;
  cfg.epochs = 1;
  cfg.seed = 5;
  cfg.env.max_ticks = 40;
  return cfg;
}

TEST(TwoStage, StagesSpendTheBudgetsInOrder) {
  Scenario s = resolve_scenario("toy");
  TrainConfig cfg = tiny_curriculum();

  int hook_calls = 0;
  TrainResult result = train_two_stage(s, cfg, [&](const TrainerState&, const TrainUpdateRow&) {
    ++hook_calls;
  });

  ASSERT_EQ(result.curve.size(), 4u);
  EXPECT_EQ(hook_calls, 4);
  EXPECT_EQ(result.state.steps_done, 128);
  EXPECT_EQ(result.state.updates_done, 4);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(result.curve[i].update, i + 1);
    EXPECT_EQ(result.curve[i].stage, i < 2 ? 1 : 2);
    EXPECT_EQ(result.curve[i].env_steps, 32 * (i + 1));
  }
  // Stage 1 never trains the evaluation level.
  EXPECT_EQ(result.curve[0].eval_diag.samples, 0);
  EXPECT_EQ(result.curve[1].eval_diag.samples, 0);
}

TEST(TwoStage, SameSeedReproducesTheRun) {
  Scenario s = resolve_scenario("toy");
  TrainConfig cfg = tiny_curriculum();
  TrainResult a = train_two_stage(s, cfg);
  TrainResult b = train_two_stage(s, cfg);
  EXPECT_TRUE(a.state == b.state);
  ASSERT_EQ(a.curve.size(), b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_EQ(a.curve[i].reach_reward_mean, b.curve[i].reach_reward_mean);
    EXPECT_EQ(a.curve[i].reach_diag.policy_loss, b.curve[i].reach_diag.policy_loss);
  }
}

TEST(TwoStage, ResumeContinuesAndValidatesShapes) {
  Scenario s = resolve_scenario("toy");
  TrainConfig cfg = tiny_curriculum();
  TrainResult first = train_two_stage(s, cfg);

  // Extending the budget picks up where the checkpoint stopped: all the
  // remaining updates belong to stage 2.
  TrainConfig extended = cfg;
  extended.total_steps = 192;
  TrainResult second = train_two_stage(s, extended, {}, &first.state);
  ASSERT_EQ(second.curve.size(), 2u);
  EXPECT_EQ(second.curve[0].update, 5);
  EXPECT_EQ(second.curve[0].stage, 2);
  EXPECT_EQ(second.state.steps_done, 192);

  // A checkpoint with the wrong network shapes is rejected.
  TrainConfig wider = extended;
  wider.hidden = 12;
  EXPECT_THROW(train_two_stage(s, wider, {}, &first.state), ValidationError);
}

}  // namespace
}  // namespace cmdp
