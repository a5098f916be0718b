#include <gtest/gtest.h>

#include "cmdp/errors.hpp"
#include "cmdp/rewards.hpp"

namespace cmdp {
namespace {

TEST(EvalReward, IdlePenaltiesScaleWithCauseCounts) {
  RewardConfig cfg;
  IdleCounts idle;
  idle.precedence = 2;
  idle.space = 3;
  idle.exhausted = 1;
  idle.active_agents = 7;

  EvalReward r = evaluation_reward(idle, cfg);
  EXPECT_DOUBLE_EQ(r.idle_precedence, -0.01 * 2);
  EXPECT_DOUBLE_EQ(r.idle_area, -0.01 * 3);
  // One out of seven agents idles for exhaustion, six total idle.
  EXPECT_DOUBLE_EQ(r.efficiency, 0.002 * (1.0 - 6.0 / 7.0));
  EXPECT_DOUBLE_EQ(r.episode_term, 0.0);
  EXPECT_DOUBLE_EQ(r.path_term, 0.0);
  EXPECT_DOUBLE_EQ(r.total(), r.idle_precedence + r.idle_area + r.efficiency);
}

TEST(EvalReward, FullyBusyTeamEarnsTheWholeBonus) {
  RewardConfig cfg;
  IdleCounts idle;
  idle.active_agents = 4;
  EvalReward r = evaluation_reward(idle, cfg);
  EXPECT_DOUBLE_EQ(r.efficiency, 0.002);
  EXPECT_DOUBLE_EQ(r.idle_precedence, 0.0);
  EXPECT_DOUBLE_EQ(r.idle_area, 0.0);
}

TEST(EvalReward, NoActiveAgentsMeansNoBonus) {
  RewardConfig cfg;
  IdleCounts idle;  // everyone deregistered
  EvalReward r = evaluation_reward(idle, cfg);
  EXPECT_DOUBLE_EQ(r.total(), 0.0);
}

TEST(EvalReward, TerminalTermsNormalizeByReferences) {
  RewardConfig cfg;
  EvalReward r = terminal_evaluation_terms(5000, 2500, cfg);
  EXPECT_DOUBLE_EQ(r.episode_term, -0.5);
  EXPECT_DOUBLE_EQ(r.path_term, -0.25);
  EXPECT_DOUBLE_EQ(r.total(), -0.75);

  cfg.episode_ref_ticks = 0.0;  // disabled reference yields no term
  r = terminal_evaluation_terms(5000, 2500, cfg);
  EXPECT_DOUBLE_EQ(r.episode_term, 0.0);
}

TEST(ReachReward, HardContactsHurtMoreThanSoft) {
  RewardConfig cfg;
  MoveEvents events;
  events.agents = 1;
  events.task_areas = 2;
  events.wall = 1;
  events.storage_areas = 3;
  ReachReward r = reaching_reward(events, false, 0.0, false, cfg);
  EXPECT_DOUBLE_EQ(r.collision, -(0.5 * 3 + 0.05 * 4));
  EXPECT_DOUBLE_EQ(r.reach, 0.0);
  EXPECT_DOUBLE_EQ(r.time, 0.0);
}

TEST(ReachReward, ArrivalPaysTheChasedValueScaled) {
  RewardConfig cfg;
  MoveEvents quiet;
  ReachReward r = reaching_reward(quiet, true, 0.75, true, cfg);
  EXPECT_DOUBLE_EQ(r.reach, 2.0 * 0.75);
  EXPECT_DOUBLE_EQ(r.time, -0.005);
  EXPECT_DOUBLE_EQ(r.collision, 0.0);
  EXPECT_DOUBLE_EQ(r.total(), 1.5 - 0.005);

  // A worthless target still pays nothing on arrival.
  r = reaching_reward(quiet, true, 0.0, true, cfg);
  EXPECT_DOUBLE_EQ(r.reach, 0.0);
}

TEST(ReachReward, HoldingCostOnlyWhileChasing) {
  RewardConfig cfg;
  MoveEvents quiet;
  EXPECT_DOUBLE_EQ(reaching_reward(quiet, false, 0.0, true, cfg).time, -0.005);
  EXPECT_DOUBLE_EQ(reaching_reward(quiet, false, 0.0, false, cfg).time, 0.0);
}

TEST(RewardConfig, ValidationRejectsBrokenSettings) {
  RewardConfig good;
  EXPECT_NO_THROW(validate_reward_config(good));

  RewardConfig gamma = good;
  gamma.gamma = 1.0;
  EXPECT_THROW(validate_reward_config(gamma), ValidationError);

  RewardConfig etas = good;
  etas.eta_passable = 0.9;  // would exceed the hard-contact index
  EXPECT_THROW(validate_reward_config(etas), ValidationError);

  RewardConfig reach = good;
  reach.k_reach = 0.0;
  EXPECT_THROW(validate_reward_config(reach), ValidationError);
}

}  // namespace
}  // namespace cmdp
