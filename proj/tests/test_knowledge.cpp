#include <gtest/gtest.h>

#include "cmdp/errors.hpp"
#include "cmdp/knowledge.hpp"
#include "cmdp/scenario.hpp"

namespace cmdp {
namespace {

// Three trades, one assisted task, one material-consuming task, one storage.
Scenario yard_scenario() {
  Scenario s;
  s.name = "yard";
  s.plane_width = 20.0;
  s.plane_height = 20.0;
  for (int i = 0; i < 2; ++i) {
    ComponentSpec c;
    c.id = "c" + std::to_string(i);
    c.footprint = Rect::centered({5.0 + 9.0 * i, 12.0}, 2.0, 2.0);
    s.components.push_back(c);
  }
  TaskSpec jc;
  jc.id = "jc-0";
  jc.type = TaskType::JC;
  jc.component = 0;
  jc.work_quantity = 3.0;
  s.tasks.push_back(jc);
  TaskSpec hi;
  hi.id = "hi-0";
  hi.type = TaskType::HI;
  hi.component = 0;
  hi.work_quantity = 2.0;
  hi.predecessors = {0};
  hi.requires_crane = true;
  s.tasks.push_back(hi);
  TaskSpec g;
  g.id = "g-0";
  g.type = TaskType::G;
  g.component = 1;
  g.work_quantity = 4.0;
  g.area_distance = 2.0;
  g.material = MaterialKind::Struts;
  g.material_per_unit = 1.0;
  s.tasks.push_back(g);
  StorageSpec st;
  st.id = "struts";
  st.material = MaterialKind::Struts;
  st.footprint = Rect::centered({10.0, 3.0}, 2.0, 2.0);
  st.acquire_rate = 2.0;
  st.capacity = 10.0;
  st.initial_stock = 5.0;
  s.storages.push_back(st);
  s.crews.push_back(detail::make_crew("jcc", CrewType::JCC, 30.0, 0.0, 1.5, 0.5, 1.0, 0.1,
                                      0.0, {2.0, 2.0}));
  s.crews.push_back(detail::make_crew("hic", CrewType::HIC, 30.0, 0.0, 1.5, 0.5, 1.0, 0.1,
                                      0.0, {6.0, 2.0}));
  s.crews.push_back(detail::make_crew("gc", CrewType::GC, 30.0, 0.0, 1.5, 0.5, 0.8, 0.1,
                                      2.0, {14.0, 2.0}));
  s.outlet = {18.0, 1.0};
  s.crane = {"crane", {19.0, 19.0}, 4.0};
  check_and_finalize(s);
  return s;
}

struct Yard {
  Scenario s = yard_scenario();
  ConstructionState c = ConstructionState::initial(s);
  PhysicalState p = PhysicalState::initial(s);

  Yard() { promote_tasks(c, s); }  // jc-0 and g-0 have no predecessors

  DecisionContext ctx(long tick = 10) const { return {s, StageFlags{}, 1.0, tick}; }
};

TEST(Decide, PassiveModesProduceNothing) {
  Yard y;
  y.c.agents[0].mode = AgentMode::Waiting;
  EXPECT_EQ(decide(0, y.c, y.p, y.ctx()).rule, RuleCode::None);
  y.c.agents[0].mode = AgentMode::Deregistered;
  EXPECT_EQ(decide(0, y.c, y.p, y.ctx()).rule, RuleCode::None);
}

TEST(Decide, ReachingWithoutArrivalProducesNothing) {
  Yard y;
  y.c.agents[0].target_scope = {ObjectRef::component(0)};
  y.c.agents[0].target_values = {0.5};
  // Spawn is far from the component, so no arrival rule can fire.
  EXPECT_EQ(decide(0, y.c, y.p, y.ctx()).rule, RuleCode::None);
}

TEST(Decide, InitiateOnArrivalAtExecutableComponent) {
  Yard y;
  auto& st = y.c.agents[0];
  st.target_scope = {ObjectRef::component(0)};
  st.target_values = {0.7};
  y.p.poses[0].position = y.s.components[0].position();
  auto ctx = y.ctx(10);

  DecisionOutcome out = decide(0, y.c, y.p, ctx);
  ASSERT_EQ(out.rule, RuleCode::InitiateTask);
  EXPECT_EQ(out.task, 0);
  EXPECT_TRUE(out.arrival);
  EXPECT_EQ(out.arrived_at, ObjectRef::component(0));

  TransitionEffects fx = apply_transition(0, out, y.c, y.p, ctx);
  EXPECT_EQ(fx.initiated_task, 0);
  EXPECT_DOUBLE_EQ(fx.arrival_value, 0.7);
  EXPECT_EQ(y.c.pools[0], PoolLabel::On);
  EXPECT_EQ(y.c.task_started[0], 10);
  EXPECT_EQ(st.mode, AgentMode::Tasking);
  EXPECT_EQ(st.current_task, 0);
  EXPECT_TRUE(st.target_scope.empty());
  EXPECT_GE(y.p.area_of_task(0), 0);
}

TEST(Decide, InitiateSkipsSpatiallyBlockedTask) {
  Yard y;
  y.p.register_task_area(y.s, 1);  // hi-0 occupies the same component
  y.c.agents[0].target_scope = {ObjectRef::component(0)};
  y.c.agents[0].target_values = {0.5};
  y.p.poses[0].position = y.s.components[0].position();
  EXPECT_EQ(decide(0, y.c, y.p, y.ctx()).rule, RuleCode::None);
}

TEST(Decide, ExecuteAdvancesWorkByEffectiveRate) {
  Yard y;
  y.c.pools[0] = PoolLabel::On;
  y.c.agents[0].mode = AgentMode::Tasking;
  y.c.agents[0].current_task = 0;
  y.c.agents[0].tick_rate = 0.8;
  y.p.register_task_area(y.s, 0);
  auto ctx = y.ctx();

  DecisionOutcome out = decide(0, y.c, y.p, ctx);
  ASSERT_EQ(out.rule, RuleCode::ExecuteTask);
  EXPECT_DOUBLE_EQ(out.work_delta, 0.8);  // no invaders, dt = 1

  TransitionEffects fx = apply_transition(0, out, y.c, y.p, ctx);
  EXPECT_DOUBLE_EQ(fx.work_done, 0.8);
  EXPECT_DOUBLE_EQ(y.c.progress[0], 0.8);
  EXPECT_EQ(y.c.agents[0].mode, AgentMode::Tasking);
}

TEST(Decide, ExecuteSlowsDownWithInvaders) {
  Yard y;
  y.c.pools[0] = PoolLabel::On;
  y.c.agents[0].mode = AgentMode::Tasking;
  y.c.agents[0].current_task = 0;
  y.c.agents[0].tick_rate = 0.8;
  y.p.register_task_area(y.s, 0);
  y.p.poses[1].position = y.s.components[0].position();  // one invader

  DecisionOutcome out = decide(0, y.c, y.p, y.ctx());
  ASSERT_EQ(out.rule, RuleCode::ExecuteTask);
  EXPECT_DOUBLE_EQ(out.work_delta, 0.8 * (1.0 - 0.1));
}

TEST(Decide, CompleteFinishesTaskAndPromotes) {
  Yard y;
  y.c.pools[0] = PoolLabel::On;
  y.c.progress[0] = 2.5;
  y.c.agents[0].mode = AgentMode::Tasking;
  y.c.agents[0].current_task = 0;
  y.c.agents[0].tick_rate = 0.8;
  y.p.register_task_area(y.s, 0);
  auto ctx = y.ctx(42);

  DecisionOutcome out = decide(0, y.c, y.p, ctx);
  ASSERT_EQ(out.rule, RuleCode::CompleteTask);
  EXPECT_DOUBLE_EQ(out.work_delta, 0.5);

  TransitionEffects fx = apply_transition(0, out, y.c, y.p, ctx);
  EXPECT_EQ(fx.completed_task, 0);
  EXPECT_DOUBLE_EQ(y.c.progress[0], 3.0);
  EXPECT_EQ(y.c.pools[0], PoolLabel::End);
  EXPECT_EQ(y.c.task_ended[0], 42);
  EXPECT_EQ(y.c.pools[1], PoolLabel::Queue);  // hi-0 unlocked
  EXPECT_EQ(y.c.agents[0].mode, AgentMode::TargetReaching);
  EXPECT_EQ(y.c.agents[0].current_task, -1);
  EXPECT_LT(y.p.area_of_task(0), 0);  // area released
}

TEST(Decide, PauseWhenCarriedMaterialRunsOut) {
  Yard y;
  y.c.pools[2] = PoolLabel::On;
  y.c.agents[2].mode = AgentMode::Tasking;
  y.c.agents[2].current_task = 2;
  y.c.agents[2].tick_rate = 0.5;
  y.c.agents[2].load = 0.0;
  auto ctx = y.ctx();

  DecisionOutcome out = decide(2, y.c, y.p, ctx);
  ASSERT_EQ(out.rule, RuleCode::PauseTask);
  EXPECT_EQ(out.task, 2);
  EXPECT_EQ(out.storage, 0);
  ASSERT_TRUE(out.new_scope.has_value());
  EXPECT_EQ(*out.new_scope, std::vector<ObjectRef>{ObjectRef::storage(0)});

  apply_transition(2, out, y.c, y.p, ctx);
  EXPECT_EQ(y.c.agents[2].paused_task, 2);
  EXPECT_EQ(y.c.agents[2].current_task, -1);
  EXPECT_EQ(y.c.agents[2].mode, AgentMode::TargetReaching);
  EXPECT_EQ(y.c.pools[2], PoolLabel::On);  // the task stays on the on pool
}

TEST(Decide, ExecuteConsumesCarriedMaterial) {
  Yard y;
  y.c.pools[2] = PoolLabel::On;
  y.c.agents[2].mode = AgentMode::Tasking;
  y.c.agents[2].current_task = 2;
  y.c.agents[2].tick_rate = 0.5;
  y.c.agents[2].load = 2.0;
  auto ctx = y.ctx();

  DecisionOutcome out = decide(2, y.c, y.p, ctx);
  ASSERT_EQ(out.rule, RuleCode::ExecuteTask);

  TransitionEffects fx = apply_transition(2, out, y.c, y.p, ctx);
  EXPECT_DOUBLE_EQ(fx.work_done, 0.5);
  EXPECT_DOUBLE_EQ(fx.material_used, 0.5);
  EXPECT_DOUBLE_EQ(y.c.agents[2].load, 1.5);
}

TEST(Decide, CraneRequestForAssistedTask) {
  Yard y;
  y.c.pools[1] = PoolLabel::On;
  y.c.agents[1].mode = AgentMode::Tasking;
  y.c.agents[1].current_task = 1;
  y.c.agents[1].tick_rate = 0.5;
  auto ctx = y.ctx(7);

  DecisionOutcome out = decide(1, y.c, y.p, ctx);
  ASSERT_EQ(out.rule, RuleCode::RequestCraneTask);
  EXPECT_EQ(out.task, 1);

  TransitionEffects fx = apply_transition(1, out, y.c, y.p, ctx);
  EXPECT_TRUE(fx.crane_requested);
  ASSERT_EQ(y.c.crane_queue.size(), 1u);
  EXPECT_EQ(y.c.crane_queue[0].kind, CraneRequest::Kind::TaskAssist);
  EXPECT_EQ(y.c.crane_queue[0].task, 1);
  EXPECT_EQ(y.c.crane_queue[0].issued_at, 7);
  EXPECT_EQ(y.c.agents[1].mode, AgentMode::Waiting);

  // Once served, the same state executes instead of asking again.
  y.c.crane_served[1] = true;
  y.c.agents[1].mode = AgentMode::Tasking;
  EXPECT_EQ(decide(1, y.c, y.p, y.ctx()).rule, RuleCode::ExecuteTask);
}

TEST(Decide, FetchLimitedByRateStockAndNeed) {
  Yard y;
  y.c.pools[2] = PoolLabel::On;
  y.c.agents[2].mode = AgentMode::Fetching;
  y.c.agents[2].paused_task = 2;
  y.c.agents[2].load = 0.5;
  auto ctx = y.ctx();

  DecisionOutcome out = decide(2, y.c, y.p, ctx);
  ASSERT_EQ(out.rule, RuleCode::FetchMaterials);
  EXPECT_EQ(out.storage, 0);
  EXPECT_DOUBLE_EQ(out.fetch_delta, 1.5);  // need caps the rate of 2.0

  TransitionEffects fx = apply_transition(2, out, y.c, y.p, ctx);
  EXPECT_DOUBLE_EQ(fx.fetched, 1.5);
  EXPECT_DOUBLE_EQ(y.c.agents[2].load, 2.0);
  EXPECT_DOUBLE_EQ(y.c.stocks[0], 3.5);
  EXPECT_DOUBLE_EQ(y.p.areas[0].index, 0.5 + 0.5 * 0.35);  // tidiness follows stock
}

TEST(Decide, FetchRateDropsWithInvaders) {
  Yard y;
  y.c.pools[2] = PoolLabel::On;
  y.c.agents[2].mode = AgentMode::Fetching;
  y.c.agents[2].paused_task = 2;
  y.c.agents[2].load = 0.0;
  y.p.poses[0].position = {10.5, 3.0};  // inside the storage area

  DecisionOutcome out = decide(2, y.c, y.p, y.ctx());
  ASSERT_EQ(out.rule, RuleCode::FetchMaterials);
  EXPECT_DOUBLE_EQ(out.fetch_delta, 2.0 * (1.0 - 0.1));
}

TEST(Decide, FetchingCompletedRestoresPausedTarget) {
  Yard y;
  y.c.pools[2] = PoolLabel::On;
  y.c.agents[2].mode = AgentMode::Fetching;
  y.c.agents[2].paused_task = 2;
  y.c.agents[2].load = 2.0;  // at capacity
  auto ctx = y.ctx();

  DecisionOutcome out = decide(2, y.c, y.p, ctx);
  ASSERT_EQ(out.rule, RuleCode::FetchingCompleted);
  ASSERT_TRUE(out.new_scope.has_value());
  EXPECT_EQ(*out.new_scope, std::vector<ObjectRef>{ObjectRef::component(1)});

  apply_transition(2, out, y.c, y.p, ctx);
  EXPECT_EQ(y.c.agents[2].mode, AgentMode::TargetReaching);
  EXPECT_EQ(y.c.agents[2].target_scope, std::vector<ObjectRef>{ObjectRef::component(1)});
  EXPECT_EQ(y.c.agents[2].paused_task, 2);  // still paused until resumed
}

TEST(Decide, CraneRestockWhenStorageLow) {
  Yard y;
  y.c.stocks[0] = 0.2;
  y.c.pools[2] = PoolLabel::On;
  y.c.agents[2].mode = AgentMode::Fetching;
  y.c.agents[2].paused_task = 2;
  y.c.agents[2].load = 0.0;
  auto ctx = y.ctx(3);

  DecisionOutcome out = decide(2, y.c, y.p, ctx);
  ASSERT_EQ(out.rule, RuleCode::RequestCraneMaterial);
  EXPECT_EQ(out.storage, 0);

  TransitionEffects fx = apply_transition(2, out, y.c, y.p, ctx);
  EXPECT_TRUE(fx.crane_requested);
  ASSERT_EQ(y.c.crane_queue.size(), 1u);
  EXPECT_EQ(y.c.crane_queue[0].kind, CraneRequest::Kind::Material);
  EXPECT_EQ(y.c.crane_queue[0].storage, 0);
  EXPECT_EQ(y.c.agents[2].mode, AgentMode::Waiting);
}

TEST(Decide, ArrivalAtStockedStorageStartsFetching) {
  Yard y;
  auto& st = y.c.agents[2];
  st.paused_task = 2;
  st.target_scope = {ObjectRef::storage(0)};
  st.target_values = {0.4};
  y.p.poses[2].position = y.s.storages[0].position();
  auto ctx = y.ctx();

  DecisionOutcome out = decide(2, y.c, y.p, ctx);
  ASSERT_EQ(out.rule, RuleCode::FetchMaterials);
  EXPECT_TRUE(out.arrival);
  EXPECT_EQ(out.arrived_at, ObjectRef::storage(0));
  EXPECT_DOUBLE_EQ(out.fetch_delta, 2.0);  // full load in one draw

  TransitionEffects fx = apply_transition(2, out, y.c, y.p, ctx);
  EXPECT_DOUBLE_EQ(fx.arrival_value, 0.4);
  EXPECT_EQ(st.mode, AgentMode::Fetching);
  EXPECT_DOUBLE_EQ(st.load, 2.0);
  EXPECT_DOUBLE_EQ(y.c.stocks[0], 3.0);
  EXPECT_TRUE(st.target_scope.empty());
}

TEST(Decide, ArrivalAtDrainedStorageAsksForRestock) {
  Yard y;
  y.c.stocks[0] = 0.2;
  auto& st = y.c.agents[2];
  st.paused_task = 2;
  st.target_scope = {ObjectRef::storage(0)};
  st.target_values = {0.4};
  y.p.poses[2].position = y.s.storages[0].position();
  auto ctx = y.ctx();

  DecisionOutcome out = decide(2, y.c, y.p, ctx);
  ASSERT_EQ(out.rule, RuleCode::RequestCraneMaterial);
  EXPECT_TRUE(out.arrival);

  apply_transition(2, out, y.c, y.p, ctx);
  EXPECT_EQ(st.mode, AgentMode::Waiting);
  EXPECT_TRUE(st.target_scope.empty());
}

TEST(Decide, ResumeAtPausedComponent) {
  Yard y;
  y.c.pools[2] = PoolLabel::On;
  auto& st = y.c.agents[2];
  st.paused_task = 2;
  st.load = 2.0;
  st.target_scope = {ObjectRef::component(1)};
  st.target_values = {0.9};
  y.p.poses[2].position = y.s.components[1].position();
  auto ctx = y.ctx();

  DecisionOutcome out = decide(2, y.c, y.p, ctx);
  ASSERT_EQ(out.rule, RuleCode::ResumeTask);
  EXPECT_EQ(out.task, 2);
  EXPECT_TRUE(out.arrival);

  apply_transition(2, out, y.c, y.p, ctx);
  EXPECT_EQ(st.mode, AgentMode::Tasking);
  EXPECT_EQ(st.current_task, 2);
  EXPECT_EQ(st.paused_task, -1);
  EXPECT_TRUE(st.target_scope.empty());
}

TEST(Decide, AcquireTargetsWhenScopeEmpty) {
  Yard y;
  auto ctx = y.ctx();
  DecisionOutcome out = decide(0, y.c, y.p, ctx);
  ASSERT_EQ(out.rule, RuleCode::AcquireTarget);
  ASSERT_TRUE(out.new_scope.has_value());
  EXPECT_EQ(*out.new_scope, std::vector<ObjectRef>{ObjectRef::component(0)});
  EXPECT_FALSE(out.deregister);

  apply_transition(0, out, y.c, y.p, ctx);
  EXPECT_EQ(y.c.agents[0].target_scope, std::vector<ObjectRef>{ObjectRef::component(0)});
  EXPECT_EQ(y.c.agents[0].target_values, std::vector<double>{0.0});
}

TEST(Decide, BlockedTaskKeepsScopeEmpty) {
  Yard y;
  y.p.register_task_area(y.s, 1);  // overlaps jc-0's would-be area
  EXPECT_EQ(decide(0, y.c, y.p, y.ctx()).rule, RuleCode::None);
}

TEST(Decide, DeregisterAtOutlet) {
  Yard y;
  y.c.pools[0] = PoolLabel::End;
  y.c.pools[1] = PoolLabel::End;
  auto& st = y.c.agents[0];
  st.target_scope = {ObjectRef::outlet()};
  st.target_values = {1.0};
  y.p.poses[0].position = y.s.outlet;
  auto ctx = y.ctx();

  DecisionOutcome out = decide(0, y.c, y.p, ctx);
  ASSERT_EQ(out.rule, RuleCode::AcquireTarget);
  EXPECT_TRUE(out.deregister);
  EXPECT_TRUE(out.arrival);
  EXPECT_EQ(out.arrived_at, ObjectRef::outlet());

  apply_transition(0, out, y.c, y.p, ctx);
  EXPECT_EQ(st.mode, AgentMode::Deregistered);
  EXPECT_TRUE(st.target_scope.empty());
}

TEST(Decide, StageFlagsShortCircuitDurationsAndStock) {
  Yard y;
  StageFlags stage{true, true, true};
  DecisionContext ctx{y.s, stage, 1.0, 5};

  // Material-consuming task with an empty load: infinite stock removes the
  // pause, zero durations complete the whole quantity at initiation.
  y.c.agents[2].target_scope = {ObjectRef::component(1)};
  y.c.agents[2].target_values = {0.6};
  y.p.poses[2].position = y.s.components[1].position();
  DecisionOutcome out = decide(2, y.c, y.p, ctx);
  ASSERT_EQ(out.rule, RuleCode::InitiateTask);

  TransitionEffects fx = apply_transition(2, out, y.c, y.p, ctx);
  EXPECT_EQ(fx.completed_task, 2);
  EXPECT_EQ(y.c.pools[2], PoolLabel::End);
  EXPECT_DOUBLE_EQ(y.c.progress[2], 4.0);
  EXPECT_EQ(y.c.agents[2].mode, AgentMode::TargetReaching);
  EXPECT_LT(y.p.area_of_task(2), 0);  // no area lingers for instant tasks
}

TEST(Decide, GuardsThrowOnInconsistentState) {
  Yard y;
  y.c.agents[0].mode = AgentMode::Tasking;
  y.c.agents[0].current_task = -1;
  EXPECT_THROW(decide(0, y.c, y.p, y.ctx()), ContractViolation);

  Yard z;
  DecisionOutcome bad;
  bad.rule = RuleCode::InitiateTask;
  bad.task = 1;  // still waiting on its predecessor
  auto ctx = z.ctx();
  EXPECT_THROW(apply_transition(0, bad, z.c, z.p, ctx), ContractViolation);

  Yard w;
  DecisionOutcome exec;
  exec.rule = RuleCode::ExecuteTask;
  exec.task = 0;
  exec.work_delta = 1.0;
  auto wctx = w.ctx();
  EXPECT_THROW(apply_transition(0, exec, w.c, w.p, wctx), ContractViolation);
}

TEST(Reach, DistanceFollowsPendingTaskArea) {
  Yard y;
  double r = y.s.crews[2].radius();
  // g-0 is queued for the grouting crew, so its working radius applies.
  EXPECT_DOUBLE_EQ(reach_distance(y.c, y.s, 2, ObjectRef::component(1)), 2.0 + r);
  EXPECT_DOUBLE_EQ(reach_distance(y.c, y.s, 2, ObjectRef::storage(0)),
                   y.s.storages[0].area_radius() + r);
  EXPECT_DOUBLE_EQ(reach_distance(y.c, y.s, 2, ObjectRef::outlet()), 1.0 + r);
}

TEST(Blocking, OverlappingAreaBlocksQueueTask) {
  Yard y;
  EXPECT_FALSE(task_spatially_blocked(y.p, y.s, 0));
  y.p.register_task_area(y.s, 1);
  EXPECT_TRUE(task_spatially_blocked(y.p, y.s, 0));
  // Feasible targets drop the blocked component entirely.
  EXPECT_TRUE(feasible_targets(y.c, y.p, y.s, CrewType::JCC).empty());
}

TEST(Idle, CauseClassification) {
  Yard y;
  // hi-0 still waits on jc-0: precedence.
  EXPECT_EQ(classify_idle_cause(y.c, y.s, 1), IdleCause::Precedence);
  // jc-0 is queued (spatial block assumed): space.
  EXPECT_EQ(classify_idle_cause(y.c, y.s, 0), IdleCause::Space);
  // Everything of the grout trade done: exhausted.
  y.c.pools[2] = PoolLabel::End;
  EXPECT_EQ(classify_idle_cause(y.c, y.s, 2), IdleCause::Exhausted);
  // Not idle while holding a scope, a paused task, or a different mode.
  y.c.agents[0].target_scope = {ObjectRef::component(0)};
  EXPECT_EQ(classify_idle_cause(y.c, y.s, 0), IdleCause::None);
  y.c.agents[1].paused_task = 1;
  EXPECT_EQ(classify_idle_cause(y.c, y.s, 1), IdleCause::None);
  y.c.agents[2].mode = AgentMode::Waiting;
  EXPECT_EQ(classify_idle_cause(y.c, y.s, 2), IdleCause::None);
}

}  // namespace
}  // namespace cmdp
