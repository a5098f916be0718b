#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cmdp/environment.hpp"
#include "cmdp/errors.hpp"
#include "cmdp/rewards.hpp"
#include "cmdp/runner.hpp"
#include "cmdp/scenario.hpp"
#include "cmdp/training.hpp"

namespace cmdp {

inline constexpr const char* kCodeVersion = "0.1.0";

// Shortest round-trip decimal form; the same value always prints the same
// bytes, which keeps repeated runs byte-identical.
inline std::string format_number(double v) {
  std::array<char, 32> buf;
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw ContractViolation("number formatting failed");
  return std::string(buf.data(), end);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline const char* rule_name(RuleCode r) {
  switch (r) {
    case RuleCode::InitiateTask: return "initiate_task";
    case RuleCode::ExecuteTask: return "execute_task";
    case RuleCode::PauseTask: return "pause_task";
    case RuleCode::ResumeTask: return "resume_task";
    case RuleCode::FetchMaterials: return "fetch_materials";
    case RuleCode::FetchingCompleted: return "fetching_completed";
    case RuleCode::RequestCraneMaterial: return "request_crane_material";
    case RuleCode::RequestCraneTask: return "request_crane_task";
    case RuleCode::CompleteTask: return "complete_task";
    case RuleCode::AcquireTarget: return "acquire_target";
    default: return "none";
  }
}

inline const char* idle_cause_name(IdleCause c) {
  switch (c) {
    case IdleCause::Precedence: return "precedence";
    case IdleCause::Space: return "space";
    case IdleCause::Exhausted: return "exhausted";
    default: return "none";
  }
}

// Gantt segment label for one attributed tick.
inline const char* gantt_kind(TickBucket b) {
  switch (b) {
    case TickBucket::Movement: return "navigating";
    case TickBucket::Tasking: return "tasking";
    case TickBucket::Fetching:
    case TickBucket::Waiting: return "fetching_or_waiting";
    default: return "idle";
  }
}

// Half-open segment [start, end) of one Gantt chart row.
struct GanttRow {
  std::string row;
  std::string kind;
  long start = 0;
  long end = 0;

  bool operator==(const GanttRow&) const = default;
};

inline void write_gantt_csv(std::ostream& os, const std::string& row_header,
                            const std::vector<GanttRow>& rows) {
  os << row_header << ",kind,start_tick,end_tick\n";
  for (const auto& r : rows)
    os << csv_field(r.row) << ',' << r.kind << ',' << r.start << ',' << r.end << '\n';
}

// One completed task per row, ordered by when execution started.
inline std::vector<GanttRow> build_task_gantt(const Scenario& s, const ConstructionState& c) {
  std::vector<GanttRow> rows;
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    if (c.task_ended[i] < 0) continue;
    rows.push_back({s.tasks[i].id, "executing", c.task_started[i], c.task_ended[i] + 1});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const GanttRow& a, const GanttRow& b) { return a.start < b.start; });
  return rows;
}

struct AgentMetrics {
  std::string id;
  long navigating = 0;
  long tasking = 0;
  long fetching = 0;
  long waiting = 0;
  long idle_precedence = 0;
  long idle_space = 0;
  long idle_exhausted = 0;
  long reaching_steps = 0;  // ticks spent holding a not-yet-reached target
  long arrivals = 0;

  bool operator==(const AgentMetrics&) const = default;
};

struct MetricsRecord {
  std::string scenario;
  std::uint64_t seed = 0;
  long ticks = 0;
  bool complete = false;  // every task finished before the tick cap
  int tasks_completed = 0;
  int tasks_total = 0;
  double eval_return = 0.0;   // undiscounted sum of team rewards
  double reach_return = 0.0;  // undiscounted sum over agents
  EpisodeStats totals;
  std::vector<AgentMetrics> agents;
};

inline nlohmann::json metrics_to_json(const MetricsRecord& m) {
  nlohmann::json j;
  j["scenario"] = m.scenario;
  j["seed"] = m.seed;
  j["ticks"] = m.ticks;
  j["complete"] = m.complete;
  j["tasks_completed"] = m.tasks_completed;
  j["tasks_total"] = m.tasks_total;
  j["eval_return"] = m.eval_return;
  j["reach_return"] = m.reach_return;
  j["totals"] = {{"movement_steps", m.totals.movement_steps},
                 {"tasking_ticks", m.totals.tasking_ticks},
                 {"fetching_ticks", m.totals.fetching_ticks},
                 {"waiting_ticks", m.totals.waiting_ticks},
                 {"idle_precedence_ticks", m.totals.idle_precedence_ticks},
                 {"idle_space_ticks", m.totals.idle_space_ticks},
                 {"idle_exhausted_ticks", m.totals.idle_exhausted_ticks},
                 {"reaching_steps", m.totals.reaching_steps},
                 {"live_agent_ticks", m.totals.live_agent_ticks}};
  j["agents"] = nlohmann::json::array();
  for (const auto& a : m.agents)
    j["agents"].push_back({{"id", a.id},
                           {"navigating", a.navigating},
                           {"tasking", a.tasking},
                           {"fetching", a.fetching},
                           {"waiting", a.waiting},
                           {"idle_precedence", a.idle_precedence},
                           {"idle_space", a.idle_space},
                           {"idle_exhausted", a.idle_exhausted},
                           {"reaching_steps", a.reaching_steps},
                           {"arrivals", a.arrivals}});
  return j;
}

// Streams a line-per-record execution trace and accumulates everything the
// episode-level exports need: Gantt segments, per-agent tallies, returns.
class SimulationRecorder {
 public:
  explicit SimulationRecorder(const Scenario& s) : scenario_(&s) {
    int n = static_cast<int>(s.crews.size());
    runs_.resize(n);
    agents_.resize(n);
    for (int i = 0; i < n; ++i) agents_[i].id = s.crews[i].id;
  }

  StepHook hook() {
    return [this](const Environment& env, const StepActions& acts, const StepResult& res) {
      record(env, acts, res);
    };
  }

  void record(const Environment& env, const StepActions& acts, const StepResult& res) {
    const Episode& ep = env.episode();
    long t = ep.tick - 1;  // the step that just ran
    end_tick_ = ep.tick;
    nlohmann::json team;
    team["t"] = t;
    team["team"] = {{"efficiency", res.eval_tick_reward.efficiency},
                    {"episode", res.eval_tick_reward.episode_term},
                    {"idle_area", res.eval_tick_reward.idle_area},
                    {"idle_precedence", res.eval_tick_reward.idle_precedence},
                    {"path", res.eval_tick_reward.path_term},
                    {"total", res.eval_tick_reward.total()}};
    trace_.push_back(team.dump());
    eval_return_ += res.eval_tick_reward.total();

    for (std::size_t i = 0; i < res.agents.size(); ++i) {
      const AgentStepRecord& rec = res.agents[i];
      const AgentStatus& st = ep.construction.agents[i];
      bool live = st.mode != AgentMode::Deregistered || rec.rule != RuleCode::None;
      if (!live) continue;
      AgentMetrics& am = agents_[i];
      extend_run(static_cast<int>(i), t, gantt_kind(rec.bucket));
      switch (rec.bucket) {
        case TickBucket::Movement: ++am.navigating; break;
        case TickBucket::Tasking: ++am.tasking; break;
        case TickBucket::Fetching: ++am.fetching; break;
        case TickBucket::Waiting: ++am.waiting; break;
        case TickBucket::Idle:
          switch (rec.idle_cause) {
            case IdleCause::Space: ++am.idle_space; break;
            case IdleCause::Precedence: ++am.idle_precedence; break;
            default: ++am.idle_exhausted; break;
          }
          break;
      }
      if (rec.reach_reward.time != 0.0) ++am.reaching_steps;
      if (rec.arrived) ++am.arrivals;
      reach_return_ += rec.reach_reward.total();

      nlohmann::json row;
      row["t"] = t;
      row["a"] = am.id;
      row["m"] = to_cstring(st.mode);
      const AgentPose& pose = ep.physical.poses[i];
      row["x"] = pose.position.x;
      row["y"] = pose.position.y;
      row["bucket"] = gantt_kind(rec.bucket);
      if (rec.rule != RuleCode::None) row["rule"] = rule_name(rec.rule);
      if (rec.rule_task >= 0) row["task"] = scenario_->tasks[rec.rule_task].id;
      if (rec.bucket == TickBucket::Idle) row["cause"] = idle_cause_name(rec.idle_cause);
      if ((rec.rule == RuleCode::InitiateTask || rec.rule == RuleCode::ResumeTask) &&
          rec.rule_task >= 0)
        row["arrive"] = scenario_->components[scenario_->tasks[rec.rule_task].component].id;
      if (rec.acted) {
        auto it = acts.reach.find(static_cast<int>(i));
        if (it != acts.reach.end())
          row["act"] = {it->second.forward, it->second.lateral, it->second.turn};
      }
      if (rec.eval_consumed) {
        auto it = acts.eval.find(static_cast<int>(i));
        if (it != acts.eval.end()) row["eval"] = {it->second[0], it->second[1]};
      }
      if (rec.reach_reward.collision != 0.0) row["r_collision"] = rec.reach_reward.collision;
      if (rec.reach_reward.reach != 0.0) row["r_reach"] = rec.reach_reward.reach;
      if (rec.reach_reward.time != 0.0) row["r_time"] = rec.reach_reward.time;
      if (rec.eval_credit_released != 0.0) row["r_eval"] = rec.eval_credit_released;
      if (rec.eval_final_credit != 0.0) row["r_eval_final"] = rec.eval_final_credit;
      trace_.push_back(row.dump());
    }
  }

  // Closes open segments and pads every agent's timeline to the episode end,
  // so each row set covers [0, end) without gaps or overlaps.
  std::vector<GanttRow> agent_gantt() const {
    std::vector<GanttRow> rows;
    for (std::size_t i = 0; i < runs_.size(); ++i) {
      std::vector<GanttRow> mine = runs_[i].rows;
      if (runs_[i].open()) mine.push_back({agents_[i].id, runs_[i].kind, runs_[i].start, runs_[i].next});
      long covered = mine.empty() ? 0 : mine.back().end;
      if (covered < end_tick_) {
        if (!mine.empty() && mine.back().kind == "idle")
          mine.back().end = end_tick_;
        else
          mine.push_back({agents_[i].id, "idle", covered, end_tick_});
      }
      rows.insert(rows.end(), mine.begin(), mine.end());
    }
    return rows;
  }

  MetricsRecord metrics(const Environment& env) const {
    const Episode& ep = env.episode();
    MetricsRecord m;
    m.scenario = scenario_->name;
    m.seed = ep.seed;
    m.ticks = ep.tick;
    m.tasks_completed = ep.construction.pool_count(PoolLabel::End);
    m.tasks_total = static_cast<int>(scenario_->tasks.size());
    m.complete = ep.construction.all_tasks_done();
    m.eval_return = eval_return_;
    m.reach_return = reach_return_;
    m.totals = ep.stats;
    m.agents = agents_;
    return m;
  }

  const std::vector<std::string>& trace_lines() const { return trace_; }
  long end_tick() const { return end_tick_; }

  void write_trace(std::ostream& os) const {
    for (const auto& line : trace_) os << line << '\n';
  }

 private:
  struct Run {
    std::vector<GanttRow> rows;
    std::string kind;
    long start = 0;
    long next = 0;
    bool started = false;

    bool open() const { return started; }
  };

  void extend_run(int agent, long t, const char* kind) {
    Run& r = runs_[agent];
    if (r.started && r.kind == kind && r.next == t) {
      r.next = t + 1;
      return;
    }
    if (r.started) r.rows.push_back({agents_[agent].id, r.kind, r.start, r.next});
    r.kind = kind;
    r.start = t;
    r.next = t + 1;
    r.started = true;
  }

  const Scenario* scenario_;
  std::vector<Run> runs_;
  std::vector<AgentMetrics> agents_;
  std::vector<std::string> trace_;
  double eval_return_ = 0.0;
  double reach_return_ = 0.0;
  long end_tick_ = 0;
};

struct TrajectoryPoint {
  long tick = 0;
  double x = 0.0;
  double y = 0.0;
  std::string arrival;  // "<component>#<n>" on the agent's n-th target arrival

  bool operator==(const TrajectoryPoint&) const = default;
};

// Replays a trace stream into one agent's positions, annotating the order in
// which it arrived at construction targets. Ticks outside [from, to] are
// dropped after arrival numbering, so the numbering reflects the full run.
inline std::vector<TrajectoryPoint> trajectory_from_trace(std::istream& in,
                                                          const std::string& agent_id,
                                                          long from_tick = 0,
                                                          long to_tick = std::numeric_limits<long>::max()) {
  if (from_tick > to_tick) throw ValidationError("empty tick range");
  std::vector<TrajectoryPoint> out;
  bool seen = false;
  long arrivals = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad trace line: ") + e.what());
    }
    if (!j.contains("a")) continue;
    if (j.at("a").get<std::string>() != agent_id) continue;
    seen = true;
    TrajectoryPoint p;
    p.tick = j.at("t").get<long>();
    p.x = j.at("x").get<double>();
    p.y = j.at("y").get<double>();
    if (j.contains("arrive")) {
      ++arrivals;
      p.arrival = j.at("arrive").get<std::string>() + "#" + std::to_string(arrivals);
    }
    if (p.tick >= from_tick && p.tick <= to_tick) out.push_back(std::move(p));
  }
  if (!seen) throw ValidationError("unknown agent id: " + agent_id);
  return out;
}

inline void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryPoint>& points) {
  os << "tick,x,y,arrival\n";
  for (const auto& p : points)
    os << p.tick << ',' << format_number(p.x) << ',' << format_number(p.y) << ','
       << csv_field(p.arrival) << '\n';
}

struct ComparisonRow {
  std::string method;
  int episode = 0;
  std::uint64_t seed = 0;
  long ticks = 0;
  bool completed = false;
  long reaching_steps = 0;
  long idle_ticks = 0;
};

inline void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << "method,episode,seed,ticks,completed,reaching_steps,idle_ticks\n";
  for (const auto& r : rows)
    os << csv_field(r.method) << ',' << r.episode << ',' << r.seed << ',' << r.ticks << ','
       << (r.completed ? 1 : 0) << ',' << r.reaching_steps << ',' << r.idle_ticks << '\n';
}

inline void write_reaching_curve_csv(std::ostream& os, const std::vector<TrainUpdateRow>& rows) {
  os << "update,stage,env_steps,reward_mean,mean_episode_ticks,policy_loss,value_loss,entropy,"
        "clip_fraction\n";
  for (const auto& r : rows)
    os << r.update << ',' << r.stage << ',' << r.env_steps << ','
       << format_number(r.reach_reward_mean) << ',' << format_number(r.mean_episode_ticks) << ','
       << format_number(r.reach_diag.policy_loss) << ',' << format_number(r.reach_diag.value_loss)
       << ',' << format_number(r.reach_diag.entropy) << ','
       << format_number(r.reach_diag.clip_fraction) << '\n';
}

// Only full-dynamics updates train the evaluation policy, so pre-training-only
// rows never appear here.
inline void write_evaluation_curve_csv(std::ostream& os, const std::vector<TrainUpdateRow>& rows) {
  os << "update,stage,env_steps,reward_mean,mean_episode_ticks,policy_loss,value_loss,entropy,"
        "clip_fraction\n";
  for (const auto& r : rows) {
    if (r.stage != 2) continue;
    os << r.update << ',' << r.stage << ',' << r.env_steps << ','
       << format_number(r.eval_reward_mean) << ',' << format_number(r.mean_episode_ticks) << ','
       << format_number(r.eval_diag.policy_loss) << ',' << format_number(r.eval_diag.value_loss)
       << ',' << format_number(r.eval_diag.entropy) << ','
       << format_number(r.eval_diag.clip_fraction) << '\n';
  }
}

inline void write_ga_history_csv(std::ostream& os, const std::vector<double>& best_fitness) {
  os << "generation,best_fitness\n";
  for (std::size_t g = 0; g < best_fitness.size(); ++g)
    os << g << ',' << format_number(best_fitness[g]) << '\n';
}

// What produced a run: command, inputs, and the code version, so outputs can
// be traced back and reproduced.
inline nlohmann::json run_manifest(const std::string& command, const std::string& scenario,
                                   std::uint64_t seed, const nlohmann::json& config,
                                   const std::vector<std::string>& outputs) {
  nlohmann::json j;
  j["command"] = command;
  j["scenario"] = scenario;
  j["seed"] = seed;
  j["config"] = config;
  j["outputs"] = outputs;
  j["version"] = kCodeVersion;
  return j;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open for reading: " + path);
  return is;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  auto os = open_output(path);
  os << text;
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace cmdp
