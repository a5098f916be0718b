#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cmdp/baselines.hpp"
#include "cmdp/checkpoint_io.hpp"
#include "cmdp/environment.hpp"
#include "cmdp/errors.hpp"
#include "cmdp/exports.hpp"
#include "cmdp/runner.hpp"
#include "cmdp/scenario_io.hpp"
#include "cmdp/training.hpp"

namespace fs = std::filesystem;
using namespace cmdp;

namespace {

struct SimulateOpts {
  std::string scenario;
  std::string policy;
  std::string baseline;
  std::string out = "out";
  std::uint64_t seed = 1;
  long max_ticks = 60000;
  int ga_population = 16;
  int ga_generations = 20;
};

struct TrainOpts {
  std::string scenario;
  std::string config;
  std::string out = "out";
  std::string resume;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int stage = 0;  // 0 = both
  long total_steps = 0;
  long stage1_steps = -1;
};

struct CompareOpts {
  std::string scenario;
  std::vector<std::string> methods;
  std::string policy;
  std::string out = "out";
  std::uint64_t seed = 1;
  int episodes = 5;
  long max_ticks = 60000;
  int ga_population = 16;
  int ga_generations = 20;
};

struct ExportOpts {
  std::string trace;
  std::string agent;
  std::string out;
  long from_tick = 0;
  long to_tick = std::numeric_limits<long>::max();
};

void write_json_file(const std::string& path, const nlohmann::json& j) {
  auto os = open_output(path);
  os << j.dump(2) << '\n';
}

// Everything one finished episode leaves on disk.
void write_episode_outputs(const std::string& dir, const Scenario& s, const Environment& env,
                           const SimulationRecorder& rec, std::vector<std::string>& outputs) {
  auto path = [&](const std::string& name) { return (fs::path(dir) / name).string(); };

  {
    auto os = open_output(path("trace.jsonl"));
    rec.write_trace(os);
    outputs.push_back("trace.jsonl");
  }
  {
    auto os = open_output(path("agents.gantt.csv"));
    write_gantt_csv(os, "agent", rec.agent_gantt());
    outputs.push_back("agents.gantt.csv");
  }
  {
    auto os = open_output(path("tasks.gantt.csv"));
    write_gantt_csv(os, "task", build_task_gantt(s, env.episode().construction));
    outputs.push_back("tasks.gantt.csv");
  }
  std::string trace_text = [&] {
    std::ostringstream buf;
    rec.write_trace(buf);
    return buf.str();
  }();
  for (const auto& crew : s.crews) {
    std::istringstream in(trace_text);
    auto pts = trajectory_from_trace(in, crew.id);
    std::string name = "trajectory." + crew.id + ".csv";
    auto os = open_output(path(name));
    write_trajectory_csv(os, pts);
    outputs.push_back(name);
  }
  write_json_file(path("metrics.json"), metrics_to_json(rec.metrics(env)));
  outputs.push_back("metrics.json");
}

int cmd_simulate(const SimulateOpts& o) {
  Scenario s = resolve_scenario(o.scenario);
  EnvConfig ec;
  ec.max_ticks = o.max_ticks;
  Environment env(s, ec);
  SimulationRecorder rec(s);

  PolicyBundle bundle;
  std::vector<double> genes;
  GAResult ga;
  Rng policy_rng(Rng::derive_seed(o.seed, 42));
  Drivers d;
  RunOutcome out;

  fs::create_directories(o.out);
  std::vector<std::string> outputs;

  if (!o.policy.empty()) {
    bundle = load_policy_bundle(o.policy);
    d.controller = make_policy_controller(bundle.reach_actor, /*deterministic=*/true, policy_rng);
    d.eval_point = make_policy_valuer(bundle.eval_actor, /*deterministic=*/true, policy_rng);
    out = run_episode(env, o.seed, d, rec.hook());
  } else if (o.baseline == "priority") {
    d.controller = make_scripted_controller();
    out = run_priority_baseline(env, o.seed, PriorityWeights{}, d, rec.hook());
  } else {  // ga
    d.controller = make_scripted_controller();
    GAConfig gc;
    gc.population = o.ga_population;
    gc.generations = o.ga_generations;
    gc.seed = o.seed;
    Environment ga_env(s, ec);
    ga = ga_optimize(ga_env, gc, d);
    genes = ga.best.genes;
    {
      auto os = open_output((fs::path(o.out) / "ga_history.csv").string());
      write_ga_history_csv(os, ga.best_fitness_history);
      outputs.push_back("ga_history.csv");
    }
    Drivers dd = d;
    dd.eval_values = make_gene_valuer(genes);
    out = run_episode(env, o.seed, dd, rec.hook());
  }

  write_episode_outputs(o.out, s, env, rec, outputs);

  nlohmann::json config = {{"max_ticks", o.max_ticks}};
  if (!o.policy.empty()) config["policy"] = o.policy;
  if (!o.baseline.empty()) {
    config["baseline"] = o.baseline;
    if (o.baseline == "ga")
      config["ga"] = {{"population", o.ga_population}, {"generations", o.ga_generations}};
  }
  write_json_file((fs::path(o.out) / "manifest.json").string(),
                  run_manifest("simulate", s.name, o.seed, config, outputs));

  std::cout << "scenario=" << s.name << " ticks=" << out.ticks << " completed=" << out.completed
            << " tasks=" << out.tasks_completed << "/" << s.tasks.size()
            << " out=" << o.out << "\n";
  return 0;
}

int cmd_train(const TrainOpts& o) {
  Scenario s = resolve_scenario(o.scenario);
  TrainConfig tc = o.config.empty() ? TrainConfig{} : load_train_config(o.config);
  if (o.seed_set) tc.seed = o.seed;
  if (o.total_steps > 0) tc.total_steps = o.total_steps;
  if (o.stage1_steps >= 0) tc.stage1_steps = o.stage1_steps;
  if (o.stage == 1) tc.total_steps = std::min(tc.total_steps, tc.stage1_steps);
  if (o.stage == 2) tc.stage1_steps = 0;

  std::optional<TrainerState> resume;
  if (!o.resume.empty()) resume = load_checkpoint(o.resume);

  fs::create_directories(o.out);
  std::vector<std::string> outputs;
  std::optional<TrainerState> end_of_stage1;
  UpdateHook hook = [&](const TrainerState& ts, const TrainUpdateRow& row) {
    if (ts.stage == 1) end_of_stage1 = ts;
    std::cout << "update=" << row.update << " stage=" << row.stage
              << " steps=" << row.env_steps << " reach_reward=" << row.reach_reward_mean
              << " eval_reward=" << row.eval_reward_mean
              << " episode_ticks=" << row.mean_episode_ticks << "\n";
  };

  TrainResult result =
      train_two_stage(s, tc, hook, resume ? &*resume : nullptr);

  auto path = [&](const std::string& name) { return (fs::path(o.out) / name).string(); };
  if (end_of_stage1) {
    save_checkpoint(path("checkpoint_stage1.json"), *end_of_stage1);
    outputs.push_back("checkpoint_stage1.json");
  }
  save_checkpoint(path("checkpoint.json"), result.state);
  outputs.push_back("checkpoint.json");
  {
    auto os = open_output(path("curve.reaching.csv"));
    write_reaching_curve_csv(os, result.curve);
    outputs.push_back("curve.reaching.csv");
  }
  bool any_stage2 = false;
  for (const auto& row : result.curve) any_stage2 = any_stage2 || row.stage == 2;
  if (any_stage2) {
    auto os = open_output(path("curve.evaluation.csv"));
    write_evaluation_curve_csv(os, result.curve);
    outputs.push_back("curve.evaluation.csv");
  }
  write_json_file(path("manifest.json"),
                  run_manifest("train", s.name, tc.seed, train_config_to_json(tc), outputs));

  std::cout << "trained steps=" << result.state.steps_done << " updates="
            << result.state.updates_done << " stage=" << result.state.stage << " out=" << o.out
            << "\n";
  return 0;
}

int cmd_compare(const CompareOpts& o) {
  Scenario s = resolve_scenario(o.scenario);
  for (const auto& m : o.methods)
    if (m != "trained" && m != "priority" && m != "ga")
      throw ValidationError("unknown method: " + m);
  bool wants_trained =
      std::find(o.methods.begin(), o.methods.end(), "trained") != o.methods.end();
  if (wants_trained && o.policy.empty())
    throw ValidationError("method 'trained' needs --policy <checkpoint>");

  EnvConfig ec;
  ec.max_ticks = o.max_ticks;
  PolicyBundle bundle;
  if (wants_trained) bundle = load_policy_bundle(o.policy);

  std::vector<double> genes;
  if (std::find(o.methods.begin(), o.methods.end(), "ga") != o.methods.end()) {
    GAConfig gc;
    gc.population = o.ga_population;
    gc.generations = o.ga_generations;
    gc.seed = o.seed;
    Drivers d;
    d.controller = make_scripted_controller();
    Environment ga_env(s, ec);
    genes = ga_optimize(ga_env, gc, d).best.genes;
  }

  std::vector<ComparisonRow> rows;
  std::map<std::string, double> ticks_sum;
  for (const auto& method : o.methods) {
    for (int e = 0; e < o.episodes; ++e) {
      std::uint64_t ep_seed = Rng::derive_seed(o.seed, static_cast<std::uint64_t>(e));
      Environment env(s, ec);
      Rng policy_rng(Rng::derive_seed(ep_seed, 42));
      Drivers d;
      RunOutcome out;
      if (method == "trained") {
        d.controller = make_policy_controller(bundle.reach_actor, true, policy_rng);
        d.eval_point = make_policy_valuer(bundle.eval_actor, true, policy_rng);
        out = run_episode(env, ep_seed, d);
      } else if (method == "priority") {
        d.controller = make_scripted_controller();
        out = run_priority_baseline(env, ep_seed, PriorityWeights{}, d);
      } else {
        d.controller = make_scripted_controller();
        d.eval_values = make_gene_valuer(genes);
        out = run_episode(env, ep_seed, d);
      }
      rows.push_back({method, e, ep_seed, out.ticks, out.completed, out.stats.reaching_steps,
                      out.stats.idle_ticks()});
      ticks_sum[method] += static_cast<double>(out.ticks);
      std::cout << method << " episode=" << e << " ticks=" << out.ticks
                << " completed=" << out.completed << " reaching=" << out.stats.reaching_steps
                << " idle=" << out.stats.idle_ticks() << "\n";
    }
  }

  fs::create_directories(o.out);
  auto csv_path = (fs::path(o.out) / "comparison.csv").string();
  {
    auto os = open_output(csv_path);
    write_comparison_csv(os, rows);
  }
  write_json_file((fs::path(o.out) / "manifest.json").string(),
                  run_manifest("compare", s.name, o.seed,
                               {{"methods", o.methods},
                                {"episodes", o.episodes},
                                {"max_ticks", o.max_ticks}},
                               {"comparison.csv"}));

  if (o.episodes > 0) {
    for (const auto& [method, sum] : ticks_sum)
      std::cout << method << " mean_ticks=" << format_number(sum / o.episodes) << "\n";
    if (ticks_sum.count("trained") && ticks_sum.count("priority") &&
        ticks_sum["priority"] > 0.0)
      std::cout << "trained/priority mean ticks ratio="
                << format_number(ticks_sum["trained"] / ticks_sum["priority"]) << "\n";
  }
  std::cout << "wrote " << csv_path << "\n";
  return 0;
}

int cmd_export_trajectory(const ExportOpts& o) {
  auto in = open_input(o.trace);
  auto pts = trajectory_from_trace(in, o.agent, o.from_tick, o.to_tick);
  if (o.out.empty()) {
    write_trajectory_csv(std::cout, pts);
  } else {
    auto os = open_output(o.out);
    write_trajectory_csv(os, pts);
    std::cout << "wrote " << o.out << " (" << pts.size() << " rows)\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"construction crew simulation, training, and comparison"};
  app.require_subcommand(1);

  SimulateOpts so;
  auto* sim = app.add_subcommand("simulate", "run one episode and export its artifacts");
  sim->add_option("--scenario", so.scenario, "scenario name (toy, case-study) or JSON file")
      ->required();
  auto* pol = sim->add_option("--policy", so.policy, "policy checkpoint to drive the crews");
  auto* base = sim->add_option("--baseline", so.baseline, "baseline valuation to drive the crews")
                   ->check(CLI::IsMember({"priority", "ga"}));
  pol->excludes(base);
  base->excludes(pol);
  sim->add_option("--seed", so.seed, "episode seed")->envname("CMDP_SEED");
  sim->add_option("--out", so.out, "output directory");
  sim->add_option("--max-ticks", so.max_ticks, "tick cap before the episode is cut off");
  sim->add_option("--ga-population", so.ga_population, "GA population size");
  sim->add_option("--ga-generations", so.ga_generations, "GA generations");
  sim->callback([&] {
    if (so.policy.empty() && so.baseline.empty())
      throw CLI::RequiredError("simulate needs --policy or --baseline");
  });

  TrainOpts to;
  auto* trn = app.add_subcommand("train", "train the two policies with the staged curriculum");
  trn->add_option("--scenario", to.scenario, "scenario name (toy, case-study) or JSON file")
      ->required();
  trn->add_option("--config", to.config, "training config JSON");
  trn->add_option("--out", to.out, "output directory");
  trn->add_option("--resume", to.resume, "checkpoint to continue from");
  auto* seed_opt = trn->add_option("--seed", to.seed, "training seed (overrides config)")
                       ->envname("CMDP_SEED");
  trn->add_option("--stage", to.stage, "restrict to one curriculum stage")
      ->check(CLI::IsMember({1, 2}));
  trn->add_option("--total-steps", to.total_steps, "override total env-step budget");
  trn->add_option("--stage1-steps", to.stage1_steps, "override pre-training env-step budget");
  trn->callback([&] { to.seed_set = seed_opt->count() > 0; });

  CompareOpts co;
  auto* cmp = app.add_subcommand("compare", "benchmark methods over repeated episodes");
  cmp->add_option("--scenario", co.scenario, "scenario name (toy, case-study) or JSON file")
      ->required();
  cmp->add_option("--methods", co.methods, "comma list of: trained, priority, ga")
      ->required()
      ->delimiter(',');
  cmp->add_option("--policy", co.policy, "checkpoint for the trained method");
  cmp->add_option("--episodes", co.episodes, "episodes per method")->check(CLI::NonNegativeNumber);
  cmp->add_option("--seed", co.seed, "base seed; episode e uses a derived seed")
      ->envname("CMDP_SEED");
  cmp->add_option("--out", co.out, "output directory");
  cmp->add_option("--max-ticks", co.max_ticks, "tick cap per episode");
  cmp->add_option("--ga-population", co.ga_population, "GA population size");
  cmp->add_option("--ga-generations", co.ga_generations, "GA generations");

  ExportOpts eo;
  auto* exp = app.add_subcommand("export-trajectory", "extract one agent's path from a trace");
  exp->add_option("--trace", eo.trace, "trace.jsonl produced by simulate")->required();
  exp->add_option("--agent", eo.agent, "agent id")->required();
  exp->add_option("--from", eo.from_tick, "first tick (inclusive)");
  exp->add_option("--to", eo.to_tick, "last tick (inclusive)");
  exp->add_option("--out", eo.out, "output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
    if (sim->parsed()) return cmd_simulate(so);
    if (trn->parsed()) return cmd_train(to);
    if (cmp->parsed()) return cmd_compare(co);
    if (exp->parsed()) return cmd_export_trajectory(eo);
    return 1;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
