#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "cmdp/environment.hpp"
#include "cmdp/errors.hpp"
#include "cmdp/perception.hpp"
#include "cmdp/rng.hpp"
#include "cmdp/runner.hpp"

namespace cmdp {

// ----- closed-form target priority -------------------------------------------

struct PriorityWeights {
  double beta1 = 1.0;   // successor pull
  double beta2 = 0.5;   // proximity pull
  double beta3 = -1.0;  // space-conflict push
};

struct PriorityFeatures {
  double suc = 0.0;  // downstream tasks unlocked by the target task
  double dis = 0.0;  // distance agent -> target, m
  double spa = 0.0;  // ready tasks competing for the same space
};

// V' = b1*Suc/max + b2*(1 - Dis/max) + b3*Spa/max over the candidate set;
// a zero maximum makes its normalized share 0.
inline double priority_value(const PriorityFeatures& f, const PriorityFeatures& maxima,
                             const PriorityWeights& w) {
  auto norm = [](double v, double m) { return m > 0.0 ? v / m : 0.0; };
  return w.beta1 * norm(f.suc, maxima.suc) + w.beta2 * (1.0 - norm(f.dis, maxima.dis)) +
         w.beta3 * norm(f.spa, maxima.spa);
}

inline PriorityFeatures target_features(const ConstructionState& c, const PhysicalState& p,
                                        const Scenario& s, int agent, const ObjectRef& ref) {
  PriorityFeatures f;
  f.dis = distance(p.poses[agent].position, object_position(s, ref));
  if (ref.kind != ObjectKind::Component) return f;
  const AgentStatus& st = c.agents[agent];
  int task = -1;
  if (st.paused_task >= 0 && s.tasks[st.paused_task].component == ref.index)
    task = st.paused_task;
  else
    task = executable_task_of_type(c, s, ref.index, s.crews[agent].crew);
  if (task < 0) return f;
  f.suc = s.tasks[task].transitive_successors;
  f.spa = space_conflicts(c, s, task, false);
  return f;
}

// Prices every target in the agent's current scope by the closed-form rule.
inline std::map<ObjectRef, double> heuristic_scope_values(const ConstructionState& c,
                                                          const PhysicalState& p,
                                                          const Scenario& s, int agent,
                                                          const PriorityWeights& w) {
  const AgentStatus& st = c.agents[agent];
  std::vector<PriorityFeatures> features;
  features.reserve(st.target_scope.size());
  PriorityFeatures maxima;
  for (const auto& ref : st.target_scope) {
    features.push_back(target_features(c, p, s, agent, ref));
    maxima.suc = std::max(maxima.suc, features.back().suc);
    maxima.dis = std::max(maxima.dis, features.back().dis);
    maxima.spa = std::max(maxima.spa, features.back().spa);
  }
  std::map<ObjectRef, double> out;
  for (std::size_t k = 0; k < st.target_scope.size(); ++k)
    out[st.target_scope[k]] = priority_value(features[k], maxima, w);
  return out;
}

inline std::function<std::map<ObjectRef, double>(const Environment&, int)> make_heuristic_valuer(
    const PriorityWeights& w) {
  return [w](const Environment& env, int agent) {
    return heuristic_scope_values(env.episode().construction, env.episode().physical,
                                  env.scenario(), agent, w);
  };
}

inline RunOutcome run_priority_baseline(Environment& env, std::uint64_t seed,
                                        const PriorityWeights& weights, const Drivers& movement,
                                        const StepHook& on_step = {}) {
  Drivers d = movement;
  d.eval_point = {};
  d.eval_values = make_heuristic_valuer(weights);
  return run_episode(env, seed, d, on_step);
}

// ----- genetic algorithm over task priorities ---------------------------------

struct GAConfig {
  int population = 40;
  int generations = 100;
  double crossover_rate = 0.8;
  double mutation_rate = 0.1;  // per gene
  double mutation_sigma = 0.1;
  int elitism = 2;
  int tournament = 3;
  double w_idle = 0.1;                  // idle-step weight in the fitness
  double w_unfinished = 1000.0;         // penalty per task left unfinished
  bool reseed_each_generation = false;  // vary the evaluation episode seed
  std::uint64_t seed = 1;
};

inline void validate_ga_config(const GAConfig& cfg) {
  if (cfg.population < 2) throw ValidationError("population must be at least 2");
  if (cfg.elitism < 1) throw ValidationError("elitism must keep at least one chromosome");
  if (cfg.elitism >= cfg.population) throw ValidationError("elitism must leave room for children");
  if (cfg.tournament < 1) throw ValidationError("tournament size must be positive");
}

struct Chromosome {
  std::vector<double> genes;  // one priority in [0,1] per task
  double fitness = 0.0;       // lower is better
};

// Prices scope targets by the chromosome: components read the gene of their
// pending task, storages the gene of the task being supplied.
inline std::map<ObjectRef, double> gene_scope_values(const std::vector<double>& genes,
                                                     const ConstructionState& c,
                                                     const Scenario& s, int agent) {
  const AgentStatus& st = c.agents[agent];
  std::map<ObjectRef, double> out;
  for (const auto& ref : st.target_scope) {
    double v = 0.0;
    if (ref.kind == ObjectKind::Component) {
      int task = -1;
      if (st.paused_task >= 0 && s.tasks[st.paused_task].component == ref.index)
        task = st.paused_task;
      else
        task = executable_task_of_type(c, s, ref.index, s.crews[agent].crew);
      if (task >= 0) v = genes[task];
    } else if (ref.kind == ObjectKind::Storage && st.paused_task >= 0) {
      v = genes[st.paused_task];
    }
    out[ref] = v;
  }
  return out;
}

inline std::function<std::map<ObjectRef, double>(const Environment&, int)> make_gene_valuer(
    const std::vector<double>& genes) {
  return [&genes](const Environment& env, int agent) {
    return gene_scope_values(genes, env.episode().construction, env.scenario(), agent);
  };
}

inline double ga_fitness(const RunOutcome& run, int task_count, const GAConfig& cfg) {
  int unfinished = task_count - run.tasks_completed;
  return static_cast<double>(run.ticks) + cfg.w_idle * run.stats.idle_ticks() +
         cfg.w_unfinished * unfinished;
}

struct GAResult {
  Chromosome best;
  std::vector<double> best_fitness_history;  // best evaluated, per generation
};

// Tournament selection, uniform crossover, per-gene Gaussian mutation,
// elitism. Fitness = episode ticks + w_idle * idle steps on an episode driven
// by the chromosome's priorities.
inline GAResult ga_optimize(Environment& env, const GAConfig& cfg, const Drivers& movement) {
  validate_ga_config(cfg);
  const int n_genes = static_cast<int>(env.scenario().tasks.size());
  const int task_count = n_genes;
  Rng rng(cfg.seed);

  auto evaluate = [&](Chromosome& ch, std::uint64_t episode_seed) {
    Drivers d = movement;
    d.eval_point = {};
    d.eval_values = make_gene_valuer(ch.genes);
    RunOutcome run = run_episode(env, episode_seed, d);
    ch.fitness = ga_fitness(run, task_count, cfg);
  };
  auto episode_seed_for = [&](int generation) {
    return cfg.reseed_each_generation ? Rng::derive_seed(cfg.seed, 1000 + generation) : cfg.seed;
  };

  std::vector<Chromosome> pop(cfg.population);
  for (auto& ch : pop) {
    ch.genes.resize(n_genes);
    for (double& g : ch.genes) g = rng.uniform();
    evaluate(ch, episode_seed_for(0));
  }

  auto by_fitness = [](const Chromosome& a, const Chromosome& b) { return a.fitness < b.fitness; };
  auto tournament_pick = [&]() -> const Chromosome& {
    int best = rng.uniform_int(cfg.population);
    for (int k = 1; k < cfg.tournament; ++k) {
      int i = rng.uniform_int(cfg.population);
      if (pop[i].fitness < pop[best].fitness) best = i;
    }
    return pop[best];
  };

  GAResult result;
  std::sort(pop.begin(), pop.end(), by_fitness);
  result.best = pop.front();
  result.best_fitness_history.push_back(pop.front().fitness);

  for (int gen = 1; gen <= cfg.generations; ++gen) {
    std::vector<Chromosome> next(pop.begin(), pop.begin() + cfg.elitism);
    while (static_cast<int>(next.size()) < cfg.population) {
      Chromosome child = tournament_pick();
      if (rng.uniform() < cfg.crossover_rate) {
        const Chromosome& other = tournament_pick();
        for (int g = 0; g < n_genes; ++g)
          if (rng.uniform() < 0.5) child.genes[g] = other.genes[g];
      }
      for (int g = 0; g < n_genes; ++g)
        if (rng.uniform() < cfg.mutation_rate)
          child.genes[g] =
              std::clamp(child.genes[g] + cfg.mutation_sigma * rng.normal(), 0.0, 1.0);
      next.push_back(std::move(child));
    }
    std::uint64_t ep_seed = episode_seed_for(gen);
    for (auto& ch : next) evaluate(ch, ep_seed);
    pop = std::move(next);
    std::sort(pop.begin(), pop.end(), by_fitness);
    if (pop.front().fitness < result.best.fitness) result.best = pop.front();
    result.best_fitness_history.push_back(pop.front().fitness);
  }
  return result;
}

}  // namespace cmdp
