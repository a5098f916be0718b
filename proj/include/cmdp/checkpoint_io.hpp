#pragma once

#include <fstream>
#include <string>

#include "json.hpp"

#include "cmdp/errors.hpp"
#include "cmdp/net.hpp"
#include "cmdp/policy.hpp"
#include "cmdp/training.hpp"

namespace cmdp {

inline nlohmann::json net_to_json(const Mlp& net) {
  return {{"sizes", net.sizes()}, {"params", net.params()}};
}

inline Mlp net_from_json(const nlohmann::json& j) {
  Mlp net;
  net.set_shape(j.at("sizes").get<std::vector<int>>(),
                j.at("params").get<std::vector<double>>());
  return net;
}

inline nlohmann::json adam_to_json(const AdamState& a) {
  return {{"m", a.m}, {"v", a.v}, {"step", a.step}};
}

inline AdamState adam_from_json(const nlohmann::json& j) {
  AdamState a;
  a.m = j.at("m").get<std::vector<double>>();
  a.v = j.at("v").get<std::vector<double>>();
  a.step = j.at("step").get<long>();
  return a;
}

inline nlohmann::json bundle_to_json(const PolicyBundle& b) {
  return {{"eval_actor", {{"net", net_to_json(b.eval_actor.net)},
                          {"log_std", b.eval_actor.log_std}}},
          {"reach_actor", {{"net", net_to_json(b.reach_actor.net)}}},
          {"eval_critic", net_to_json(b.eval_critic)},
          {"reach_critic", net_to_json(b.reach_critic)}};
}

inline PolicyBundle bundle_from_json(const nlohmann::json& j) {
  PolicyBundle b;
  b.eval_actor.net = net_from_json(j.at("eval_actor").at("net"));
  b.eval_actor.log_std = j.at("eval_actor").at("log_std").get<std::vector<double>>();
  b.reach_actor.net = net_from_json(j.at("reach_actor").at("net"));
  b.eval_critic = net_from_json(j.at("eval_critic"));
  b.reach_critic = net_from_json(j.at("reach_critic"));
  return b;
}

inline nlohmann::json trainer_to_json(const TrainerState& ts) {
  nlohmann::json j;
  j["format"] = 1;
  j["kind"] = "cmdp-checkpoint";
  j["steps_done"] = ts.steps_done;
  j["stage"] = ts.stage;
  j["updates_done"] = ts.updates_done;
  j["bundle"] = bundle_to_json(ts.bundle);
  j["adam"] = {{"eval_actor", adam_to_json(ts.opt_eval_actor)},
               {"eval_log_std", adam_to_json(ts.opt_eval_log_std)},
               {"reach_actor", adam_to_json(ts.opt_reach_actor)},
               {"eval_critic", adam_to_json(ts.opt_eval_critic)},
               {"reach_critic", adam_to_json(ts.opt_reach_critic)}};
  return j;
}

inline TrainerState trainer_from_json(const nlohmann::json& j) {
  TrainerState ts;
  try {
    ts.steps_done = j.at("steps_done").get<long>();
    ts.stage = j.at("stage").get<int>();
    ts.updates_done = j.at("updates_done").get<long>();
    ts.bundle = bundle_from_json(j.at("bundle"));
    const auto& ja = j.at("adam");
    ts.opt_eval_actor = adam_from_json(ja.at("eval_actor"));
    ts.opt_eval_log_std = adam_from_json(ja.at("eval_log_std"));
    ts.opt_reach_actor = adam_from_json(ja.at("reach_actor"));
    ts.opt_eval_critic = adam_from_json(ja.at("eval_critic"));
    ts.opt_reach_critic = adam_from_json(ja.at("reach_critic"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint: ") + e.what());
  }
  return ts;
}

inline void save_checkpoint(const std::string& path, const TrainerState& ts) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write checkpoint: " + path);
  out << trainer_to_json(ts).dump(2) << "\n";
}

inline TrainerState load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint JSON: ") + e.what());
  }
  return trainer_from_json(j);
}

// Accepts either a full checkpoint or a bare policy bundle document.
inline PolicyBundle load_policy_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read policy file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad policy JSON: ") + e.what());
  }
  try {
    return bundle_from_json(j.contains("bundle") ? j.at("bundle") : j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad policy file: ") + e.what());
  }
}

// ----- configuration documents -------------------------------------------------
// Absent keys keep their defaults, so sparse config files stay valid as the
// configuration grows.

inline nlohmann::json env_config_to_json(const EnvConfig& c) {
  nlohmann::json j;
  j["dt"] = c.dt;
  j["max_ticks"] = c.max_ticks;
  j["reevaluate_period"] = c.reevaluate_period;
  j["stage"] = {{"zero_durations", c.stage.zero_durations},
                {"infinite_stock", c.stage.infinite_stock},
                {"instant_crane", c.stage.instant_crane}};
  j["perception"] = {{"n_frontal", c.perception.n_frontal},
                     {"m_surround", c.perception.m_surround},
                     {"sight_distance", c.perception.sight_distance},
                     {"field_of_view_deg", c.perception.field_of_view_deg},
                     {"surround_distance", c.perception.surround_distance}};
  j["rewards"] = {{"w_idle_precedence", c.rewards.w_idle_precedence},
                  {"w_idle_area", c.rewards.w_idle_area},
                  {"w_efficiency", c.rewards.w_efficiency},
                  {"w_episode", c.rewards.w_episode},
                  {"w_path", c.rewards.w_path},
                  {"episode_ref_ticks", c.rewards.episode_ref_ticks},
                  {"path_ref_steps", c.rewards.path_ref_steps},
                  {"collision_base", c.rewards.collision_base},
                  {"eta_agents", c.rewards.eta_agents},
                  {"eta_passable", c.rewards.eta_passable},
                  {"k_reach", c.rewards.k_reach},
                  {"r_time", c.rewards.r_time},
                  {"gamma", c.rewards.gamma}};
  return j;
}

inline EnvConfig env_config_from_json(const nlohmann::json& j) {
  EnvConfig c;
  c.dt = j.value("dt", c.dt);
  c.max_ticks = j.value("max_ticks", c.max_ticks);
  c.reevaluate_period = j.value("reevaluate_period", c.reevaluate_period);
  if (j.contains("stage")) {
    const auto& js = j.at("stage");
    c.stage.zero_durations = js.value("zero_durations", c.stage.zero_durations);
    c.stage.infinite_stock = js.value("infinite_stock", c.stage.infinite_stock);
    c.stage.instant_crane = js.value("instant_crane", c.stage.instant_crane);
  }
  if (j.contains("perception")) {
    const auto& jp = j.at("perception");
    c.perception.n_frontal = jp.value("n_frontal", c.perception.n_frontal);
    c.perception.m_surround = jp.value("m_surround", c.perception.m_surround);
    c.perception.sight_distance = jp.value("sight_distance", c.perception.sight_distance);
    c.perception.field_of_view_deg =
        jp.value("field_of_view_deg", c.perception.field_of_view_deg);
    c.perception.surround_distance =
        jp.value("surround_distance", c.perception.surround_distance);
  }
  if (j.contains("rewards")) {
    const auto& jr = j.at("rewards");
    RewardConfig& r = c.rewards;
    r.w_idle_precedence = jr.value("w_idle_precedence", r.w_idle_precedence);
    r.w_idle_area = jr.value("w_idle_area", r.w_idle_area);
    r.w_efficiency = jr.value("w_efficiency", r.w_efficiency);
    r.w_episode = jr.value("w_episode", r.w_episode);
    r.w_path = jr.value("w_path", r.w_path);
    r.episode_ref_ticks = jr.value("episode_ref_ticks", r.episode_ref_ticks);
    r.path_ref_steps = jr.value("path_ref_steps", r.path_ref_steps);
    r.collision_base = jr.value("collision_base", r.collision_base);
    r.eta_agents = jr.value("eta_agents", r.eta_agents);
    r.eta_passable = jr.value("eta_passable", r.eta_passable);
    r.k_reach = jr.value("k_reach", r.k_reach);
    r.r_time = jr.value("r_time", r.r_time);
    r.gamma = jr.value("gamma", r.gamma);
  }
  return c;
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["gamma"] = c.gamma;
  j["gae_lambda"] = c.gae_lambda;
  j["clip"] = c.clip;
  j["learning_rate"] = c.learning_rate;
  j["minibatch"] = c.minibatch;
  j["epochs"] = c.epochs;
  j["rollout_ticks"] = c.rollout_ticks;
  j["n_envs"] = c.n_envs;
  j["stage1_steps"] = c.stage1_steps;
  j["total_steps"] = c.total_steps;
  j["entropy_coef"] = c.entropy_coef;
  j["value_coef"] = c.value_coef;
  j["normalize_advantages"] = c.normalize_advantages;
  j["hidden"] = c.hidden;
  j["seed"] = c.seed;
  j["env"] = env_config_to_json(c.env);
  return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.gamma = j.value("gamma", c.gamma);
  c.gae_lambda = j.value("gae_lambda", c.gae_lambda);
  c.clip = j.value("clip", c.clip);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.minibatch = j.value("minibatch", c.minibatch);
  c.epochs = j.value("epochs", c.epochs);
  c.rollout_ticks = j.value("rollout_ticks", c.rollout_ticks);
  c.n_envs = j.value("n_envs", c.n_envs);
  c.stage1_steps = j.value("stage1_steps", c.stage1_steps);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.entropy_coef = j.value("entropy_coef", c.entropy_coef);
  c.value_coef = j.value("value_coef", c.value_coef);
  c.normalize_advantages = j.value("normalize_advantages", c.normalize_advantages);
  c.hidden = j.value("hidden", c.hidden);
  c.seed = j.value("seed", c.seed);
  if (j.contains("env")) c.env = env_config_from_json(j.at("env"));
  return c;
}

inline TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad config JSON: ") + e.what());
  }
  try {
    return train_config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad config document: ") + e.what());
  }
}

}  // namespace cmdp
