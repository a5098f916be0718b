#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "cmdp/environment.hpp"
#include "cmdp/errors.hpp"

namespace cmdp {

namespace detail {

inline nlohmann::json vec2_to_json(const Vec2& v) { return nlohmann::json::array({v.x, v.y}); }

inline Vec2 vec2_from_json(const nlohmann::json& j) { return {j.at(0), j.at(1)}; }

inline nlohmann::json ref_to_json(const ObjectRef& r) {
  return nlohmann::json::array({static_cast<int>(r.kind), r.index});
}

inline ObjectRef ref_from_json(const nlohmann::json& j) {
  return {static_cast<ObjectKind>(j.at(0).get<int>()), j.at(1).get<int>()};
}

}  // namespace detail

inline nlohmann::json episode_to_json(const Episode& ep) {
  using nlohmann::json;
  json j;
  j["tick"] = ep.tick;
  j["seed"] = ep.seed;
  j["terminated"] = ep.terminated;
  j["rng"] = ep.rng.state();
  j["pending_eval_credit"] = ep.pending_eval_credit;
  j["last_eval_tick"] = ep.last_eval_tick;
  j["scope_valued"] = std::vector<int>(ep.scope_valued.begin(), ep.scope_valued.end());

  const EpisodeStats& st = ep.stats;
  j["stats"] = {{"movement_steps", st.movement_steps},
                {"tasking_ticks", st.tasking_ticks},
                {"fetching_ticks", st.fetching_ticks},
                {"waiting_ticks", st.waiting_ticks},
                {"idle_precedence_ticks", st.idle_precedence_ticks},
                {"idle_space_ticks", st.idle_space_ticks},
                {"idle_exhausted_ticks", st.idle_exhausted_ticks},
                {"reaching_steps", st.reaching_steps},
                {"live_agent_ticks", st.live_agent_ticks}};

  const ConstructionState& c = ep.construction;
  json jc;
  jc["pools"] = [&] {
    std::vector<int> v;
    for (auto p : c.pools) v.push_back(static_cast<int>(p));
    return v;
  }();
  jc["progress"] = c.progress;
  jc["crane_served"] = std::vector<int>(c.crane_served.begin(), c.crane_served.end());
  jc["stocks"] = c.stocks;
  jc["task_started"] = c.task_started;
  jc["task_ended"] = c.task_ended;
  jc["crane_queue"] = json::array();
  for (const auto& r : c.crane_queue)
    jc["crane_queue"].push_back({{"agent", r.agent},
                                 {"kind", static_cast<int>(r.kind)},
                                 {"storage", r.storage},
                                 {"task", r.task},
                                 {"issued_at", r.issued_at}});
  jc["agents"] = json::array();
  for (const auto& a : c.agents) {
    json ja;
    ja["mode"] = static_cast<int>(a.mode);
    ja["current_task"] = a.current_task;
    ja["paused_task"] = a.paused_task;
    ja["load"] = a.load;
    ja["tick_rate"] = a.tick_rate;
    ja["scope"] = json::array();
    for (const auto& ref : a.target_scope) ja["scope"].push_back(detail::ref_to_json(ref));
    ja["values"] = a.target_values;
    jc["agents"].push_back(std::move(ja));
  }
  j["construction"] = std::move(jc);

  const PhysicalState& p = ep.physical;
  json jp;
  jp["bounds"] = {detail::vec2_to_json(p.bounds.min), detail::vec2_to_json(p.bounds.max)};
  jp["poses"] = json::array();
  for (const auto& pose : p.poses)
    jp["poses"].push_back({{"position", detail::vec2_to_json(pose.position)},
                           {"heading_deg", pose.heading_deg},
                           {"velocity", detail::vec2_to_json(pose.velocity)}});
  jp["areas"] = json::array();
  for (const auto& a : p.areas)
    jp["areas"].push_back({{"center", detail::vec2_to_json(a.center)},
                           {"radius", a.radius},
                           {"index", a.index},
                           {"source", static_cast<int>(a.source)},
                           {"owner", a.owner}});
  j["physical"] = std::move(jp);
  return j;
}

inline Episode episode_from_json(const nlohmann::json& j) {
  Episode ep;
  try {
    ep.tick = j.at("tick").get<long>();
    ep.seed = j.at("seed").get<std::uint64_t>();
    ep.terminated = j.at("terminated").get<bool>();
    ep.rng.set_state(j.at("rng").get<std::string>());
    ep.pending_eval_credit = j.at("pending_eval_credit").get<std::vector<double>>();
    ep.last_eval_tick = j.at("last_eval_tick").get<std::vector<long>>();
    for (int v : j.at("scope_valued").get<std::vector<int>>())
      ep.scope_valued.push_back(static_cast<char>(v));

    const auto& js = j.at("stats");
    ep.stats.movement_steps = js.at("movement_steps").get<long>();
    ep.stats.tasking_ticks = js.at("tasking_ticks").get<long>();
    ep.stats.fetching_ticks = js.at("fetching_ticks").get<long>();
    ep.stats.waiting_ticks = js.at("waiting_ticks").get<long>();
    ep.stats.idle_precedence_ticks = js.at("idle_precedence_ticks").get<long>();
    ep.stats.idle_space_ticks = js.at("idle_space_ticks").get<long>();
    ep.stats.idle_exhausted_ticks = js.at("idle_exhausted_ticks").get<long>();
    ep.stats.reaching_steps = js.at("reaching_steps").get<long>();
    ep.stats.live_agent_ticks = js.at("live_agent_ticks").get<long>();

    const auto& jc = j.at("construction");
    for (int v : jc.at("pools").get<std::vector<int>>())
      ep.construction.pools.push_back(static_cast<PoolLabel>(v));
    ep.construction.progress = jc.at("progress").get<std::vector<double>>();
    for (int v : jc.at("crane_served").get<std::vector<int>>())
      ep.construction.crane_served.push_back(v != 0);
    ep.construction.stocks = jc.at("stocks").get<std::vector<double>>();
    ep.construction.task_started = jc.at("task_started").get<std::vector<long>>();
    ep.construction.task_ended = jc.at("task_ended").get<std::vector<long>>();
    for (const auto& jr : jc.at("crane_queue")) {
      CraneRequest r;
      r.agent = jr.at("agent").get<int>();
      r.kind = static_cast<CraneRequest::Kind>(jr.at("kind").get<int>());
      r.storage = jr.at("storage").get<int>();
      r.task = jr.at("task").get<int>();
      r.issued_at = jr.at("issued_at").get<long>();
      ep.construction.crane_queue.push_back(r);
    }
    for (const auto& ja : jc.at("agents")) {
      AgentStatus a;
      a.mode = static_cast<AgentMode>(ja.at("mode").get<int>());
      a.current_task = ja.at("current_task").get<int>();
      a.paused_task = ja.at("paused_task").get<int>();
      a.load = ja.at("load").get<double>();
      a.tick_rate = ja.at("tick_rate").get<double>();
      for (const auto& jr : ja.at("scope")) a.target_scope.push_back(detail::ref_from_json(jr));
      a.target_values = ja.at("values").get<std::vector<double>>();
      ep.construction.agents.push_back(std::move(a));
    }

    const auto& jp = j.at("physical");
    ep.physical.bounds.min = detail::vec2_from_json(jp.at("bounds").at(0));
    ep.physical.bounds.max = detail::vec2_from_json(jp.at("bounds").at(1));
    for (const auto& jo : jp.at("poses")) {
      AgentPose pose;
      pose.position = detail::vec2_from_json(jo.at("position"));
      pose.heading_deg = jo.at("heading_deg").get<double>();
      pose.velocity = detail::vec2_from_json(jo.at("velocity"));
      ep.physical.poses.push_back(pose);
    }
    for (const auto& ja : jp.at("areas")) {
      CongestionArea a;
      a.center = detail::vec2_from_json(ja.at("center"));
      a.radius = ja.at("radius").get<double>();
      a.index = ja.at("index").get<double>();
      a.source = static_cast<ObjectKind>(ja.at("source").get<int>());
      a.owner = ja.at("owner").get<int>();
      ep.physical.areas.push_back(a);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad episode snapshot: ") + e.what());
  }
  return ep;
}

}  // namespace cmdp
