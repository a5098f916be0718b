#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "cmdp/net.hpp"
#include "cmdp/physics.hpp"
#include "cmdp/rng.hpp"
#include "cmdp/scenario.hpp"
#include "cmdp/taskflow.hpp"

namespace cmdp {

inline constexpr double kLogTwoPi = 1.8378770664093453;  // log(2*pi)

// ----- target evaluation head: squashed 2-d Gaussian ------------------------

// Actor emitting a point in [-1,1]^2; targets are valued by how close their
// normalized coordinates come to that point.
struct GaussianActor {
  Mlp net;                      // observation -> action mean (2 outputs)
  std::vector<double> log_std;  // state-independent, learned

  static GaussianActor make(int obs_size, int hidden, Rng& rng) {
    GaussianActor a;
    a.net = Mlp({obs_size, hidden, hidden, 2}, rng);
    a.log_std.assign(2, -0.5);
    return a;
  }

  bool operator==(const GaussianActor&) const = default;
};

struct GaussianSample {
  std::array<double, 2> action{};  // clamped to [-1, 1]
  double log_prob = 0.0;           // density evaluated at the clamped action
};

inline double gaussian_log_prob(const std::vector<double>& mean,
                                const std::vector<double>& log_std,
                                const std::array<double, 2>& action) {
  double lp = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    double sigma = std::exp(log_std[i]);
    double z = (action[i] - mean[i]) / sigma;
    lp += -0.5 * z * z - log_std[i] - 0.5 * kLogTwoPi;
  }
  return lp;
}

inline double gaussian_entropy(const std::vector<double>& log_std) {
  double h = 0.0;
  for (double ls : log_std) h += ls + 0.5 * (kLogTwoPi + 1.0);
  return h;
}

inline GaussianSample sample_gaussian(const GaussianActor& actor,
                                      const std::vector<double>& obs, Rng& rng) {
  std::vector<double> mean = actor.net.forward(obs);
  GaussianSample s;
  for (std::size_t i = 0; i < 2; ++i) {
    double raw = mean[i] + std::exp(actor.log_std[i]) * rng.normal();
    s.action[i] = std::clamp(raw, -1.0, 1.0);
  }
  s.log_prob = gaussian_log_prob(mean, actor.log_std, s.action);
  return s;
}

inline GaussianSample mean_gaussian(const GaussianActor& actor, const std::vector<double>& obs) {
  std::vector<double> mean = actor.net.forward(obs);
  GaussianSample s;
  for (std::size_t i = 0; i < 2; ++i) s.action[i] = std::clamp(mean[i], -1.0, 1.0);
  s.log_prob = gaussian_log_prob(mean, actor.log_std, s.action);
  return s;
}

// Value of one target under an evaluation action: one minus the planar
// distance between the action point and the target's normalized position.
// Bounded by [1 - 2*sqrt(2), 1].
inline double target_value(const std::array<double, 2>& action, double x_norm, double y_norm) {
  double dx = action[0] - x_norm;
  double dy = action[1] - y_norm;
  return 1.0 - std::sqrt(dx * dx + dy * dy);
}

inline std::vector<double> value_scope(const std::array<double, 2>& action, const Scenario& s,
                                       const std::vector<ObjectRef>& scope) {
  std::vector<double> values;
  values.reserve(scope.size());
  for (const auto& ref : scope) {
    Vec2 pos = object_position(s, ref);
    values.push_back(target_value(action, pos.x / s.plane_width, pos.y / s.plane_height));
  }
  return values;
}

// ----- target reaching head: three categorical factors ----------------------

inline constexpr std::array<int, 3> kReachHeads = {4, 3, 3};
inline constexpr int kReachLogits = 10;
inline constexpr std::array<double, 4> kForwardFractions = {0.0, 0.3, 0.8, 1.0};
inline constexpr std::array<double, 3> kLateralSigns = {-1.0, 0.0, 1.0};
inline constexpr std::array<double, 3> kTurnSigns = {-1.0, 0.0, 1.0};

struct ReachingActor {
  Mlp net;  // observation -> concatenated head logits

  static ReachingActor make(int obs_size, int hidden, Rng& rng) {
    return {Mlp({obs_size, hidden, hidden, kReachLogits}, rng)};
  }

  bool operator==(const ReachingActor&) const = default;
};

struct ReachAction {
  int forward = 0;
  int lateral = 1;  // index into kLateralSigns; 1 = none
  int turn = 1;

  bool operator==(const ReachAction&) const = default;
};

struct ReachSample {
  ReachAction action;
  double log_prob = 0.0;
};

namespace detail {

inline std::vector<double> softmax(const double* logits, int n) {
  double mx = logits[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
  std::vector<double> p(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += (p[i] = std::exp(logits[i] - mx));
  for (double& v : p) v /= sum;
  return p;
}

inline int sample_index(const std::vector<double>& probs, Rng& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

inline int argmax_index(const std::vector<double>& probs) {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

}  // namespace detail

inline std::array<std::vector<double>, 3> reach_head_probs(const std::vector<double>& logits) {
  std::array<std::vector<double>, 3> heads;
  int at = 0;
  for (int h = 0; h < 3; ++h) {
    heads[h] = detail::softmax(logits.data() + at, kReachHeads[h]);
    at += kReachHeads[h];
  }
  return heads;
}

inline double reach_log_prob(const std::vector<double>& logits, const ReachAction& a) {
  auto heads = reach_head_probs(logits);
  return std::log(heads[0][a.forward]) + std::log(heads[1][a.lateral]) +
         std::log(heads[2][a.turn]);
}

inline double reach_entropy(const std::vector<double>& logits) {
  auto heads = reach_head_probs(logits);
  double h = 0.0;
  for (const auto& p : heads)
    for (double v : p)
      if (v > 0.0) h -= v * std::log(v);
  return h;
}

inline ReachSample sample_reaching(const ReachingActor& actor, const std::vector<double>& obs,
                                   Rng& rng) {
  std::vector<double> logits = actor.net.forward(obs);
  auto heads = reach_head_probs(logits);
  ReachSample s;
  s.action.forward = detail::sample_index(heads[0], rng);
  s.action.lateral = detail::sample_index(heads[1], rng);
  s.action.turn = detail::sample_index(heads[2], rng);
  s.log_prob = std::log(heads[0][s.action.forward]) + std::log(heads[1][s.action.lateral]) +
               std::log(heads[2][s.action.turn]);
  return s;
}

inline ReachSample mode_reaching(const ReachingActor& actor, const std::vector<double>& obs) {
  std::vector<double> logits = actor.net.forward(obs);
  auto heads = reach_head_probs(logits);
  ReachSample s;
  s.action.forward = detail::argmax_index(heads[0]);
  s.action.lateral = detail::argmax_index(heads[1]);
  s.action.turn = detail::argmax_index(heads[2]);
  s.log_prob = std::log(heads[0][s.action.forward]) + std::log(heads[1][s.action.lateral]) +
               std::log(heads[2][s.action.turn]);
  return s;
}

// Discrete action -> motion request in the crew's own speed envelope.
inline MotionCommand action_to_command(const ReachAction& a, const AgentSpec& spec) {
  MotionCommand cmd;
  cmd.forward = kForwardFractions[a.forward] * spec.v_forward;
  cmd.lateral = kLateralSigns[a.lateral] * spec.v_lateral;
  cmd.turn = kTurnSigns[a.turn] * spec.v_turn;
  return cmd;
}

// ----- bundles ---------------------------------------------------------------

// Everything needed to run (and keep training) the two-level policy.
struct PolicyBundle {
  GaussianActor eval_actor;
  ReachingActor reach_actor;
  Mlp eval_critic;   // global state -> value
  Mlp reach_critic;  // global state -> value

  bool operator==(const PolicyBundle&) const = default;
};

inline PolicyBundle make_policy_bundle(int eval_obs, int reach_obs, int global_state,
                                       int hidden, Rng& rng) {
  PolicyBundle b;
  b.eval_actor = GaussianActor::make(eval_obs, hidden, rng);
  b.reach_actor = ReachingActor::make(reach_obs, hidden, rng);
  b.eval_critic = Mlp({global_state, hidden, hidden, 1}, rng);
  b.reach_critic = Mlp({global_state, hidden, hidden, 1}, rng);
  return b;
}

}  // namespace cmdp
