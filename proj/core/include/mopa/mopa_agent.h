#pragma once

#include <optional>
#include <string>

#include "mopa/env.h"
#include "mopa/eval.h"
#include "mopa/planner.h"
#include "mopa/replay.h"
#include "mopa/sac.h"

namespace mopa {

// Direct actions live in [-delta_q_step, delta_q_step]^k and execute in one
// environment step; larger commands up to delta_q_mp are realized by the
// planner as a sequence of direct sub-actions.
struct AugmentedActionSpace {
  double delta_q_step = 0.1;
  double delta_q_mp = 1.0;
  void validate() const;
};

// per-joint bounds for the augmented policy head (plus the gripper channel
// with bound 1 for Lift)
std::vector<double> augmented_bounds(const EnvConfig& cfg, const AugmentedActionSpace& spaces);
std::vector<double> direct_bounds(const EnvConfig& cfg);

// The low-level realization of one augmented command from `state`:
// the direct branch yields the single clamped action, the planner branch a
// discretized collision-free path. `fallback` marks shrink/planner failures
// that degraded to a truncated direct step.
struct MacroPlan {
  std::vector<std::vector<double>> actions;
  bool used_planner = false;
  bool fallback = false;
};
MacroPlan plan_macro_action(const EnvConfig& cfg, const EnvState& state,
                            const std::vector<double>& action_aug,
                            const AugmentedActionSpace& spaces, const PlannerConfig& planner_cfg,
                            Rng& rng);

// Executes one augmented action on the environment: plans (if needed), steps
// through every low-level action, records the constituent transitions with
// their observations, and aggregates the discounted macro reward
// sum_k gamma^k r_k. Stops early when the episode ends.
AugmentedTransition dispatch(Environment& env, const std::vector<double>& action_aug,
                             const AugmentedActionSpace& spaces, const PlannerConfig& planner_cfg,
                             Rng& rng, double gamma = 0.99);

// One full episode under the (state-based) augmented policy.
std::vector<AugmentedTransition> rollout_augmented(const SACAgent& agent, Environment& env,
                                                   const AugmentedActionSpace& spaces,
                                                   const PlannerConfig& planner_cfg,
                                                   std::uint64_t episode_seed, bool deterministic,
                                                   Rng& rng, double gamma = 0.99);

// Stateful evaluation adapter: plans macro actions on demand and feeds the
// queued sub-actions one env step at a time. Requires agent/cfg to outlive
// the factory.
PolicyFactory mopa_policy_factory(const SACAgent& agent, const EnvConfig& cfg,
                                  const AugmentedActionSpace& spaces,
                                  const PlannerConfig& planner_cfg, bool deterministic);

struct MopaTrainConfig {
  SACConfig sac;
  AugmentedActionSpace spaces;
  PlannerConfig planner;
  int total_steps = 200000;  // low-level env-step budget
  int warmup_steps = 1000;   // uniform-random augmented actions
  int eval_interval = 5000;  // low-level steps between milestone evaluations
  int eval_episodes = 100;
  double stop_asr = -1.0;    // stop once the milestone evaluation reaches this
  std::uint64_t seed = 0;
  std::string csv_path;         // optional per-step training log
  std::string checkpoint_path;  // optional checkpoint on improvement + at end
};

struct MopaTrainResult {
  SACAgent agent;
  double final_log_alpha = 0.0;
  int steps_used = 0;
  double best_asr = 0.0;
  std::vector<std::pair<int, double>> eval_trace;  // (low-level step, asr)
};

// Symmetric state-based training over augmented transitions: both actor and
// critic consume the state vector. Aborts with a diagnostic if any update
// produces non-finite values.
MopaTrainResult train_mopa(const EnvConfig& env_cfg, const MopaTrainConfig& cfg);

}  // namespace mopa
