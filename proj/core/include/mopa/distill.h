#pragma once

#include <string>

#include "mopa/env.h"
#include "mopa/eval.h"
#include "mopa/mopa_agent.h"
#include "mopa/replay.h"
#include "mopa/sac.h"

namespace mopa {

// Runs one episode under `policy` and records every low-level transition
// (with observations, when the environment renders them).
struct EpisodeData {
  std::vector<Transition> transitions;
  bool success = false;
  int length = 0;
  std::vector<JointConfig> configs;  // visited configurations incl. the start
};
EpisodeData collect_episode(Environment& env, const PolicyFn& policy, std::uint64_t episode_seed);

// ----- demonstration collection ----- //

struct DemoCollectOptions {
  std::size_t n_transitions = 100000;
  AugmentedActionSpace spaces;
  PlannerConfig planner;
  bool deterministic = true;
  std::uint64_t seed = 0;
};

struct DemoCollectResult {
  ReplayBuffer data;  // flattened low-level transitions with observations
  int episodes = 0;
  int successes = 0;
  bool low_success_warning = false;  // no success in the first 50 episodes

  DemoCollectResult() : data(1) {}
};

// Flattens augmented rollouts of the state-based agent into the direct action
// space; rendering must be enabled on `env_cfg`.
DemoCollectResult collect_demos(const SACAgent& mopa_agent, const EnvConfig& env_cfg,
                                const DemoCollectOptions& opt);

// ----- behavioral cloning ----- //

struct BCTrainConfig {
  double lr = 5e-4;
  int batch_size = 512;
  double train_fraction = 0.9;  // 9:1 train/test split
  int epochs = 140;
  int scheduler_step = 5;
  double scheduler_decay = 0.99;
  int validation_episodes = 5;  // per validation seed
  int validation_seeds = 6;
  std::uint64_t seed = 0;
  std::string csv_path;  // optional per-epoch report
};

struct BCReport {
  std::vector<double> train_loss;
  std::vector<double> test_loss;
  std::vector<double> val_success;
  int selected_epoch = -1;
  double selected_val_success = 0.0;
};

struct BCResult {
  NetworkSpec spec;
  ParamSet params;  // weights of the selected epoch; log-std head reset to -1
  BCReport report;
};

// Epoch selection: the earliest epoch attaining the run's maximum validation
// success rate (success, not test loss, drives the choice).
int select_bc_epoch(const std::vector<double>& val_success);

// MSE regression of the deterministic head on (observation, action) pairs
// with per-epoch validation rollouts. Throws when the dataset is smaller than
// one batch.
BCResult train_bc(const ReplayBuffer& demos, const BCTrainConfig& cfg, const EnvConfig& env_cfg);

// ----- expert buffer ----- //

struct ExpertCollectResult {
  ReplayBuffer buffer;
  int trajectories = 0;
  int episodes_tried = 0;
  bool shortfall = false;  // fewer than requested within the 10x retry budget

  ExpertCollectResult() : buffer(1) {}
};

// Stores transitions of successful BC episodes only. Throws when no episode
// succeeds within the retry budget.
ExpertCollectResult collect_expert_buffer(const NetworkSpec& bc_spec, const ParamSet& bc_params,
                                          const EnvConfig& env_cfg, int n_trajectories,
                                          std::uint64_t seed, bool deterministic = true);

// Fills the expert buffer directly from demonstration data instead of BC
// rollouts (the no-smoothing ablation).
ReplayBuffer expert_buffer_from_demos(const ReplayBuffer& demos, int n_trajectories, int horizon);

// ----- asymmetric agent ----- //

struct AsymInitOptions {
  bool init_from_bc_and_critic = true;  // false: random init (ablation)
  double alpha_offset = 2.0;            // init log alpha = mopa final - offset
};

// Visual-actor agent whose critics consume the state vector. With
// initialization enabled the actor copies the BC weights and all four critic
// networks copy the state agent's pair; shape mismatches are hard errors.
SACAgent init_asym_agent(const NetworkSpec& bc_spec, const ParamSet& bc_params,
                         const SACAgent& mopa_agent, double mopa_final_log_alpha,
                         const EnvConfig& env_cfg, SACConfig sac_cfg, const AsymInitOptions& opt,
                         std::uint64_t seed);

// ----- stage-2 training ----- //

struct Stage2Config {
  SACConfig sac;
  int total_steps = 150000;
  int eval_interval = 2500;
  int eval_episodes = 100;
  double milestone_asr = -1.0;    // record the first step whose eval reaches this
  bool stop_at_milestone = false;
  std::uint64_t seed = 0;
  std::string csv_path;
  std::string checkpoint_path;
};

struct Stage2Result {
  SACAgent agent;
  std::vector<std::pair<int, double>> eval_trace;  // (env step, asr)
  int milestone_step = -1;                         // -1 when never reached
  double best_asr = 0.0;
  int steps_used = 0;
};

// BC-trajectory-guided asymmetric training: act from observations, store into
// the agent buffer, one update per environment step on a 1:3 expert/agent
// mixed batch. The expert buffer is never evicted.
Stage2Result stage2_train(SACAgent agent, const EnvConfig& env_cfg, const ReplayBuffer& expert,
                          const Stage2Config& cfg);

}  // namespace mopa
