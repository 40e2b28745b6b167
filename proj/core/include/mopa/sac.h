#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mopa/nn.h"
#include "mopa/optim.h"
#include "mopa/replay.h"

namespace mopa {

struct SACConfig {
  double gamma = 0.99;
  double tau = 0.005;
  int batch_size = 256;
  double lr = 1e-5;
  double alpha_lr = 1e-5;
  int updates_per_env_step = 1;
  double target_entropy = 0.0;  // filled with -action_dim when left at 0
  double init_log_alpha = 0.0;
  std::size_t buffer_capacity = 1000000;
  double reward_scale = 0.8;
};

struct TemperatureState {
  double log_alpha = 0.0;
  double target_entropy = 0.0;
  double alpha() const { return std::exp(log_alpha); }
};

struct CriticPair {
  ParamSet q1, q2;
  ParamSet target1, target2;
};

// Actor/critic bundle with pluggable actor input: a StateMlp actor reads the
// state vector (symmetric agent), a VisualActor reads image + joint features
// (asymmetric agent). Critics always read (state, action).
struct SACAgent {
  NetworkSpec actor_spec;
  NetworkSpec critic_spec;
  ParamSet actor;
  CriticPair critics;
  TemperatureState temp;
  AdamState actor_opt, q1_opt, q2_opt;
  // scalar Adam state for log_alpha
  double alpha_m = 0.0, alpha_v = 0.0;
  std::int64_t alpha_steps = 0;
  std::vector<double> action_bounds;
  SACConfig cfg;
  Rng rng{0};

  bool visual_actor() const { return actor_spec.kind == NetworkSpec::Kind::VisualActor; }
};

SACAgent make_sac_agent(const NetworkSpec& actor_spec, int state_dim, int action_dim,
                        std::vector<double> action_bounds, SACConfig cfg, std::uint64_t seed);

// Exact 1:3 expert/agent mix: ceil(batch/4) transitions from the expert
// buffer, the rest from the agent buffer, uniformly with replacement. An
// empty buffer falls back to drawing the whole batch from the other;
// `used_fallback` reports that. Throws when both are empty.
std::vector<const Transition*> sample_mixed_batch(const ReplayBuffer& expert,
                                                  const ReplayBuffer& agent, int batch_size,
                                                  Rng& rng, bool* used_fallback = nullptr);
int expert_share(int batch_size);  // ceil(batch_size / 4)

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double mean_log_prob = 0.0;  // under the fresh actor sample
  double alpha = 0.0;
};

// Entropy-regularized twin-critic regression; targets soft-updated after the
// step. Returns the summed critic loss. Throws on empty batches and on
// non-finite losses or parameters.
double critic_update(SACAgent& agent, const std::vector<const Transition*>& batch);

// One ascent step on E[min Q(s, a~) - alpha log pi(a~|.)] through the
// reparameterized action; critics are frozen. Returns the actor loss and, via
// `mean_log_prob`, the batch-average log-likelihood of the fresh samples.
double actor_update(SACAgent& agent, const std::vector<const Transition*>& batch,
                    double* mean_log_prob = nullptr);

// One gradient step on J(alpha) = E[-alpha (log pi + target_entropy)].
double alpha_update(SACAgent& agent, const std::vector<const Transition*>& batch);
// Shared inner step when the mean log-probability is already known.
double alpha_apply(SACAgent& agent, double mean_log_prob);

// critic + actor + temperature on one batch
UpdateStats sac_update(SACAgent& agent, const std::vector<const Transition*>& batch);

// checkpoint helpers: actor, critics and temperature in one archive
void save_agent(const std::string& path, const SACAgent& agent,
                const std::vector<std::pair<std::string, std::string>>& extra_meta = {});
void load_agent_params(const std::string& path, SACAgent& agent);

}  // namespace mopa
