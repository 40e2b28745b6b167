#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mopa/env.h"
#include "mopa/nn.h"

namespace mopa {

// A policy maps the latest step outcome to the next action; stateful policies
// (e.g. planner-backed ones) capture their queue in the closure. A factory
// builds one independent policy instance per episode.
using PolicyFn = std::function<std::vector<double>(const StepOutcome&)>;
using PolicyFactory = std::function<PolicyFn(std::uint64_t episode_seed)>;

struct Metrics {
  double asr = 0.0;  // success fraction over all episodes
  double ael = 0.0;  // mean length of successful episodes; horizon when none
  double adr = 0.0;  // mean discounted return over all episodes (raw rewards)
  int n_episodes = 0;
  int n_seeds = 0;
};

double discounted_return(const std::vector<double>& rewards, double gamma);

struct EpisodeRecord {
  int seed_idx = 0;
  int episode_idx = 0;
  bool success = false;
  int length = 0;
  double discounted = 0.0;
};

struct EvalResult {
  Metrics metrics;
  std::vector<EpisodeRecord> episodes;
};

struct EvalOptions {
  int episodes = 100;       // per seed
  int seeds = 5;
  double gamma = 0.99;
  std::uint64_t seed_base = 9000;
  bool deterministic = true;  // policies receive this via their factory
  std::string csv_path;       // optional per-episode CSV
};

// Runs episodes per seed, aggregates ASR/AEL/ADR. Metrics are a pure function
// of the per-episode records (metrics_from_records re-derives them).
EvalResult evaluate(const EnvConfig& cfg, const PolicyFactory& make_policy,
                    const EvalOptions& opt);
Metrics metrics_from_records(const std::vector<EpisodeRecord>& records, int horizon);

void write_episode_csv(const std::string& path, const std::vector<EpisodeRecord>& records);
std::vector<EpisodeRecord> read_episode_csv(const std::string& path);

// ----- smoothness ----- //

struct SmoothnessReport {
  std::vector<double> msa_a, msa_b;                  // mean squared acceleration per trajectory
  std::vector<double> path_length_a, path_length_b;  // end-effector path lengths
  double fraction_a_smoother = 0.0;                  // pairs where msa_a < msa_b
  int pairs = 0;
};

double mean_squared_acceleration(const std::vector<Vec2>& ee_series);
double ee_path_length(const std::vector<Vec2>& ee_series);
std::vector<Vec2> ee_series_from_configs(const ArmSpec& arm,
                                         const std::vector<JointConfig>& configs);

// Paired comparison of end-effector smoothness; inputs must have equal
// lengths (paired starts) or an std::invalid_argument is thrown.
SmoothnessReport smoothness(const std::vector<std::vector<JointConfig>>& trajectories_a,
                            const std::vector<std::vector<JointConfig>>& trajectories_b,
                            const ArmSpec& arm);

// ----- transfer ----- //

struct ScenarioMetrics {
  std::string id;
  Metrics metrics;
};

// Evaluates one policy across scenarios; each scenario changes rendering only
// (distractors, palettes), never the task geometry.
std::vector<ScenarioMetrics> transfer_eval(const EnvConfig& base,
                                           const std::vector<Scenario>& scenarios,
                                           const PolicyFactory& make_policy,
                                           const EvalOptions& opt);

// ----- policy factories ----- //

PolicyFactory state_policy_factory(const NetworkSpec& spec, const ParamSet& params,
                                   std::vector<double> bounds, bool deterministic);
PolicyFactory visual_policy_factory(const NetworkSpec& spec, const ParamSet& params,
                                    std::vector<double> bounds, bool deterministic);

}  // namespace mopa
