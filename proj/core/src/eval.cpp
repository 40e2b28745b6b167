#include "mopa/eval.h"

#include <cmath>
#include <memory>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mopa {

double discounted_return(const std::vector<double>& rewards, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("discounted_return: gamma must be in (0,1)");
  double acc = 0.0;
  double g = 1.0;
  for (double r : rewards) {
    acc += g * r;
    g *= gamma;
  }
  return acc;
}

Metrics metrics_from_records(const std::vector<EpisodeRecord>& records, int horizon) {
  Metrics m;
  m.n_episodes = static_cast<int>(records.size());
  int successes = 0;
  double len_sum = 0.0;
  double adr_sum = 0.0;
  int max_seed = -1;
  for (const EpisodeRecord& r : records) {
    if (r.success) {
      ++successes;
      len_sum += r.length;
    }
    adr_sum += r.discounted;
    max_seed = std::max(max_seed, r.seed_idx);
  }
  m.n_seeds = max_seed + 1;
  m.asr = records.empty() ? 0.0 : static_cast<double>(successes) / records.size();
  m.ael = successes > 0 ? len_sum / successes : static_cast<double>(horizon);
  m.adr = records.empty() ? 0.0 : adr_sum / records.size();
  return m;
}

EvalResult evaluate(const EnvConfig& cfg, const PolicyFactory& make_policy,
                    const EvalOptions& opt) {
  EvalResult result;
  Environment env(cfg);
  for (int s = 0; s < opt.seeds; ++s) {
    for (int e = 0; e < opt.episodes; ++e) {
      const std::uint64_t ep_seed = hash_combine(opt.seed_base + static_cast<std::uint64_t>(s), e);
      PolicyFn policy = make_policy(ep_seed);
      const StepOutcome* out = &env.reset(ep_seed);
      std::vector<double> rewards;
      rewards.reserve(static_cast<std::size_t>(cfg.horizon));
      while (!out->done) {
        out = &env.step(policy(*out));
        rewards.push_back(out->reward);
      }
      EpisodeRecord rec;
      rec.seed_idx = s;
      rec.episode_idx = e;
      rec.success = out->success;
      rec.length = out->state.step_count;
      rec.discounted = discounted_return(rewards, opt.gamma);
      result.episodes.push_back(rec);
    }
  }
  result.metrics = metrics_from_records(result.episodes, cfg.horizon);
  if (!opt.csv_path.empty()) write_episode_csv(opt.csv_path, result.episodes);
  return result;
}

void write_episode_csv(const std::string& path, const std::vector<EpisodeRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_episode_csv: cannot open " + path);
  out << "seed,episode,success,length,discounted_return\n";
  out.precision(17);
  for (const EpisodeRecord& r : records)
    out << r.seed_idx << "," << r.episode_idx << "," << (r.success ? 1 : 0) << "," << r.length
        << "," << r.discounted << "\n";
}

std::vector<EpisodeRecord> read_episode_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_episode_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_episode_csv: empty file " + path);
  std::vector<EpisodeRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    EpisodeRecord r;
    char comma;
    int success = 0;
    ls >> r.seed_idx >> comma >> r.episode_idx >> comma >> success >> comma >> r.length >> comma >>
        r.discounted;
    if (!ls) throw std::runtime_error("read_episode_csv: malformed line: " + line);
    r.success = success != 0;
    records.push_back(r);
  }
  return records;
}

double mean_squared_acceleration(const std::vector<Vec2>& ee_series) {
  if (ee_series.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 1; i + 1 < ee_series.size(); ++i) {
    const Vec2 a = ee_series[i + 1] - ee_series[i] * 2.0 + ee_series[i - 1];
    acc += a.dot(a);
  }
  return acc / static_cast<double>(ee_series.size() - 2);
}

double ee_path_length(const std::vector<Vec2>& ee_series) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < ee_series.size(); ++i)
    len += distance(ee_series[i], ee_series[i + 1]);
  return len;
}

std::vector<Vec2> ee_series_from_configs(const ArmSpec& arm,
                                         const std::vector<JointConfig>& configs) {
  std::vector<Vec2> pts;
  pts.reserve(configs.size());
  for (const JointConfig& q : configs) pts.push_back(end_effector(arm, q));
  return pts;
}

SmoothnessReport smoothness(const std::vector<std::vector<JointConfig>>& trajectories_a,
                            const std::vector<std::vector<JointConfig>>& trajectories_b,
                            const ArmSpec& arm) {
  if (trajectories_a.size() != trajectories_b.size())
    throw std::invalid_argument("smoothness: unpaired trajectory sets");
  SmoothnessReport rep;
  rep.pairs = static_cast<int>(trajectories_a.size());
  int a_smoother = 0;
  for (std::size_t i = 0; i < trajectories_a.size(); ++i) {
    const auto ee_a = ee_series_from_configs(arm, trajectories_a[i]);
    const auto ee_b = ee_series_from_configs(arm, trajectories_b[i]);
    const double ma = mean_squared_acceleration(ee_a);
    const double mb = mean_squared_acceleration(ee_b);
    rep.msa_a.push_back(ma);
    rep.msa_b.push_back(mb);
    rep.path_length_a.push_back(ee_path_length(ee_a));
    rep.path_length_b.push_back(ee_path_length(ee_b));
    if (ma < mb) ++a_smoother;
  }
  rep.fraction_a_smoother = rep.pairs > 0 ? static_cast<double>(a_smoother) / rep.pairs : 0.0;
  return rep;
}

std::vector<ScenarioMetrics> transfer_eval(const EnvConfig& base,
                                           const std::vector<Scenario>& scenarios,
                                           const PolicyFactory& make_policy,
                                           const EvalOptions& opt) {
  std::vector<ScenarioMetrics> out;
  for (const Scenario& sc : scenarios) {
    EnvConfig cfg = base;
    cfg.scenario = sc;
    ScenarioMetrics sm;
    sm.id = sc.id;
    EvalOptions o = opt;
    if (!opt.csv_path.empty()) o.csv_path = opt.csv_path + "." + sc.id + ".csv";
    sm.metrics = evaluate(cfg, make_policy, o).metrics;
    out.push_back(std::move(sm));
  }
  return out;
}

PolicyFactory state_policy_factory(const NetworkSpec& spec, const ParamSet& params,
                                   std::vector<double> bounds, bool deterministic) {
  return [&spec, &params, bounds, deterministic](std::uint64_t episode_seed) -> PolicyFn {
    auto rng = std::make_shared<Rng>(hash_combine(episode_seed, 0xac70ull));
    return [&spec, &params, bounds, deterministic, rng](const StepOutcome& out) {
      return infer_action_state(spec, params, out.state_vec, bounds, deterministic, rng.get());
    };
  };
}

PolicyFactory visual_policy_factory(const NetworkSpec& spec, const ParamSet& params,
                                    std::vector<double> bounds, bool deterministic) {
  return [&spec, &params, bounds, deterministic](std::uint64_t episode_seed) -> PolicyFn {
    auto rng = std::make_shared<Rng>(hash_combine(episode_seed, 0xac71ull));
    return [&spec, &params, bounds, deterministic, rng](const StepOutcome& out) {
      if (out.obs.image.empty())
        throw std::runtime_error("visual policy: environment produced no image observation");
      return infer_action_visual(spec, params, out.obs.image, out.obs.joint_features, bounds,
                                 deterministic, rng.get());
    };
  };
}

}  // namespace mopa
