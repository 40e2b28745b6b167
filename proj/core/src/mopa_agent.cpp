#include "mopa/mopa_agent.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace mopa {

void AugmentedActionSpace::validate() const {
  if (!(delta_q_step > 0.0) || !(delta_q_mp > delta_q_step))
    throw std::invalid_argument("AugmentedActionSpace: need delta_q_mp > delta_q_step > 0");
}

std::vector<double> augmented_bounds(const EnvConfig& cfg, const AugmentedActionSpace& spaces) {
  std::vector<double> b(static_cast<std::size_t>(cfg.arm.joints()), spaces.delta_q_mp);
  if (cfg.task == Task::Lift) b.push_back(1.0);
  return b;
}

std::vector<double> direct_bounds(const EnvConfig& cfg) {
  std::vector<double> b(static_cast<std::size_t>(cfg.arm.joints()), cfg.delta_q_step);
  if (cfg.task == Task::Lift) b.push_back(1.0);
  return b;
}

namespace {

std::vector<float> to_f32(const std::vector<double>& v) {
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

std::vector<double> clamp_augmented(const EnvConfig& cfg, const std::vector<double>& action,
                                    const AugmentedActionSpace& spaces) {
  if (static_cast<int>(action.size()) != cfg.action_dim())
    throw std::invalid_argument("dispatch: augmented action dimension mismatch");
  std::vector<double> a = action;
  for (int i = 0; i < cfg.arm.joints(); ++i)
    a[static_cast<std::size_t>(i)] =
        std::clamp(a[static_cast<std::size_t>(i)], -spaces.delta_q_mp, spaces.delta_q_mp);
  if (cfg.task == Task::Lift) a.back() = std::clamp(a.back(), -1.0, 1.0);
  return a;
}

double joint_mag(const EnvConfig& cfg, const std::vector<double>& a) {
  double m = 0.0;
  for (int i = 0; i < cfg.arm.joints(); ++i)
    m = std::max(m, std::fabs(a[static_cast<std::size_t>(i)]));
  return m;
}

std::vector<double> truncate_to_direct(const EnvConfig& cfg, const std::vector<double>& a) {
  std::vector<double> out = a;
  for (int i = 0; i < cfg.arm.joints(); ++i)
    out[static_cast<std::size_t>(i)] =
        std::clamp(out[static_cast<std::size_t>(i)], -cfg.delta_q_step, cfg.delta_q_step);
  return out;
}

}  // namespace

MacroPlan plan_macro_action(const EnvConfig& cfg, const EnvState& state,
                            const std::vector<double>& action_aug,
                            const AugmentedActionSpace& spaces, const PlannerConfig& planner_cfg,
                            Rng& rng) {
  spaces.validate();
  const std::vector<double> a = clamp_augmented(cfg, action_aug, spaces);
  const int k = cfg.arm.joints();
  MacroPlan plan;

  if (joint_mag(cfg, a) <= spaces.delta_q_step + 1e-12) {
    plan.actions.push_back(a);
    return plan;
  }

  // goal shrinking: pull an in-collision goal toward the current config
  JointConfig goal;
  bool goal_ok = false;
  double factor = 1.0;
  for (int tries = 0; tries <= 5; ++tries) {
    JointConfig candidate = state.q;
    for (int i = 0; i < k; ++i)
      candidate.angles[static_cast<std::size_t>(i)] += factor * a[static_cast<std::size_t>(i)];
    candidate = clamp_config(cfg.arm, candidate);
    if (!config_collides(cfg.arm, candidate, cfg.obstacles)) {
      goal = candidate;
      goal_ok = true;
      break;
    }
    factor *= 0.8;
  }

  std::optional<Path> path;
  if (goal_ok) {
    PlannerConfig pc = planner_cfg;
    pc.seed = rng.next_u64();
    path = rrt_connect(state.q, goal, cfg.arm, cfg.obstacles, pc);
    if (path) {
      *path = shortcut(*path, cfg.arm, cfg.obstacles, pc);
      plan.used_planner = true;
    }
  }
  if (!path) {
    // planner failure or an irreducibly blocked goal: degrade to one bounded
    // direct step so progress never stalls
    plan.actions.push_back(truncate_to_direct(cfg, a));
    plan.fallback = true;
    return plan;
  }

  auto joint_actions = discretize_path(*path, spaces.delta_q_step);
  const double gripper_cmd = cfg.task == Task::Lift ? a.back() : 0.0;
  if (joint_actions.empty()) {
    // degenerate plan (goal within tolerance of start): still consume a step
    std::vector<double> zero(static_cast<std::size_t>(k), 0.0);
    if (cfg.task == Task::Lift) zero.push_back(gripper_cmd);
    plan.actions.push_back(std::move(zero));
    return plan;
  }
  plan.actions.reserve(joint_actions.size());
  for (auto& ja : joint_actions) {
    if (cfg.task == Task::Lift) ja.push_back(gripper_cmd);
    plan.actions.push_back(std::move(ja));
  }
  return plan;
}

AugmentedTransition dispatch(Environment& env, const std::vector<double>& action_aug,
                             const AugmentedActionSpace& spaces, const PlannerConfig& planner_cfg,
                             Rng& rng, double gamma) {
  const EnvConfig& cfg = env.config();
  const std::vector<double> a = clamp_augmented(cfg, action_aug, spaces);
  MacroPlan plan = plan_macro_action(cfg, env.state(), a, spaces, planner_cfg, rng);

  AugmentedTransition out;
  out.state = to_f32(env.last().state_vec);
  out.action = to_f32(a);
  out.planner_fallback = plan.fallback;

  StepOutcome prev = env.last();
  double discount = 1.0;
  double reward_acc = 0.0;
  for (const auto& sub : plan.actions) {
    const StepOutcome& next = env.step(sub);
    Transition t;
    t.state = to_f32(prev.state_vec);
    t.image = prev.obs.image;
    t.joint_features = to_f32(prev.obs.joint_features);
    t.action = to_f32(sub);
    t.reward = static_cast<float>(next.reward);
    t.next_state = to_f32(next.state_vec);
    t.next_image = next.obs.image;
    t.next_joint_features = to_f32(next.obs.joint_features);
    t.done = next.done;
    out.constituents.push_back(std::move(t));
    reward_acc += discount * next.reward;
    discount *= gamma;
    prev = next;
    if (next.done) break;
  }
  out.reward = static_cast<float>(reward_acc);
  out.next_state = to_f32(prev.state_vec);
  out.done = prev.done;
  return out;
}

std::vector<AugmentedTransition> rollout_augmented(const SACAgent& agent, Environment& env,
                                                   const AugmentedActionSpace& spaces,
                                                   const PlannerConfig& planner_cfg,
                                                   std::uint64_t episode_seed, bool deterministic,
                                                   Rng& rng, double gamma) {
  std::vector<AugmentedTransition> episode;
  const StepOutcome* out = &env.reset(episode_seed);
  while (!out->done) {
    const std::vector<double> action = infer_action_state(
        agent.actor_spec, agent.actor, out->state_vec, agent.action_bounds, deterministic, &rng);
    episode.push_back(dispatch(env, action, spaces, planner_cfg, rng, gamma));
    out = &env.last();
  }
  return episode;
}

PolicyFactory mopa_policy_factory(const SACAgent& agent, const EnvConfig& cfg,
                                  const AugmentedActionSpace& spaces,
                                  const PlannerConfig& planner_cfg, bool deterministic) {
  return [&agent, &cfg, spaces, planner_cfg, deterministic](std::uint64_t episode_seed) -> PolicyFn {
    auto rng = std::make_shared<Rng>(hash_combine(episode_seed, 0x3a9full));
    auto queue = std::make_shared<std::deque<std::vector<double>>>();
    return [&agent, &cfg, spaces, planner_cfg, deterministic, rng,
            queue](const StepOutcome& out) -> std::vector<double> {
      if (queue->empty()) {
        const std::vector<double> action =
            infer_action_state(agent.actor_spec, agent.actor, out.state_vec, agent.action_bounds,
                               deterministic, rng.get());
        MacroPlan plan = plan_macro_action(cfg, out.state, action, spaces, planner_cfg, *rng);
        for (auto& sub : plan.actions) queue->push_back(std::move(sub));
      }
      std::vector<double> next = std::move(queue->front());
      queue->pop_front();
      return next;
    };
  };
}

MopaTrainResult train_mopa(const EnvConfig& env_cfg, const MopaTrainConfig& cfg) {
  cfg.spaces.validate();
  EnvConfig train_cfg = env_cfg;
  train_cfg.render_observations = false;  // the symmetric agent never reads images
  train_cfg.delta_q_step = cfg.spaces.delta_q_step;

  Environment env(train_cfg);
  const int state_dim = train_cfg.state_dim();
  const int action_dim = train_cfg.action_dim();
  const std::vector<double> bounds = augmented_bounds(train_cfg, cfg.spaces);

  MopaTrainResult result;
  result.agent = make_sac_agent(NetworkSpec::state_actor(state_dim, action_dim), state_dim,
                                action_dim, bounds, cfg.sac, cfg.seed);
  SACAgent& agent = result.agent;

  ReplayBuffer buffer(cfg.sac.buffer_capacity);
  Rng action_rng(hash_combine(cfg.seed, 0xa1ull));
  Rng batch_rng(hash_combine(cfg.seed, 0xb2ull));
  Rng dispatch_rng(hash_combine(cfg.seed, 0xd3ull));

  std::ofstream csv;
  if (!cfg.csv_path.empty()) {
    csv.open(cfg.csv_path);
    if (!csv) throw std::runtime_error("train_mopa: cannot open log " + cfg.csv_path);
    csv << "step,episode_return,discounted_return,alpha,critic_loss,actor_loss\n";
  }

  std::uint64_t episode_counter = 0;
  env.reset(hash_combine(cfg.seed, episode_counter));
  double ep_return = 0.0, ep_discounted = 0.0, ep_discount = 1.0;
  UpdateStats last_stats;
  last_stats.alpha = agent.temp.alpha();
  int steps = 0;
  bool stop = false;

  while (steps < cfg.total_steps && !stop) {
    std::vector<double> action(static_cast<std::size_t>(action_dim));
    if (steps < cfg.warmup_steps) {
      for (int i = 0; i < action_dim; ++i)
        action[static_cast<std::size_t>(i)] =
            action_rng.uniform(-bounds[static_cast<std::size_t>(i)],
                               bounds[static_cast<std::size_t>(i)]);
    } else {
      action = infer_action_state(agent.actor_spec, agent.actor, env.last().state_vec, bounds,
                                  false, &action_rng);
    }

    AugmentedTransition tr =
        dispatch(env, action, cfg.spaces, cfg.planner, dispatch_rng, cfg.sac.gamma);
    Transition macro;
    macro.state = tr.state;
    macro.action = tr.action;
    macro.reward = tr.reward;
    macro.next_state = tr.next_state;
    macro.done = tr.done;
    macro.steps = static_cast<int>(tr.constituents.size());
    buffer.push(std::move(macro));

    for (const Transition& sub : tr.constituents) {
      ++steps;
      ep_return += sub.reward;
      ep_discounted += ep_discount * sub.reward;
      ep_discount *= cfg.sac.gamma;

      if (steps >= cfg.warmup_steps && buffer.size() >= static_cast<std::size_t>(cfg.sac.batch_size)) {
        for (int u = 0; u < cfg.sac.updates_per_env_step; ++u) {
          std::vector<const Transition*> batch;
          batch.reserve(static_cast<std::size_t>(cfg.sac.batch_size));
          for (int i = 0; i < cfg.sac.batch_size; ++i) batch.push_back(&buffer.sample(batch_rng));
          last_stats = sac_update(agent, batch);
        }
      }
      if (csv.is_open())
        csv << steps << "," << ep_return << "," << ep_discounted << "," << last_stats.alpha << ","
            << last_stats.critic_loss << "," << last_stats.actor_loss << "\n";

      if (cfg.eval_interval > 0 && steps % cfg.eval_interval == 0) {
        EvalOptions opt;
        opt.episodes = cfg.eval_episodes;
        opt.seeds = 1;
        opt.gamma = cfg.sac.gamma;
        opt.seed_base = hash_combine(cfg.seed, 0xe4a1ull);
        const Metrics m =
            evaluate(train_cfg, mopa_policy_factory(agent, train_cfg, cfg.spaces, cfg.planner, true),
                     opt)
                .metrics;
        result.eval_trace.emplace_back(steps, m.asr);
        if (m.asr > result.best_asr) {
          result.best_asr = m.asr;
          if (!cfg.checkpoint_path.empty())
            save_agent(cfg.checkpoint_path, agent,
                       {{"final_log_alpha", std::to_string(agent.temp.log_alpha)},
                        {"kind", "state-augmented"}});
        }
        if (cfg.stop_asr > 0.0 && m.asr >= cfg.stop_asr) {
          stop = true;
          break;
        }
      }
      if (steps >= cfg.total_steps) break;
    }

    if (env.last().done && steps < cfg.total_steps && !stop) {
      ++episode_counter;
      env.reset(hash_combine(cfg.seed, episode_counter));
      ep_return = 0.0;
      ep_discounted = 0.0;
      ep_discount = 1.0;
    }
  }

  result.final_log_alpha = agent.temp.log_alpha;
  result.steps_used = steps;
  if (!cfg.checkpoint_path.empty())
    save_agent(cfg.checkpoint_path, agent,
               {{"final_log_alpha", std::to_string(agent.temp.log_alpha)},
                {"kind", "state-augmented"}});
  return result;
}

}  // namespace mopa
