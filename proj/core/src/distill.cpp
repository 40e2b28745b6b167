#include "mopa/distill.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "mopa/optim.h"

namespace mopa {

namespace {

std::vector<float> to_f32(const std::vector<double>& v) {
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

}  // namespace

EpisodeData collect_episode(Environment& env, const PolicyFn& policy, std::uint64_t episode_seed) {
  EpisodeData ep;
  const StepOutcome* out = &env.reset(episode_seed);
  ep.configs.push_back(out->state.q);
  StepOutcome prev = *out;
  while (!out->done) {
    const std::vector<double> action = policy(*out);
    out = &env.step(action);
    Transition t;
    t.state = to_f32(prev.state_vec);
    t.image = prev.obs.image;
    t.joint_features = to_f32(prev.obs.joint_features);
    t.action = to_f32(action);
    t.reward = static_cast<float>(out->reward);
    t.next_state = to_f32(out->state_vec);
    t.next_image = out->obs.image;
    t.next_joint_features = to_f32(out->obs.joint_features);
    t.done = out->done;
    ep.transitions.push_back(std::move(t));
    ep.configs.push_back(out->state.q);
    prev = *out;
  }
  ep.success = out->success;
  ep.length = out->state.step_count;
  return ep;
}

DemoCollectResult collect_demos(const SACAgent& mopa_agent, const EnvConfig& env_cfg,
                                const DemoCollectOptions& opt) {
  if (!env_cfg.render_observations)
    throw std::invalid_argument("collect_demos: rendering must be enabled");
  DemoCollectResult result;
  result.data = ReplayBuffer(std::max<std::size_t>(opt.n_transitions, 1));
  if (opt.n_transitions == 0) return result;

  Environment env(env_cfg);
  Rng rng(hash_combine(opt.seed, 0xdc01ull));
  PolicyFactory factory =
      mopa_policy_factory(mopa_agent, env.config(), opt.spaces, opt.planner, opt.deterministic);

  std::uint64_t episode = 0;
  while (result.data.size() < opt.n_transitions) {
    const std::uint64_t ep_seed = hash_combine(opt.seed, 0xde30ull + episode);
    EpisodeData ep = collect_episode(env, factory(ep_seed), ep_seed);
    ++episode;
    result.episodes += 1;
    if (ep.success) result.successes += 1;
    if (result.episodes == 50 && result.successes == 0) result.low_success_warning = true;
    for (Transition& t : ep.transitions) {
      if (result.data.size() >= opt.n_transitions) break;
      result.data.push(std::move(t));
    }
  }
  return result;
}

int select_bc_epoch(const std::vector<double>& val_success) {
  int best = -1;
  double best_val = -1.0;
  for (std::size_t e = 0; e < val_success.size(); ++e) {
    if (val_success[e] > best_val + 1e-12) {
      best_val = val_success[e];
      best = static_cast<int>(e);
    }
  }
  return best;
}

namespace {

struct BCBatches {
  Tensor images, jf, actions;
};

BCBatches gather(const ReplayBuffer& demos, const std::vector<std::size_t>& idx, std::size_t lo,
                 std::size_t hi) {
  const Transition& first = demos.at(idx[lo]);
  const int n = static_cast<int>(hi - lo);
  BCBatches b;
  b.images = Tensor::zeros({n, static_cast<int>(first.image.size())});
  b.jf = Tensor::zeros({n, static_cast<int>(first.joint_features.size())});
  b.actions = Tensor::zeros({n, static_cast<int>(first.action.size())});
  for (std::size_t i = lo; i < hi; ++i) {
    const Transition& t = demos.at(idx[i]);
    const std::size_t row = i - lo;
    std::copy(t.image.begin(), t.image.end(),
              b.images.ptr() + row * t.image.size());
    std::copy(t.joint_features.begin(), t.joint_features.end(),
              b.jf.ptr() + row * t.joint_features.size());
    std::copy(t.action.begin(), t.action.end(), b.actions.ptr() + row * t.action.size());
  }
  return b;
}

double bc_loss_on(const NetworkSpec& spec, const ParamSet& params, const ReplayBuffer& demos,
                  const std::vector<std::size_t>& idx, int batch_size,
                  const std::vector<double>& bounds) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t lo = 0; lo < idx.size(); lo += static_cast<std::size_t>(batch_size)) {
    const std::size_t hi = std::min(idx.size(), lo + static_cast<std::size_t>(batch_size));
    BCBatches b = gather(demos, idx, lo, hi);
    Tape tape;
    auto bound = bind_params(tape, params, false);
    ActorHeads heads =
        forward_actor(tape, spec, bound, tape.leaf(&b.images, false), tape.leaf(&b.jf, false));
    const int pred = deterministic_action(tape, heads, bounds);
    const int loss = tape.mse(pred, tape.constant(b.actions));
    total += tape.val(loss).data[0] * static_cast<double>(hi - lo);
    count += hi - lo;
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

void reset_log_std_head(ParamSet& params, float bias_value) {
  Tensor& w = params.at("logstd.w");
  Tensor& b = params.at("logstd.b");
  std::fill(w.data.begin(), w.data.end(), 0.0f);
  std::fill(b.data.begin(), b.data.end(), bias_value);
}

}  // namespace

BCResult train_bc(const ReplayBuffer& demos, const BCTrainConfig& cfg, const EnvConfig& env_cfg) {
  if (demos.size() < static_cast<std::size_t>(cfg.batch_size))
    throw std::invalid_argument("train_bc: dataset smaller than one batch");
  if (demos.at(0).image.empty())
    throw std::invalid_argument("train_bc: demonstrations carry no image observations");

  BCResult result;
  result.spec = NetworkSpec::visual_actor(env_cfg.image_size, env_cfg.joint_feature_dim(),
                                          env_cfg.action_dim());
  Rng rng(hash_combine(cfg.seed, 0xbc01ull));
  result.params = init_params(result.spec, rng);
  const std::vector<double> bounds = direct_bounds(env_cfg);

  // deterministic shuffled 9:1 split
  std::vector<std::size_t> order(demos.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_index(i))]);
  const std::size_t n_train =
      std::max<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                            static_cast<std::size_t>(cfg.train_fraction * order.size()));
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  AdamState opt = AdamState::init(result.params, {.lr = cfg.lr});

  // validation seeds drawn once per run
  std::vector<std::uint64_t> val_seeds;
  for (int i = 0; i < cfg.validation_seeds; ++i) val_seeds.push_back(rng.next_u64());

  EnvConfig val_cfg = env_cfg;
  val_cfg.render_observations = true;
  Environment val_env(val_cfg);

  ParamSet best_params = result.params;
  std::ofstream csv;
  if (!cfg.csv_path.empty()) {
    csv.open(cfg.csv_path);
    csv << "epoch,lr,train_loss,test_loss,val_success\n";
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.cfg.lr = lr_schedule(cfg.lr, epoch, cfg.scheduler_step, cfg.scheduler_decay);

    // reshuffle the training set
    for (std::size_t i = train_idx.size(); i > 1; --i)
      std::swap(train_idx[i - 1], train_idx[static_cast<std::size_t>(rng.uniform_index(i))]);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t lo = 0; lo + static_cast<std::size_t>(cfg.batch_size) <= train_idx.size();
         lo += static_cast<std::size_t>(cfg.batch_size)) {
      BCBatches b = gather(demos, train_idx, lo, lo + static_cast<std::size_t>(cfg.batch_size));
      Tape tape;
      auto bound = bind_params(tape, result.params);
      ActorHeads heads = forward_actor(tape, result.spec, bound, tape.leaf(&b.images, false),
                                       tape.leaf(&b.jf, false));
      const int pred = deterministic_action(tape, heads, bounds);
      const int loss = tape.mse(pred, tape.constant(b.actions));
      tape.backward(loss);
      adam_step(result.params, collect_grads(tape, bound), opt);
      const double lv = tape.val(loss).data[0];
      if (!std::isfinite(lv) || !result.params.all_finite())
        throw std::runtime_error("train_bc: non-finite loss or parameters at epoch " +
                                 std::to_string(epoch));
      epoch_loss += lv;
      ++batches;
    }
    result.report.train_loss.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);
    result.report.test_loss.push_back(
        test_idx.empty() ? 0.0
                         : bc_loss_on(result.spec, result.params, demos, test_idx, cfg.batch_size,
                                      bounds));

    // validation rollouts decide model selection
    int successes = 0;
    int total = 0;
    PolicyFactory factory = visual_policy_factory(result.spec, result.params, bounds, true);
    for (int s = 0; s < cfg.validation_seeds; ++s) {
      for (int e = 0; e < cfg.validation_episodes; ++e) {
        const std::uint64_t ep_seed = hash_combine(val_seeds[static_cast<std::size_t>(s)], e);
        EpisodeData ep = collect_episode(val_env, factory(ep_seed), ep_seed);
        successes += ep.success ? 1 : 0;
        ++total;
      }
    }
    const double val = total ? static_cast<double>(successes) / total : 0.0;
    result.report.val_success.push_back(val);
    if (select_bc_epoch(result.report.val_success) == epoch) best_params = result.params;

    if (csv.is_open())
      csv << epoch << "," << opt.cfg.lr << "," << result.report.train_loss.back() << ","
          << result.report.test_loss.back() << "," << val << "\n";
  }

  result.report.selected_epoch = select_bc_epoch(result.report.val_success);
  if (result.report.selected_epoch >= 0)
    result.report.selected_val_success =
        result.report.val_success[static_cast<std::size_t>(result.report.selected_epoch)];
  result.params = std::move(best_params);
  // moderate starting stochasticity for the RL stage
  reset_log_std_head(result.params, -1.0f);
  return result;
}

ExpertCollectResult collect_expert_buffer(const NetworkSpec& bc_spec, const ParamSet& bc_params,
                                          const EnvConfig& env_cfg, int n_trajectories,
                                          std::uint64_t seed, bool deterministic) {
  if (n_trajectories <= 0)
    throw std::invalid_argument("collect_expert_buffer: need a positive trajectory count");
  EnvConfig cfg = env_cfg;
  cfg.render_observations = true;
  Environment env(cfg);
  ExpertCollectResult result;
  result.buffer = ReplayBuffer(static_cast<std::size_t>(n_trajectories) *
                               static_cast<std::size_t>(cfg.horizon));
  PolicyFactory factory =
      visual_policy_factory(bc_spec, bc_params, direct_bounds(cfg), deterministic);

  const int budget = 10 * n_trajectories;
  for (int episode = 0; episode < budget && result.trajectories < n_trajectories; ++episode) {
    const std::uint64_t ep_seed = hash_combine(seed, 0xe8a0ull + static_cast<std::uint64_t>(episode));
    EpisodeData ep = collect_episode(env, factory(ep_seed), ep_seed);
    result.episodes_tried += 1;
    if (!ep.success || ep.transitions.empty()) continue;  // success-at-reset has nothing to store
    for (Transition& t : ep.transitions) result.buffer.push(std::move(t));
    result.trajectories += 1;
  }
  if (result.trajectories == 0)
    throw std::runtime_error("collect_expert_buffer: no successful episodes within the budget");
  result.shortfall = result.trajectories < n_trajectories;
  return result;
}

ReplayBuffer expert_buffer_from_demos(const ReplayBuffer& demos, int n_trajectories, int horizon) {
  ReplayBuffer out(static_cast<std::size_t>(std::max(1, n_trajectories)) *
                   static_cast<std::size_t>(horizon));
  // demonstrations are stored in episode order; count episode boundaries
  int episodes = 0;
  for (std::size_t i = 0; i < demos.size() && episodes < n_trajectories; ++i) {
    const Transition& t = demos.at(i);
    out.push(t);
    if (t.done) ++episodes;
  }
  return out;
}

SACAgent init_asym_agent(const NetworkSpec& bc_spec, const ParamSet& bc_params,
                         const SACAgent& mopa_agent, double mopa_final_log_alpha,
                         const EnvConfig& env_cfg, SACConfig sac_cfg, const AsymInitOptions& opt,
                         std::uint64_t seed) {
  sac_cfg.init_log_alpha = mopa_final_log_alpha - opt.alpha_offset;
  SACAgent agent = make_sac_agent(bc_spec, env_cfg.state_dim(), env_cfg.action_dim(),
                                  direct_bounds(env_cfg), sac_cfg, seed);
  if (!opt.init_from_bc_and_critic) return agent;

  std::string why;
  if (!agent.actor.shapes_match(bc_params, &why))
    throw std::runtime_error("init_asym_agent: actor shape mismatch: " + why);
  agent.actor = bc_params;

  // the augmented action space is a superset of the direct one with equal
  // dimension, so the state critic transfers verbatim
  if (!agent.critics.q1.shapes_match(mopa_agent.critics.q1, &why))
    throw std::runtime_error("init_asym_agent: critic shape mismatch: " + why);
  agent.critics.q1 = mopa_agent.critics.q1;
  agent.critics.q2 = mopa_agent.critics.q2;
  agent.critics.target1 = mopa_agent.critics.target1;
  agent.critics.target2 = mopa_agent.critics.target2;
  return agent;
}

Stage2Result stage2_train(SACAgent agent, const EnvConfig& env_cfg, const ReplayBuffer& expert,
                          const Stage2Config& cfg) {
  if (expert.empty()) throw std::invalid_argument("stage2_train: expert buffer is empty");
  EnvConfig train_cfg = env_cfg;
  train_cfg.render_observations = true;

  Stage2Result result;
  result.agent = std::move(agent);
  SACAgent& a = result.agent;

  Environment env(train_cfg);
  ReplayBuffer agent_buffer(cfg.sac.buffer_capacity);
  Rng action_rng(hash_combine(cfg.seed, 0x51a2ull));
  Rng batch_rng(hash_combine(cfg.seed, 0x51b3ull));
  const std::vector<double> bounds = direct_bounds(train_cfg);

  std::ofstream csv;
  if (!cfg.csv_path.empty()) {
    csv.open(cfg.csv_path);
    if (!csv) throw std::runtime_error("stage2_train: cannot open log " + cfg.csv_path);
    csv << "step,episode_return,discounted_return,alpha,critic_loss,actor_loss\n";
  }

  std::uint64_t episode_counter = 0;
  const StepOutcome* out = &env.reset(hash_combine(cfg.seed, episode_counter));
  StepOutcome prev = *out;
  double ep_return = 0.0, ep_discounted = 0.0, ep_discount = 1.0;
  UpdateStats last_stats;
  last_stats.alpha = a.temp.alpha();

  for (int step = 1; step <= cfg.total_steps; ++step) {
    const std::vector<double> action = infer_action_visual(
        a.actor_spec, a.actor, prev.obs.image, prev.obs.joint_features, bounds, false, &action_rng);
    out = &env.step(action);

    Transition t;
    t.state = to_f32(prev.state_vec);
    t.image = prev.obs.image;
    t.joint_features = to_f32(prev.obs.joint_features);
    t.action = to_f32(action);
    t.reward = static_cast<float>(out->reward);
    t.next_state = to_f32(out->state_vec);
    t.next_image = out->obs.image;
    t.next_joint_features = to_f32(out->obs.joint_features);
    t.done = out->done;
    agent_buffer.push(std::move(t));

    ep_return += out->reward;
    ep_discounted += ep_discount * out->reward;
    ep_discount *= cfg.sac.gamma;

    for (int u = 0; u < cfg.sac.updates_per_env_step; ++u) {
      auto batch = sample_mixed_batch(expert, agent_buffer, cfg.sac.batch_size, batch_rng);
      last_stats = sac_update(a, batch);
    }
    if (csv.is_open())
      csv << step << "," << ep_return << "," << ep_discounted << "," << last_stats.alpha << ","
          << last_stats.critic_loss << "," << last_stats.actor_loss << "\n";

    if (out->done && step < cfg.total_steps) {
      ++episode_counter;
      out = &env.reset(hash_combine(cfg.seed, episode_counter));
      ep_return = 0.0;
      ep_discounted = 0.0;
      ep_discount = 1.0;
    }
    prev = *out;

    if (cfg.eval_interval > 0 && step % cfg.eval_interval == 0) {
      EvalOptions eopt;
      eopt.episodes = cfg.eval_episodes;
      eopt.seeds = 1;
      eopt.gamma = cfg.sac.gamma;
      eopt.seed_base = hash_combine(cfg.seed, 0xe5a2ull);
      const Metrics m =
          evaluate(train_cfg, visual_policy_factory(a.actor_spec, a.actor, bounds, true), eopt)
              .metrics;
      result.eval_trace.emplace_back(step, m.asr);
      if (m.asr > result.best_asr) {
        result.best_asr = m.asr;
        if (!cfg.checkpoint_path.empty())
          save_agent(cfg.checkpoint_path, a, {{"kind", "visual-direct"}});
      }
      if (result.milestone_step < 0 && cfg.milestone_asr > 0.0 && m.asr >= cfg.milestone_asr) {
        result.milestone_step = step;
        if (cfg.stop_at_milestone) {
          result.steps_used = step;
          if (!cfg.checkpoint_path.empty())
            save_agent(cfg.checkpoint_path, a, {{"kind", "visual-direct"}});
          return result;
        }
      }
    }
  }
  result.steps_used = cfg.total_steps;
  if (!cfg.checkpoint_path.empty()) save_agent(cfg.checkpoint_path, a, {{"kind", "visual-direct"}});
  return result;
}

}  // namespace mopa
