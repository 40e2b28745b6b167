#include "mopa/sac.h"

#include <algorithm>
#include <stdexcept>

#include "mopa/checkpoint.h"

namespace mopa {

SACAgent make_sac_agent(const NetworkSpec& actor_spec, int state_dim, int action_dim,
                        std::vector<double> action_bounds, SACConfig cfg, std::uint64_t seed) {
  if (static_cast<int>(action_bounds.size()) != action_dim)
    throw std::invalid_argument("make_sac_agent: bounds/action dimension mismatch");
  if (cfg.target_entropy == 0.0) cfg.target_entropy = -static_cast<double>(action_dim);

  SACAgent agent;
  agent.actor_spec = actor_spec;
  agent.critic_spec = NetworkSpec::state_mlp(state_dim + action_dim, 1);
  agent.cfg = cfg;
  agent.action_bounds = std::move(action_bounds);
  agent.temp.log_alpha = cfg.init_log_alpha;
  agent.temp.target_entropy = cfg.target_entropy;
  agent.rng = Rng(hash_combine(seed, 0x5ac0ull));

  Rng init_rng(hash_combine(seed, 0x1717ull));
  agent.actor = init_params(actor_spec, init_rng);
  agent.critics.q1 = init_params(agent.critic_spec, init_rng);
  agent.critics.q2 = init_params(agent.critic_spec, init_rng);
  agent.critics.target1 = agent.critics.q1;
  agent.critics.target2 = agent.critics.q2;

  const AdamConfig adam{.lr = cfg.lr};
  agent.actor_opt = AdamState::init(agent.actor, adam);
  agent.q1_opt = AdamState::init(agent.critics.q1, adam);
  agent.q2_opt = AdamState::init(agent.critics.q2, adam);
  return agent;
}

int expert_share(int batch_size) { return (batch_size + 3) / 4; }

std::vector<const Transition*> sample_mixed_batch(const ReplayBuffer& expert,
                                                  const ReplayBuffer& agent, int batch_size,
                                                  Rng& rng, bool* used_fallback) {
  if (batch_size <= 0) throw std::invalid_argument("sample_mixed_batch: batch_size must be > 0");
  if (expert.empty() && agent.empty())
    throw std::runtime_error("sample_mixed_batch: both buffers are empty");
  if (used_fallback) *used_fallback = expert.empty() || agent.empty();

  int n_expert = expert_share(batch_size);
  int n_agent = batch_size - n_expert;
  if (expert.empty()) {
    n_expert = 0;
    n_agent = batch_size;
  } else if (agent.empty()) {
    n_expert = batch_size;
    n_agent = 0;
  }
  std::vector<const Transition*> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < n_expert; ++i) out.push_back(&expert.sample(rng));
  for (int i = 0; i < n_agent; ++i) out.push_back(&agent.sample(rng));
  return out;
}

namespace {

struct Batch {
  int n = 0;
  Tensor states, actions, rewards, dones, next_states;
  Tensor images, jf, next_images, next_jf;  // visual actor inputs
  std::vector<int> steps;                   // env steps spanned per transition
};

Tensor stack_field(const std::vector<const Transition*>& batch,
                   const std::vector<float> Transition::*field, const char* what) {
  const int n = static_cast<int>(batch.size());
  const std::size_t dim = (batch.front()->*field).size();
  if (dim == 0) throw std::invalid_argument(std::string("sac batch: missing ") + what);
  Tensor t = Tensor::zeros({n, static_cast<int>(dim)});
  for (int i = 0; i < n; ++i) {
    const std::vector<float>& src = batch[static_cast<std::size_t>(i)]->*field;
    if (src.size() != dim)
      throw std::invalid_argument(std::string("sac batch: ragged ") + what);
    std::copy(src.begin(), src.end(), t.ptr() + static_cast<std::size_t>(i) * dim);
  }
  return t;
}

Batch build_batch(const std::vector<const Transition*>& batch, bool visual) {
  if (batch.empty()) throw std::invalid_argument("sac update: empty batch");
  Batch b;
  b.n = static_cast<int>(batch.size());
  b.states = stack_field(batch, &Transition::state, "state");
  b.actions = stack_field(batch, &Transition::action, "action");
  b.next_states = stack_field(batch, &Transition::next_state, "next state");
  b.rewards = Tensor::zeros({b.n, 1});
  b.dones = Tensor::zeros({b.n, 1});
  b.steps.resize(static_cast<std::size_t>(b.n));
  for (int i = 0; i < b.n; ++i) {
    b.rewards.data[static_cast<std::size_t>(i)] = batch[static_cast<std::size_t>(i)]->reward;
    b.dones.data[static_cast<std::size_t>(i)] = batch[static_cast<std::size_t>(i)]->done ? 1.0f : 0.0f;
    b.steps[static_cast<std::size_t>(i)] = std::max(1, batch[static_cast<std::size_t>(i)]->steps);
  }
  if (visual) {
    b.images = stack_field(batch, &Transition::image, "observation image");
    b.jf = stack_field(batch, &Transition::joint_features, "joint features");
    b.next_images = stack_field(batch, &Transition::next_image, "next observation image");
    b.next_jf = stack_field(batch, &Transition::next_joint_features, "next joint features");
  }
  return b;
}

ActorHeads actor_forward_bound(Tape& tape, SACAgent& agent, const BoundParams& bound,
                               const Tensor* state_in, const Tensor* image_in,
                               const Tensor* jf_in) {
  if (agent.visual_actor()) {
    const int img = tape.leaf(image_in, false);
    const int jf = tape.leaf(jf_in, false);
    return forward_actor(tape, agent.actor_spec, bound, img, jf);
  }
  const int st = tape.leaf(state_in, false);
  return forward_actor(tape, agent.actor_spec, bound, st);
}

void check_finite(double loss, const ParamSet& params, const char* where) {
  if (!std::isfinite(loss))
    throw std::runtime_error(std::string(where) + ": non-finite loss");
  if (!params.all_finite())
    throw std::runtime_error(std::string(where) + ": non-finite parameter detected");
}

}  // namespace

double critic_update(SACAgent& agent, const std::vector<const Transition*>& batch) {
  Batch b = build_batch(batch, agent.visual_actor());
  const int d = static_cast<int>(agent.action_bounds.size());

  // targets: fresh next action from the live actor, twin-min bootstrap with
  // the entropy term; no gradients anywhere on this tape
  Tensor y = Tensor::zeros({b.n, 1});
  {
    Tape tape;
    auto actor_bound = bind_params(tape, agent.actor, false);
    ActorHeads heads =
        actor_forward_bound(tape, agent, actor_bound, &b.next_states, &b.next_images, &b.next_jf);
    const Tensor noise = sample_noise(agent.rng, b.n, d);
    GaussianSample next = gaussian_tanh_sample(tape, heads, noise, agent.action_bounds);

    const int sa = tape.concat_cols(tape.leaf(&b.next_states, false), next.action);
    const int q1t = forward_plain(tape, agent.critic_spec,
                                  bind_params(tape, agent.critics.target1, false), sa);
    const int q2t = forward_plain(tape, agent.critic_spec,
                                  bind_params(tape, agent.critics.target2, false), sa);
    const Tensor& v1 = tape.val(q1t);
    const Tensor& v2 = tape.val(q2t);
    const Tensor& lp = tape.val(next.log_prob);
    const double alpha = agent.temp.alpha();
    for (int i = 0; i < b.n; ++i) {
      const double minq = std::min(v1.data[static_cast<std::size_t>(i)],
                                   v2.data[static_cast<std::size_t>(i)]);
      const double bootstrap = minq - alpha * lp.data[static_cast<std::size_t>(i)];
      const double done = b.dones.data[static_cast<std::size_t>(i)];
      // semi-MDP backup: a macro transition spanning n env steps discounts
      // its bootstrap by gamma^n (n = 1 gives the ordinary target)
      const double discount = std::pow(agent.cfg.gamma, b.steps[static_cast<std::size_t>(i)]);
      y.data[static_cast<std::size_t>(i)] = static_cast<float>(
          b.rewards.data[static_cast<std::size_t>(i)] * agent.cfg.reward_scale +
          discount * (1.0 - done) * bootstrap);
    }
  }

  Tape tape;
  const int sa = tape.concat_cols(tape.leaf(&b.states, false), tape.leaf(&b.actions, false));
  auto b1 = bind_params(tape, agent.critics.q1);
  auto b2 = bind_params(tape, agent.critics.q2);
  const int q1 = forward_plain(tape, agent.critic_spec, b1, sa);
  const int q2 = forward_plain(tape, agent.critic_spec, b2, sa);
  const int target = tape.constant(y);
  const int loss = tape.add(tape.mse(q1, target), tape.mse(q2, target));
  tape.backward(loss);
  adam_step(agent.critics.q1, collect_grads(tape, b1), agent.q1_opt);
  adam_step(agent.critics.q2, collect_grads(tape, b2), agent.q2_opt);

  soft_update(agent.critics.target1, agent.critics.q1, agent.cfg.tau);
  soft_update(agent.critics.target2, agent.critics.q2, agent.cfg.tau);

  const double loss_value = tape.val(loss).data[0];
  check_finite(loss_value, agent.critics.q1, "critic_update");
  check_finite(loss_value, agent.critics.q2, "critic_update");
  return loss_value;
}

double actor_update(SACAgent& agent, const std::vector<const Transition*>& batch,
                    double* mean_log_prob) {
  Batch b = build_batch(batch, agent.visual_actor());
  const int d = static_cast<int>(agent.action_bounds.size());

  Tape tape;
  auto actor_bound = bind_params(tape, agent.actor);
  ActorHeads heads = actor_forward_bound(tape, agent, actor_bound, &b.states, &b.images, &b.jf);
  const Tensor noise = sample_noise(agent.rng, b.n, d);
  GaussianSample sample = gaussian_tanh_sample(tape, heads, noise, agent.action_bounds);

  // critics frozen: gradients flow only through the reparameterized action
  const int sa = tape.concat_cols(tape.leaf(&b.states, false), sample.action);
  const int q1 = forward_plain(tape, agent.critic_spec, bind_params(tape, agent.critics.q1, false), sa);
  const int q2 = forward_plain(tape, agent.critic_spec, bind_params(tape, agent.critics.q2, false), sa);
  const int minq = tape.min_elem(q1, q2);
  const int loss = tape.mean_all(
      tape.sub(tape.scale(sample.log_prob, static_cast<float>(agent.temp.alpha())), minq));
  tape.backward(loss);
  adam_step(agent.actor, collect_grads(tape, actor_bound), agent.actor_opt);

  const Tensor& lp = tape.val(sample.log_prob);
  const double mlp = dsum({lp.data.data(), lp.data.size()}) / b.n;
  if (mean_log_prob) *mean_log_prob = mlp;

  const double loss_value = tape.val(loss).data[0];
  check_finite(loss_value, agent.actor, "actor_update");
  if (!std::isfinite(mlp)) throw std::runtime_error("actor_update: non-finite log probability");
  return loss_value;
}

double alpha_apply(SACAgent& agent, double mean_log_prob) {
  // d/d(log_alpha) of E[-alpha (log pi + target_entropy)]
  const double g = -agent.temp.alpha() * (mean_log_prob + agent.temp.target_entropy);
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  agent.alpha_steps += 1;
  agent.alpha_m = b1 * agent.alpha_m + (1.0 - b1) * g;
  agent.alpha_v = b2 * agent.alpha_v + (1.0 - b2) * g * g;
  const double mhat = agent.alpha_m / (1.0 - std::pow(b1, static_cast<double>(agent.alpha_steps)));
  const double vhat = agent.alpha_v / (1.0 - std::pow(b2, static_cast<double>(agent.alpha_steps)));
  agent.temp.log_alpha -= agent.cfg.alpha_lr * mhat / (std::sqrt(vhat) + eps);
  if (!std::isfinite(agent.temp.log_alpha))
    throw std::runtime_error("alpha_update: non-finite log_alpha");
  return agent.temp.log_alpha;
}

double alpha_update(SACAgent& agent, const std::vector<const Transition*>& batch) {
  Batch b = build_batch(batch, agent.visual_actor());
  const int d = static_cast<int>(agent.action_bounds.size());
  Tape tape;
  auto actor_bound = bind_params(tape, agent.actor, false);
  ActorHeads heads = actor_forward_bound(tape, agent, actor_bound, &b.states, &b.images, &b.jf);
  const Tensor noise = sample_noise(agent.rng, b.n, d);
  GaussianSample sample = gaussian_tanh_sample(tape, heads, noise, agent.action_bounds);
  const Tensor& lp = tape.val(sample.log_prob);
  return alpha_apply(agent, dsum({lp.data.data(), lp.data.size()}) / b.n);
}

UpdateStats sac_update(SACAgent& agent, const std::vector<const Transition*>& batch) {
  UpdateStats stats;
  stats.critic_loss = critic_update(agent, batch);
  stats.actor_loss = actor_update(agent, batch, &stats.mean_log_prob);
  alpha_apply(agent, stats.mean_log_prob);
  stats.alpha = agent.temp.alpha();
  return stats;
}

void save_agent(const std::string& path, const SACAgent& agent,
                const std::vector<std::pair<std::string, std::string>>& extra_meta) {
  ParamSet all;
  for (const auto& [n, t] : agent.actor.items) all.add("actor." + n, t);
  for (const auto& [n, t] : agent.critics.q1.items) all.add("q1." + n, t);
  for (const auto& [n, t] : agent.critics.q2.items) all.add("q2." + n, t);
  for (const auto& [n, t] : agent.critics.target1.items) all.add("t1." + n, t);
  for (const auto& [n, t] : agent.critics.target2.items) all.add("t2." + n, t);
  std::vector<std::pair<std::string, std::string>> meta = extra_meta;
  meta.emplace_back("log_alpha", std::to_string(agent.temp.log_alpha));
  meta.emplace_back("target_entropy", std::to_string(agent.temp.target_entropy));
  save_checkpoint(path, all, meta);
}

namespace {

void split_prefixed(const ParamSet& all, const std::string& prefix, ParamSet& into) {
  for (auto& [name, tensor] : into.items) {
    const Tensor* src = all.find(prefix + name);
    if (!src) throw std::runtime_error("load_agent_params: missing tensor " + prefix + name);
    if (!src->same_shape(tensor))
      throw std::runtime_error("load_agent_params: shape mismatch at " + prefix + name + ": " +
                               src->shape_str() + " vs " + tensor.shape_str());
    tensor = *src;
  }
}

}  // namespace

void load_agent_params(const std::string& path, SACAgent& agent) {
  Checkpoint ck = load_checkpoint(path);
  split_prefixed(ck.params, "actor.", agent.actor);
  split_prefixed(ck.params, "q1.", agent.critics.q1);
  split_prefixed(ck.params, "q2.", agent.critics.q2);
  split_prefixed(ck.params, "t1.", agent.critics.target1);
  split_prefixed(ck.params, "t2.", agent.critics.target2);
  const std::string la = ck.meta_value("log_alpha");
  if (!la.empty()) agent.temp.log_alpha = std::stod(la);
}

}  // namespace mopa
