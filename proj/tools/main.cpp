// mopa: planar motion-planner-augmented RL distillation workbench.
//
// Subcommands cover the full pipeline: train-mopa -> collect-demos ->
// train-bc -> collect-expert -> distill -> eval, plus transfer-eval,
// smoothness, plan and plot utilities. All randomness flows from --seed.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "mopa/checkpoint.h"
#include "mopa/config.h"
#include "mopa/dataset.h"
#include "mopa/distill.h"
#include "mopa/eval.h"
#include "mopa/mopa_agent.h"
#include "mopa/runio.h"

namespace fs = std::filesystem;
using namespace mopa;

namespace {

using Clock = std::chrono::steady_clock;

struct CommonOpts {
  std::string config_path;
  std::string task = "push";
  std::vector<std::string> overrides;  // key=value, win over the file
  std::string out_dir;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "environment configuration file");
  cmd->add_option("--env", opts.task, "task when no config file is given (push|lift|assembly)");
  cmd->add_option("--set", opts.overrides, "config override key=value (repeatable, wins)");
  cmd->add_option("--out", opts.out_dir, "output directory (default: under MOPA_PD_OUT)");
  cmd->add_option("--seed", opts.seed, "master seed for all randomness");
}

int fail_missing(const std::string& path) {
  std::cerr << "missing input artifact: " << path << "\n";
  return 3;
}

bool exists(const std::string& path) { return !path.empty() && fs::exists(path); }

KeyValueConfig effective_kv(const CommonOpts& opts) {
  KeyValueConfig kv = opts.config_path.empty() ? KeyValueConfig::from_string("")
                                               : KeyValueConfig::from_file(opts.config_path);
  if (!kv.has("task")) kv.set("task", opts.task);
  for (const std::string& kv_pair : opts.overrides) {
    const auto eq = kv_pair.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("--set expects key=value, got: " + kv_pair);
    kv.set(kv_pair.substr(0, eq), kv_pair.substr(eq + 1));
  }
  return kv;
}

std::string default_out(const std::string& command, std::uint64_t seed) {
  const char* root = std::getenv("MOPA_PD_OUT");
  const fs::path base = root && *root ? fs::path(root) : fs::path("runs");
  return (base / (command + "-seed" + std::to_string(seed))).string();
}

std::string resolve_out(const CommonOpts& opts, const std::string& command) {
  const std::string dir = opts.out_dir.empty() ? default_out(command, opts.seed) : opts.out_dir;
  fs::create_directories(dir);
  return dir;
}

std::string join_args(int argc, char** argv) {
  std::ostringstream os;
  for (int i = 0; i < argc; ++i) os << (i ? " " : "") << argv[i];
  return os.str();
}

RunManifest base_manifest(int argc, char** argv, const KeyValueConfig& kv, std::uint64_t seed) {
  RunManifest m;
  m.command = join_args(argc, argv);
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(fnv1a_hash(kv.canonical())));
  m.config_hash = hex;
  m.seeds = {seed};
  m.code_version = version_string();
  return m;
}

// rebuilds a state-augmented agent shape and loads the checkpoint into it
SACAgent load_state_agent(const std::string& path, const EnvConfig& cfg,
                          const AugmentedActionSpace& spaces) {
  SACAgent agent = make_sac_agent(NetworkSpec::state_actor(cfg.state_dim(), cfg.action_dim()),
                                  cfg.state_dim(), cfg.action_dim(), augmented_bounds(cfg, spaces),
                                  {}, 0);
  load_agent_params(path, agent);
  return agent;
}

SACAgent load_visual_agent(const std::string& path, const EnvConfig& cfg, SACConfig sac) {
  SACAgent agent = make_sac_agent(
      NetworkSpec::visual_actor(cfg.image_size, cfg.joint_feature_dim(), cfg.action_dim()),
      cfg.state_dim(), cfg.action_dim(), direct_bounds(cfg), sac, 0);
  load_agent_params(path, agent);
  return agent;
}

void print_metrics(const std::string& label, const Metrics& m) {
  std::printf("%-12s ASR %.3f  AEL %.1f  ADR %.2f  (%d episodes, %d seeds)\n", label.c_str(),
              m.asr, m.ael, m.adr, m.n_episodes, m.n_seeds);
}

void write_summary(const std::string& path,
                   const std::vector<std::pair<std::string, Metrics>>& rows) {
  std::ofstream out(path);
  out << "label,asr,ael,adr,n_episodes,n_seeds\n";
  for (const auto& [label, m] : rows)
    out << label << "," << m.asr << "," << m.ael << "," << m.adr << "," << m.n_episodes << ","
        << m.n_seeds << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planar motion-planner-augmented RL -> visual policy distillation workbench"};
  app.require_subcommand(1);

  // ----- train-mopa ----- //
  CommonOpts mopa_opts;
  int mopa_steps = 200000;
  double mopa_stop_asr = 0.8;
  double mopa_lr = 3e-4;
  int mopa_batch = 48;
  auto* cmd_mopa = app.add_subcommand("train-mopa", "train the state-based planner-augmented agent");
  add_common(cmd_mopa, mopa_opts);
  cmd_mopa->add_option("--steps", mopa_steps, "low-level env step budget");
  cmd_mopa->add_option("--stop-asr", mopa_stop_asr, "early-stop once evaluation reaches this ASR");
  cmd_mopa->add_option("--lr", mopa_lr, "optimizer learning rate");
  cmd_mopa->add_option("--batch", mopa_batch, "minibatch size");

  // ----- collect-demos ----- //
  CommonOpts demo_opts;
  std::string demo_policy;
  std::size_t demo_transitions = 100000;
  bool demo_stochastic = false;
  auto* cmd_demos = app.add_subcommand("collect-demos", "flatten expert rollouts into a dataset");
  add_common(cmd_demos, demo_opts);
  cmd_demos->add_option("--policy", demo_policy, "state-agent checkpoint")->required();
  cmd_demos->add_option("--transitions", demo_transitions, "number of low-level transitions");
  cmd_demos->add_flag("--stochastic", demo_stochastic, "sample the expert instead of its mean");

  // ----- train-bc ----- //
  CommonOpts bc_opts;
  std::string bc_dataset;
  BCTrainConfig bc_cfg;
  auto* cmd_bc = app.add_subcommand("train-bc", "behavioral cloning on a demonstration dataset");
  add_common(cmd_bc, bc_opts);
  cmd_bc->add_option("--dataset", bc_dataset, "demo dataset manifest")->required();
  cmd_bc->add_option("--epochs", bc_cfg.epochs, "training epochs");
  cmd_bc->add_option("--batch", bc_cfg.batch_size, "minibatch size");
  cmd_bc->add_option("--lr", bc_cfg.lr, "base learning rate");

  // ----- collect-expert ----- //
  CommonOpts exp_opts;
  std::string exp_policy;
  int exp_trajectories = 100;
  auto* cmd_expert = app.add_subcommand(
      "collect-expert", "store successful imitation episodes as the expert buffer");
  add_common(cmd_expert, exp_opts);
  cmd_expert->add_option("--policy", exp_policy, "imitation actor checkpoint")->required();
  cmd_expert->add_option("--trajectories", exp_trajectories, "successful episodes to keep");

  // ----- distill ----- //
  CommonOpts dist_opts;
  std::string dist_bc, dist_mopa, dist_expert, dist_demos;
  int dist_steps = 150000;
  bool dist_no_init = false, dist_no_smoothing = false, dist_dr = false;
  double dist_alpha_offset = 2.0;
  double dist_lr = 3e-4;
  int dist_batch = 48;
  double dist_milestone = 0.9;
  auto* cmd_distill = app.add_subcommand("distill", "guided asymmetric RL over the visual actor");
  add_common(cmd_distill, dist_opts);
  cmd_distill->add_option("--bc", dist_bc, "imitation actor checkpoint")->required();
  cmd_distill->add_option("--mopa", dist_mopa, "state-agent checkpoint (critic source)")->required();
  cmd_distill->add_option("--expert", dist_expert, "expert buffer dataset manifest");
  cmd_distill->add_option("--demos", dist_demos, "demo dataset manifest (with --no-smoothing)");
  cmd_distill->add_option("--steps", dist_steps, "env step budget");
  cmd_distill->add_flag("--no-init", dist_no_init, "skip actor/critic weight initialization");
  cmd_distill->add_flag("--no-smoothing", dist_no_smoothing,
                        "fill the expert buffer from raw demos instead of imitation rollouts");
  cmd_distill->add_flag("--dr", dist_dr, "train under domain randomization");
  cmd_distill->add_option("--alpha-offset", dist_alpha_offset,
                          "init log alpha = expert final log alpha - offset");
  cmd_distill->add_option("--lr", dist_lr, "optimizer learning rate");
  cmd_distill->add_option("--batch", dist_batch, "minibatch size");
  cmd_distill->add_option("--milestone-asr", dist_milestone, "record when evaluation reaches this");

  // ----- eval ----- //
  CommonOpts eval_opts;
  std::string eval_policy;
  int eval_episodes = 100, eval_seeds = 5;
  bool eval_stochastic = false;
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a policy checkpoint");
  add_common(cmd_eval, eval_opts);
  cmd_eval->add_option("--policy", eval_policy, "checkpoint (state or visual agent)")->required();
  cmd_eval->add_option("--episodes", eval_episodes, "episodes per seed");
  cmd_eval->add_option("--seeds", eval_seeds, "number of evaluation seeds");
  cmd_eval->add_flag("--stochastic", eval_stochastic, "sample actions instead of the mean");

  // ----- transfer-eval ----- //
  CommonOpts tr_opts;
  std::string tr_policy;
  std::vector<std::string> tr_scenarios;
  int tr_episodes = 100, tr_seeds = 5;
  auto* cmd_transfer = app.add_subcommand("transfer-eval", "evaluate across visual scenarios");
  add_common(cmd_transfer, tr_opts);
  cmd_transfer->add_option("--policy", tr_policy, "visual agent checkpoint")->required();
  cmd_transfer->add_option("--scenario", tr_scenarios,
                           "scenario config file (repeatable; 'original' for the plain env)");
  cmd_transfer->add_option("--episodes", tr_episodes, "episodes per seed");
  cmd_transfer->add_option("--seeds", tr_seeds, "number of evaluation seeds");

  // ----- smoothness ----- //
  CommonOpts sm_opts;
  std::string sm_mopa, sm_bc;
  int sm_pairs = 50;
  auto* cmd_smooth =
      app.add_subcommand("smoothness", "paired end-effector smoothness comparison");
  add_common(cmd_smooth, sm_opts);
  cmd_smooth->add_option("--mopa", sm_mopa, "state-agent checkpoint")->required();
  cmd_smooth->add_option("--bc", sm_bc, "imitation actor checkpoint")->required();
  cmd_smooth->add_option("--pairs", sm_pairs, "number of paired starts");

  // ----- plan ----- //
  CommonOpts plan_opts;
  std::vector<double> plan_start, plan_goal;
  auto* cmd_plan = app.add_subcommand("plan", "run the joint-space planner once (debug)");
  add_common(cmd_plan, plan_opts);
  cmd_plan->add_option("--start", plan_start, "start joint angles")->required();
  cmd_plan->add_option("--goal", plan_goal, "goal joint angles")->required();

  // ----- plot ----- //
  std::string plot_csv, plot_x = "step", plot_out;
  std::vector<std::string> plot_y;
  bool plot_traces = false;
  auto* cmd_plot = app.add_subcommand("plot", "render CSV columns to an SVG chart");
  cmd_plot->add_option("--csv", plot_csv, "input CSV")->required();
  cmd_plot->add_option("--x", plot_x, "x column");
  cmd_plot->add_option("--y", plot_y, "y column (repeatable)");
  cmd_plot->add_option("--svg", plot_out, "output SVG path")->required();
  cmd_plot->add_flag("--traces", plot_traces, "equal-aspect trace mode (columns: series,x,y)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  }

  const auto t_start = Clock::now();
  const auto wall = [&]() {
    return std::chrono::duration<double>(Clock::now() - t_start).count();
  };
  try {
    if (cmd_mopa->parsed()) {
      KeyValueConfig kv = effective_kv(mopa_opts);
      EnvConfig env_cfg = env_config_from(kv);
      const std::string out = resolve_out(mopa_opts, "train-mopa");
      MopaTrainConfig tc;
      tc.sac.batch_size = mopa_batch;
      tc.sac.lr = mopa_lr;
      tc.sac.alpha_lr = mopa_lr;
      tc.sac.buffer_capacity = 200000;
      tc.total_steps = mopa_steps;
      tc.stop_asr = mopa_stop_asr;
      tc.seed = mopa_opts.seed;
      tc.csv_path = out + "/training.csv";
      tc.checkpoint_path = out + "/mopa.ckpt";
      MopaTrainResult r = train_mopa(env_cfg, tc);
      std::printf("trained %d steps, best ASR %.3f, final log alpha %.3f\n", r.steps_used,
                  r.best_asr, r.final_log_alpha);
      RunManifest m = base_manifest(argc, argv, kv, mopa_opts.seed);
      m.outputs = {tc.checkpoint_path, tc.csv_path};
      m.final_log_alpha = r.final_log_alpha;
      m.wall_clock_sec = wall();
      write_run_manifest(out, m);
    } else if (cmd_demos->parsed()) {
      if (!exists(demo_policy)) return fail_missing(demo_policy);
      KeyValueConfig kv = effective_kv(demo_opts);
      EnvConfig env_cfg = env_config_from(kv);
      env_cfg.render_observations = true;
      const std::string out = resolve_out(demo_opts, "collect-demos");
      AugmentedActionSpace spaces;
      SACAgent agent = load_state_agent(demo_policy, env_cfg, spaces);
      DemoCollectOptions opt;
      opt.n_transitions = demo_transitions;
      opt.spaces = spaces;
      opt.deterministic = !demo_stochastic;
      opt.seed = demo_opts.seed;
      DemoCollectResult r = collect_demos(agent, env_cfg, opt);
      if (r.low_success_warning)
        std::fprintf(stderr,
                     "warning: no successful episode among the first 50; collecting anyway\n");
      const std::string manifest = out + "/demos.manifest";
      save_dataset(manifest, r.data, env_cfg, demo_opts.seed);
      std::printf("collected %zu transitions over %d episodes (%d successes)\n", r.data.size(),
                  r.episodes, r.successes);
      RunManifest m = base_manifest(argc, argv, kv, demo_opts.seed);
      m.outputs = {manifest};
      m.wall_clock_sec = wall();
      write_run_manifest(out, m);
    } else if (cmd_bc->parsed()) {
      if (!exists(bc_dataset)) return fail_missing(bc_dataset);
      KeyValueConfig kv = effective_kv(bc_opts);
      EnvConfig env_cfg = env_config_from(kv);
      const std::string out = resolve_out(bc_opts, "train-bc");
      ReplayBuffer demos = load_dataset(bc_dataset);
      bc_cfg.seed = bc_opts.seed;
      bc_cfg.csv_path = out + "/bc_report.csv";
      BCResult r = train_bc(demos, bc_cfg, env_cfg);
      const std::string ckpt = out + "/bc.ckpt";
      save_checkpoint(ckpt, r.params,
                      {{"kind", "bc-actor"},
                       {"selected_epoch", std::to_string(r.report.selected_epoch)},
                       {"val_success", std::to_string(r.report.selected_val_success)}});
      std::printf("selected epoch %d with validation success %.3f\n", r.report.selected_epoch,
                  r.report.selected_val_success);
      RunManifest m = base_manifest(argc, argv, kv, bc_opts.seed);
      m.outputs = {ckpt, bc_cfg.csv_path};
      m.wall_clock_sec = wall();
      write_run_manifest(out, m);
    } else if (cmd_expert->parsed()) {
      if (!exists(exp_policy)) return fail_missing(exp_policy);
      KeyValueConfig kv = effective_kv(exp_opts);
      EnvConfig env_cfg = env_config_from(kv);
      const std::string out = resolve_out(exp_opts, "collect-expert");
      Checkpoint ck = load_checkpoint(exp_policy);
      NetworkSpec spec = NetworkSpec::visual_actor(env_cfg.image_size, env_cfg.joint_feature_dim(),
                                                   env_cfg.action_dim());
      ExpertCollectResult r =
          collect_expert_buffer(spec, ck.params, env_cfg, exp_trajectories, exp_opts.seed);
      if (r.shortfall)
        std::fprintf(stderr, "warning: only %d successful trajectories within the retry budget\n",
                     r.trajectories);
      const std::string manifest = out + "/expert.manifest";
      save_dataset(manifest, r.buffer, env_cfg, exp_opts.seed);
      std::printf("stored %d trajectories (%zu transitions) from %d episodes\n", r.trajectories,
                  r.buffer.size(), r.episodes_tried);
      RunManifest m = base_manifest(argc, argv, kv, exp_opts.seed);
      m.outputs = {manifest};
      m.wall_clock_sec = wall();
      write_run_manifest(out, m);
    } else if (cmd_distill->parsed()) {
      if (!exists(dist_bc)) return fail_missing(dist_bc);
      if (!exists(dist_mopa)) return fail_missing(dist_mopa);
      KeyValueConfig kv = effective_kv(dist_opts);
      EnvConfig env_cfg = env_config_from(kv);
      if (dist_dr) env_cfg.dr.enabled = true;
      const std::string out = resolve_out(dist_opts, "distill");

      AugmentedActionSpace spaces;
      SACAgent mopa_agent_ck = load_state_agent(dist_mopa, env_cfg, spaces);
      const Checkpoint mopa_raw = load_checkpoint(dist_mopa);
      const double final_log_alpha = std::stod(mopa_raw.meta_value("final_log_alpha", "0"));

      Checkpoint bc = load_checkpoint(dist_bc);
      NetworkSpec bc_spec = NetworkSpec::visual_actor(
          env_cfg.image_size, env_cfg.joint_feature_dim(), env_cfg.action_dim());

      ReplayBuffer expert(1);
      if (dist_no_smoothing) {
        if (!exists(dist_demos)) return fail_missing(dist_demos);
        ReplayBuffer demos = load_dataset(dist_demos);
        expert = expert_buffer_from_demos(demos, 100, env_cfg.horizon);
      } else {
        if (!exists(dist_expert)) return fail_missing(dist_expert);
        expert = load_dataset(dist_expert);
      }

      SACConfig sac;
      sac.batch_size = dist_batch;
      sac.lr = dist_lr;
      sac.alpha_lr = dist_lr;
      sac.buffer_capacity = 200000;
      AsymInitOptions init_opt;
      init_opt.init_from_bc_and_critic = !dist_no_init;
      init_opt.alpha_offset = dist_alpha_offset;
      SACAgent agent = init_asym_agent(bc_spec, bc.params, mopa_agent_ck, final_log_alpha, env_cfg,
                                       sac, init_opt, dist_opts.seed);
      Stage2Config s2;
      s2.sac = sac;
      s2.total_steps = dist_steps;
      s2.milestone_asr = dist_milestone;
      s2.seed = dist_opts.seed;
      s2.csv_path = out + "/training.csv";
      s2.checkpoint_path = out + "/stage2.ckpt";
      Stage2Result r = stage2_train(std::move(agent), env_cfg, expert, s2);
      std::printf("stage-2 finished: best ASR %.3f, milestone step %d\n", r.best_asr,
                  r.milestone_step);
      RunManifest m = base_manifest(argc, argv, kv, dist_opts.seed);
      m.outputs = {s2.checkpoint_path, s2.csv_path};
      m.final_log_alpha = r.agent.temp.log_alpha;
      m.wall_clock_sec = wall();
      write_run_manifest(out, m);
    } else if (cmd_eval->parsed()) {
      if (!exists(eval_policy)) return fail_missing(eval_policy);
      KeyValueConfig kv = effective_kv(eval_opts);
      EnvConfig env_cfg = env_config_from(kv);
      const std::string out = resolve_out(eval_opts, "eval");
      Checkpoint ck = load_checkpoint(eval_policy);
      const std::string kind = ck.meta_value("kind", "visual-direct");

      EvalOptions opt;
      opt.episodes = eval_episodes;
      opt.seeds = eval_seeds;
      opt.seed_base = eval_opts.seed + 9000;
      opt.csv_path = out + "/episodes.csv";

      std::shared_ptr<SACAgent> holder;
      PolicyFactory factory;
      AugmentedActionSpace spaces;
      if (kind == "state-augmented") {
        env_cfg.render_observations = false;
        holder = std::make_shared<SACAgent>(load_state_agent(eval_policy, env_cfg, spaces));
        auto inner = mopa_policy_factory(*holder, env_cfg, spaces, PlannerConfig{},
                                         !eval_stochastic);
        factory = [holder, inner](std::uint64_t s) { return inner(s); };
      } else if (kind == "bc-actor") {
        auto spec = std::make_shared<NetworkSpec>(NetworkSpec::visual_actor(
            env_cfg.image_size, env_cfg.joint_feature_dim(), env_cfg.action_dim()));
        auto params = std::make_shared<ParamSet>(std::move(ck.params));
        auto inner = visual_policy_factory(*spec, *params, direct_bounds(env_cfg),
                                           !eval_stochastic);
        factory = [spec, params, inner](std::uint64_t s) { return inner(s); };
      } else {
        holder = std::make_shared<SACAgent>(load_visual_agent(eval_policy, env_cfg, {}));
        auto inner = visual_policy_factory(holder->actor_spec, holder->actor,
                                           direct_bounds(env_cfg), !eval_stochastic);
        factory = [holder, inner](std::uint64_t s) { return inner(s); };
      }
      EvalResult r = evaluate(env_cfg, factory, opt);
      print_metrics(kind, r.metrics);
      write_summary(out + "/summary.csv", {{kind, r.metrics}});
      RunManifest m = base_manifest(argc, argv, kv, eval_opts.seed);
      m.outputs = {opt.csv_path, out + "/summary.csv"};
      m.wall_clock_sec = wall();
      write_run_manifest(out, m);
    } else if (cmd_transfer->parsed()) {
      if (!exists(tr_policy)) return fail_missing(tr_policy);
      KeyValueConfig kv = effective_kv(tr_opts);
      EnvConfig env_cfg = env_config_from(kv);
      const std::string out = resolve_out(tr_opts, "transfer-eval");
      auto holder = std::make_shared<SACAgent>(load_visual_agent(tr_policy, env_cfg, {}));
      auto inner =
          visual_policy_factory(holder->actor_spec, holder->actor, direct_bounds(env_cfg), true);
      PolicyFactory factory = [holder, inner](std::uint64_t s) { return inner(s); };

      std::vector<Scenario> scenarios;
      for (const std::string& sc_path : tr_scenarios) {
        if (sc_path == "original") {
          scenarios.push_back(Scenario{});
        } else {
          if (!exists(sc_path)) return fail_missing(sc_path);
          scenarios.push_back(load_scenario(sc_path));
        }
      }
      if (scenarios.empty()) scenarios.push_back(Scenario{});

      EvalOptions opt;
      opt.episodes = tr_episodes;
      opt.seeds = tr_seeds;
      opt.seed_base = tr_opts.seed + 9100;
      opt.csv_path = out + "/episodes";
      auto rows = transfer_eval(env_cfg, scenarios, factory, opt);
      std::vector<std::pair<std::string, Metrics>> summary;
      for (const auto& sm : rows) {
        print_metrics(sm.id, sm.metrics);
        summary.emplace_back(sm.id, sm.metrics);
      }
      write_summary(out + "/summary.csv", summary);
      RunManifest m = base_manifest(argc, argv, kv, tr_opts.seed);
      m.outputs = {out + "/summary.csv"};
      m.wall_clock_sec = wall();
      write_run_manifest(out, m);
    } else if (cmd_smooth->parsed()) {
      if (!exists(sm_mopa)) return fail_missing(sm_mopa);
      if (!exists(sm_bc)) return fail_missing(sm_bc);
      KeyValueConfig kv = effective_kv(sm_opts);
      EnvConfig env_cfg = env_config_from(kv);
      env_cfg.render_observations = true;
      const std::string out = resolve_out(sm_opts, "smoothness");

      AugmentedActionSpace spaces;
      SACAgent mopa_agent_ck = load_state_agent(sm_mopa, env_cfg, spaces);
      Checkpoint bc = load_checkpoint(sm_bc);
      NetworkSpec bc_spec = NetworkSpec::visual_actor(
          env_cfg.image_size, env_cfg.joint_feature_dim(), env_cfg.action_dim());

      Environment env(env_cfg);
      PolicyFactory mopa_factory =
          mopa_policy_factory(mopa_agent_ck, env_cfg, spaces, PlannerConfig{}, true);
      PolicyFactory bc_factory =
          visual_policy_factory(bc_spec, bc.params, direct_bounds(env_cfg), true);

      std::vector<std::vector<JointConfig>> bc_trajs, mopa_trajs;
      std::ofstream traces(out + "/traces.csv");
      traces << "pair,series,x,y\n";
      for (int p = 0; p < sm_pairs; ++p) {
        const std::uint64_t ep_seed =
            hash_combine(sm_opts.seed, 7100 + static_cast<std::uint64_t>(p));
        EpisodeData bc_ep = collect_episode(env, bc_factory(ep_seed), ep_seed);
        EpisodeData mopa_ep = collect_episode(env, mopa_factory(ep_seed), ep_seed);
        for (const JointConfig& q : bc_ep.configs) {
          const Vec2 ee = end_effector(env_cfg.arm, q);
          traces << p << ",0," << ee.x << "," << ee.y << "\n";
        }
        for (const JointConfig& q : mopa_ep.configs) {
          const Vec2 ee = end_effector(env_cfg.arm, q);
          traces << p << ",1," << ee.x << "," << ee.y << "\n";
        }
        bc_trajs.push_back(std::move(bc_ep.configs));
        mopa_trajs.push_back(std::move(mopa_ep.configs));
      }
      SmoothnessReport rep = smoothness(bc_trajs, mopa_trajs, env_cfg.arm);
      std::printf("imitation rollouts are smoother in %.0f%% of %d pairs\n",
                  100.0 * rep.fraction_a_smoother, rep.pairs);
      std::ofstream rp(out + "/smoothness.csv");
      rp << "pair,msa_bc,msa_mopa,path_bc,path_mopa\n";
      for (int p = 0; p < rep.pairs; ++p)
        rp << p << "," << rep.msa_a[static_cast<std::size_t>(p)] << ","
           << rep.msa_b[static_cast<std::size_t>(p)] << ","
           << rep.path_length_a[static_cast<std::size_t>(p)] << ","
           << rep.path_length_b[static_cast<std::size_t>(p)] << "\n";
      RunManifest m = base_manifest(argc, argv, kv, sm_opts.seed);
      m.outputs = {out + "/smoothness.csv", out + "/traces.csv"};
      m.wall_clock_sec = wall();
      write_run_manifest(out, m);
    } else if (cmd_plan->parsed()) {
      KeyValueConfig kv = effective_kv(plan_opts);
      EnvConfig env_cfg = env_config_from(kv);
      const int k = env_cfg.arm.joints();
      if (static_cast<int>(plan_start.size()) != k || static_cast<int>(plan_goal.size()) != k) {
        std::cerr << "plan: expected " << k << " joint angles for --start/--goal\n";
        return 2;
      }
      PlannerConfig pc;
      pc.seed = plan_opts.seed;
      auto path =
          rrt_connect(make_config(env_cfg.arm, plan_start), make_config(env_cfg.arm, plan_goal),
                      env_cfg.arm, env_cfg.obstacles, pc);
      if (!path) {
        std::cerr << "plan: no path found\n";
        return 1;
      }
      Path cut = shortcut(*path, env_cfg.arm, env_cfg.obstacles, pc);
      std::printf("waypoint");
      for (int j = 0; j < k; ++j) std::printf(",q%d", j);
      std::printf("\n");
      for (std::size_t i = 0; i < cut.waypoints.size(); ++i) {
        std::printf("%zu", i);
        for (int j = 0; j < k; ++j)
          std::printf(",%.9f", cut.waypoints[i].angles[static_cast<std::size_t>(j)]);
        std::printf("\n");
      }
    } else if (cmd_plot->parsed()) {
      if (!exists(plot_csv)) return fail_missing(plot_csv);
      CsvTable table = read_csv(plot_csv);
      std::vector<Series> series;
      if (plot_traces) {
        const int cs = table.col("series");
        const int cx = table.col("x");
        const int cy = table.col("y");
        const int cp = table.col("pair");
        if (cx < 0 || cy < 0) throw std::runtime_error("plot --traces: need x and y columns");
        std::vector<std::string> labels;
        for (const auto& row : table.rows) {
          std::string label =
              cs >= 0 ? std::to_string(static_cast<long long>(row[static_cast<std::size_t>(cs)]))
                      : "trace";
          if (cp >= 0)
            label = std::to_string(static_cast<long long>(row[static_cast<std::size_t>(cp)])) +
                    ":" + label;
          auto it = std::find(labels.begin(), labels.end(), label);
          std::size_t idx;
          if (it == labels.end()) {
            labels.push_back(label);
            series.push_back({label, {}, {}});
            idx = series.size() - 1;
          } else {
            idx = static_cast<std::size_t>(it - labels.begin());
          }
          series[idx].x.push_back(row[static_cast<std::size_t>(cx)]);
          series[idx].y.push_back(row[static_cast<std::size_t>(cy)]);
        }
        // keep the legend readable
        for (auto& s : series)
          if (series.size() > 6) s.label.clear();
      } else {
        if (plot_y.empty()) throw std::runtime_error("plot: at least one --y column required");
        for (const std::string& yc : plot_y) {
          Series s;
          s.label = yc;
          s.x = table.column(plot_x);
          s.y = table.column(yc);
          series.push_back(std::move(s));
        }
      }
      write_svg_plot(plot_out, fs::path(plot_csv).filename().string(), plot_traces ? "x" : plot_x,
                     plot_traces ? "y" : "value", series, plot_traces);
      std::printf("wrote %s\n", plot_out.c_str());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
