#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fstream>

#include "mopa/eval.h"
#include "mopa/mopa_agent.h"
#include "mopa/runio.h"

using namespace mopa;

TEST_CASE("discounted return identities") {
  CHECK(discounted_return({150.0}, 0.99) == doctest::Approx(150.0));
  CHECK(discounted_return({0.0, 0.0, 150.0}, 0.99) == doctest::Approx(147.015).epsilon(1e-9));
  CHECK(discounted_return({}, 0.99) == 0.0);
  CHECK_THROWS(discounted_return({1.0}, 1.5));
}

TEST_CASE("metric aggregation follows the stated conventions") {
  std::vector<EpisodeRecord> records;
  SUBCASE("always-successful stub finishing at step 10") {
    for (int i = 0; i < 20; ++i) records.push_back({0, i, true, 10, 42.0});
    Metrics m = metrics_from_records(records, 250);
    CHECK(m.asr == doctest::Approx(1.0));
    CHECK(m.ael == doctest::Approx(10.0));
    CHECK(m.adr == doctest::Approx(42.0));
  }
  SUBCASE("never-successful stub reports the horizon as AEL") {
    for (int i = 0; i < 20; ++i) records.push_back({0, i, false, 250, 0.0});
    Metrics m = metrics_from_records(records, 250);
    CHECK(m.asr == doctest::Approx(0.0));
    CHECK(m.ael == doctest::Approx(250.0));
  }
  SUBCASE("metrics are invariant to episode ordering") {
    Rng rng(3);
    for (int i = 0; i < 50; ++i)
      records.push_back({i % 5, i, i % 3 == 0, 10 + i, rng.uniform(0, 100)});
    Metrics a = metrics_from_records(records, 250);
    std::reverse(records.begin(), records.end());
    Metrics b = metrics_from_records(records, 250);
    CHECK(a.asr == doctest::Approx(b.asr));
    CHECK(a.ael == doctest::Approx(b.ael));
    CHECK(a.adr == doctest::Approx(b.adr));
  }
}

TEST_CASE("evaluation emits a CSV whose recomputation matches") {
  EnvConfig cfg = make_assembly_config();
  cfg.image_size = 12;
  cfg.horizon = 40;
  cfg.success_dist = 0.34;  // reachable by drift from the start ring
  Rng prng(5);
  NetworkSpec spec = NetworkSpec::state_actor(cfg.state_dim(), cfg.action_dim());
  ParamSet params = init_params(spec, prng);
  EvalOptions opt;
  opt.episodes = 12;
  opt.seeds = 3;
  opt.csv_path = "/tmp/mopa_eval_test.csv";
  EvalResult r = evaluate(cfg, state_policy_factory(spec, params, direct_bounds(cfg), true), opt);
  CHECK(r.episodes.size() == 36);
  CHECK(r.metrics.n_seeds == 3);

  // independent recomputation from the emitted CSV
  auto records = read_episode_csv(opt.csv_path);
  REQUIRE(records.size() == r.episodes.size());
  Metrics again = metrics_from_records(records, cfg.horizon);
  CHECK(std::fabs(again.asr - r.metrics.asr) <= 1e-9);
  CHECK(std::fabs(again.ael - r.metrics.ael) <= 1e-9);
  CHECK(std::fabs(again.adr - r.metrics.adr) <= 1e-9);
  std::remove(opt.csv_path.c_str());

  // ADR never exceeds the all-max-reward bound
  const double bound = discounted_return(
      std::vector<double>(static_cast<std::size_t>(cfg.horizon),
                          cfg.reward_scale + cfg.success_bonus),
      opt.gamma);
  CHECK(r.metrics.adr <= bound);
}

TEST_CASE("determinism: identical evaluations give identical records") {
  EnvConfig cfg = make_push_config();
  cfg.image_size = 12;
  cfg.horizon = 30;
  Rng prng(7);
  NetworkSpec spec = NetworkSpec::state_actor(cfg.state_dim(), cfg.action_dim());
  ParamSet params = init_params(spec, prng);
  EvalOptions opt;
  opt.episodes = 6;
  opt.seeds = 2;
  EvalResult a = evaluate(cfg, state_policy_factory(spec, params, direct_bounds(cfg), true), opt);
  EvalResult b = evaluate(cfg, state_policy_factory(spec, params, direct_bounds(cfg), true), opt);
  REQUIRE(a.episodes.size() == b.episodes.size());
  for (std::size_t i = 0; i < a.episodes.size(); ++i) {
    CHECK(a.episodes[i].length == b.episodes[i].length);
    CHECK(a.episodes[i].discounted == b.episodes[i].discounted);
  }
}

TEST_CASE("smoothness metrics behave like second differences") {
  ArmSpec arm;
  arm.base = {0, 0};
  arm.link_lengths = {1.0, 1.0};
  arm.joint_limits = {{-3, 3}, {-3, 3}};

  SUBCASE("constant-velocity joint motion has zero acceleration") {
    std::vector<JointConfig> traj;
    for (int i = 0; i <= 10; ++i) traj.push_back(make_config(arm, {0.001 * i, 0.001 * i}));
    // nearly straight end-effector path; second differences vanish to first order
    CHECK(mean_squared_acceleration(ee_series_from_configs(arm, traj)) <= 1e-9);
    std::vector<Vec2> line;
    for (int i = 0; i <= 10; ++i) line.push_back({0.1 * i, 0.05 * i});
    CHECK(mean_squared_acceleration(line) == doctest::Approx(0.0));
  }
  SUBCASE("zig-zag exceeds its straightened version and reversal is invariant") {
    std::vector<Vec2> zig, straight;
    for (int i = 0; i <= 20; ++i) {
      zig.push_back({0.1 * i, (i % 2) ? 0.1 : -0.1});
      straight.push_back({0.1 * i, 0.0});
    }
    CHECK(mean_squared_acceleration(zig) > mean_squared_acceleration(straight));
    std::vector<Vec2> rev(zig.rbegin(), zig.rend());
    CHECK(mean_squared_acceleration(rev) == doctest::Approx(mean_squared_acceleration(zig)));
  }
  SUBCASE("paired reporting and the unpaired error") {
    std::vector<JointConfig> smooth_traj, jerky_traj;
    Rng rng(3);
    for (int i = 0; i <= 30; ++i) {
      smooth_traj.push_back(make_config(arm, {0.02 * i, -0.01 * i}));
      jerky_traj.push_back(
          make_config(arm, {0.02 * i + rng.uniform(-0.05, 0.05), -0.01 * i + rng.uniform(-0.05, 0.05)}));
    }
    SmoothnessReport rep = smoothness({smooth_traj}, {jerky_traj}, arm);
    CHECK(rep.pairs == 1);
    CHECK(rep.fraction_a_smoother == doctest::Approx(1.0));
    CHECK(rep.msa_a[0] < rep.msa_b[0]);
    CHECK_THROWS_AS(smoothness({smooth_traj}, {}, arm), std::invalid_argument);
  }
}

TEST_CASE("transfer evaluation: original scenario equals the plain environment") {
  EnvConfig cfg = make_push_config();
  cfg.image_size = 12;
  cfg.horizon = 25;
  Rng prng(11);
  NetworkSpec spec = NetworkSpec::state_actor(cfg.state_dim(), cfg.action_dim());
  ParamSet params = init_params(spec, prng);
  PolicyFactory factory = state_policy_factory(spec, params, direct_bounds(cfg), true);
  EvalOptions opt;
  opt.episodes = 8;
  opt.seeds = 2;

  Scenario original;  // defaults: no distractors, no recolor
  Scenario busy;
  busy.id = "scenario1";
  busy.distractor_count = 3;
  busy.override_background = true;
  busy.background = color_band(0.8f, 0.85f, 0.8f, 0.1f);

  auto per_scenario = transfer_eval(cfg, {original, busy}, factory, opt);
  REQUIRE(per_scenario.size() == 2);
  Metrics direct = evaluate(cfg, factory, opt).metrics;
  CHECK(per_scenario[0].metrics.asr == doctest::Approx(direct.asr));
  CHECK(per_scenario[0].metrics.adr == doctest::Approx(direct.adr));
  // the state policy ignores pixels: scenario visuals cannot change outcomes
  CHECK(per_scenario[1].metrics.adr == doctest::Approx(direct.adr));
}

TEST_CASE("distractors never overlap the object or goal spawn regions") {
  EnvConfig cfg = make_push_config();
  cfg.image_size = 12;
  cfg.scenario.id = "scenario1";
  cfg.scenario.distractor_count = 4;
  const auto overlaps = [](const Rect& r, Vec2 c, double rad) {
    const double cx = std::clamp(c.x, r.xmin, r.xmax);
    const double cy = std::clamp(c.y, r.ymin, r.ymax);
    return distance(c, {cx, cy}) <= rad;
  };
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    StepOutcome out = env_reset(cfg, seed);
    for (std::size_t i = 0; i < out.state.visuals.distractor_pos.size(); ++i) {
      const Vec2 p = out.state.visuals.distractor_pos[i];
      const double r = out.state.visuals.distractor_radius[i];
      CHECK_FALSE(overlaps(cfg.object_spawn, p, r));
      CHECK_FALSE(overlaps(cfg.goal_spawn, p, r));
    }
  }
}

TEST_CASE("csv table reader and svg plot writer") {
  const std::string csv_path = "/tmp/mopa_table_test.csv";
  {
    std::ofstream out(csv_path);
    out << "step,value\n1,2.5\n2,3.5\n3,1.0\n";
  }
  CsvTable table = read_csv(csv_path);
  CHECK(table.columns.size() == 2);
  CHECK(table.col("value") == 1);
  CHECK(table.column("step").size() == 3);
  CHECK(table.column("value")[1] == doctest::Approx(3.5));

  const std::string svg_path = "/tmp/mopa_plot_test.svg";
  Series s;
  s.label = "value";
  s.x = table.column("step");
  s.y = table.column("value");
  write_svg_plot(svg_path, "test", "step", "value", {s});
  std::ifstream in(svg_path);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all.find("<svg") != std::string::npos);
  CHECK(all.find("polyline") != std::string::npos);
  std::remove(csv_path.c_str());
  std::remove(svg_path.c_str());
}
