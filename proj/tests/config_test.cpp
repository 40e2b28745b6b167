#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mopa/config.h"

using namespace mopa;

TEST_CASE("flat key-value parsing with comments and overrides") {
  const std::string text =
      "# a comment\n"
      "task = push\n"
      "epsilon = 0.4   # trailing comment\n"
      "horizon = 120\n"
      "dr.enabled = true\n"
      "\n";
  KeyValueConfig kv = KeyValueConfig::from_string(text);
  CHECK(kv.get_string("task", "?") == "push");
  CHECK(kv.get_double("epsilon", 0) == doctest::Approx(0.4));
  CHECK(kv.get_int("horizon", 0) == 120);
  CHECK(kv.get_bool("dr.enabled", false));
  CHECK(kv.get_double("missing", 2.5) == 2.5);
  kv.set("horizon", "99");
  CHECK(kv.get_int("horizon", 0) == 99);
  CHECK_THROWS(kv.require("nope"));
  CHECK_THROWS(KeyValueConfig::from_string("novalue\n"));
  CHECK_THROWS(kv.get_int("task", 0));
}

TEST_CASE("canonical form is sorted and hashable") {
  KeyValueConfig a = KeyValueConfig::from_string("b = 2\na = 1\n");
  KeyValueConfig b = KeyValueConfig::from_string("a = 1\nb = 2\n");
  CHECK(a.canonical() == b.canonical());
  CHECK(fnv1a_hash(a.canonical()) == fnv1a_hash(b.canonical()));
  CHECK(fnv1a_hash("x") != fnv1a_hash("y"));
}

TEST_CASE("environment config loads from the documented schema") {
  const std::string text =
      "task = lift\n"
      "epsilon = 0.33\n"
      "horizon = 200\n"
      "image_size = 16\n"
      "reward_scale = 0.5\n"
      "dr.enabled = true\n"
      "dr.noise_amplitude = 0.05\n";
  EnvConfig cfg = env_config_from(KeyValueConfig::from_string(text));
  CHECK(cfg.task == Task::Lift);
  CHECK(cfg.epsilon == doctest::Approx(0.33));
  CHECK(cfg.horizon == 200);
  CHECK(cfg.image_size == 16);
  CHECK(cfg.dr.enabled);
  CHECK(cfg.dr.noise_amplitude == doctest::Approx(0.05));
  CHECK(cfg.action_dim() == 4);  // three joints + gripper
}

TEST_CASE("scenario files configure distractors and recolors") {
  const std::string text =
      "scenario.id = scene1\n"
      "scenario.distractors = 3\n"
      "scenario.recolor_background = true\n"
      "scenario.obstacle_visual_scale = 1.1\n";
  Scenario sc = scenario_from(KeyValueConfig::from_string(text));
  CHECK(sc.id == "scene1");
  CHECK(sc.distractor_count == 3);
  CHECK(sc.override_background);
  CHECK(sc.obstacle_visual_scale == doctest::Approx(1.1));
}

TEST_CASE("config round trip through a file") {
  const auto path = std::filesystem::temp_directory_path() / "mopa_cfg_test.cfg";
  {
    std::ofstream out(path);
    out << "task = assembly\nepsilon = 0.21\n";
  }
  EnvConfig cfg = load_env_config(path.string());
  CHECK(cfg.task == Task::Assembly);
  CHECK(cfg.epsilon == doctest::Approx(0.21));
  std::filesystem::remove(path);
  CHECK_THROWS(load_env_config(path.string()));
}
