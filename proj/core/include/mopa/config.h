#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mopa/env.h"

namespace mopa {

// Flat typed key-value configuration:
//   # comment
//   key = value
// Values are strings; typed getters parse on demand. Unknown keys are kept so
// callers can validate against their documented schema.
class KeyValueConfig {
 public:
  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const;
  void set(const std::string& key, std::string value);  // flag overrides win

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  std::string require(const std::string& key) const;  // throws when missing

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  // sorted "key = value" lines; input to the config hash
  std::string canonical() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  const std::string* lookup(const std::string& key) const;
};

std::uint64_t fnv1a_hash(const std::string& text);

// Environment configuration schema. Starts from the task factory defaults
// (key `task` = push | lift | assembly) and overrides the documented keys:
//   epsilon, success_dist, horizon, success_bonus, reward_scale, image_size,
//   delta_q_step, object_radius, grasp_radius, contact_margin,
//   collision_resolution, contact_substep, dr.enabled, dr.light_gain_lo,
//   dr.light_gain_hi, dr.noise_amplitude, dr.color_jitter, render
EnvConfig env_config_from(const KeyValueConfig& kv);
EnvConfig load_env_config(const std::string& path);

// Scenario schema: scenario.id, scenario.distractors,
// scenario.distractor_radius_lo/hi, scenario.recolor_background,
// scenario.obstacle_visual_scale, scenario.recolor_obstacles,
// scenario.extra_noise
Scenario scenario_from(const KeyValueConfig& kv);
Scenario load_scenario(const std::string& path);

}  // namespace mopa
