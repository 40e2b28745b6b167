#include "mopa/config.h"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mopa {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
  KeyValueConfig kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: malformed line " + std::to_string(lineno) + ": " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::runtime_error("config: empty key on line " + std::to_string(lineno));
    kv.set(key, value);
  }
  return kv;
}

bool KeyValueConfig::has(const std::string& key) const { return lookup(key) != nullptr; }

void KeyValueConfig::set(const std::string& key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(key, std::move(value));
}

const std::string* KeyValueConfig::lookup(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return &v;
  return nullptr;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const std::string* v = lookup(key);
  return v ? *v : fallback;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const std::string* v = lookup(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    const double d = std::stod(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' is not a number: " + *v);
  }
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  const std::string* v = lookup(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    const int i = std::stoi(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing characters");
    return i;
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' is not an integer: " + *v);
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const std::string* v = lookup(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "on" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "off" || *v == "no") return false;
  throw std::runtime_error("config: key '" + key + "' is not a boolean: " + *v);
}

std::string KeyValueConfig::require(const std::string& key) const {
  const std::string* v = lookup(key);
  if (!v) throw std::runtime_error("config: missing required key '" + key + "'");
  return *v;
}

std::string KeyValueConfig::canonical() const {
  std::vector<std::pair<std::string, std::string>> sorted = entries_;
  std::sort(sorted.begin(), sorted.end());
  std::ostringstream os;
  for (const auto& [k, v] : sorted) os << k << " = " << v << "\n";
  return os.str();
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

EnvConfig env_config_from(const KeyValueConfig& kv) {
  const Task task = task_from_name(kv.get_string("task", "push"));
  EnvConfig cfg = make_task_config(task);
  cfg.epsilon = kv.get_double("epsilon", cfg.epsilon);
  cfg.success_dist = kv.get_double("success_dist", cfg.success_dist);
  cfg.horizon = kv.get_int("horizon", cfg.horizon);
  cfg.success_bonus = kv.get_double("success_bonus", cfg.success_bonus);
  cfg.reward_scale = kv.get_double("reward_scale", cfg.reward_scale);
  cfg.image_size = kv.get_int("image_size", cfg.image_size);
  cfg.delta_q_step = kv.get_double("delta_q_step", cfg.delta_q_step);
  cfg.object_radius = kv.get_double("object_radius", cfg.object_radius);
  cfg.grasp_radius = kv.get_double("grasp_radius", cfg.grasp_radius);
  cfg.contact_margin = kv.get_double("contact_margin", cfg.contact_margin);
  cfg.collision_resolution = kv.get_double("collision_resolution", cfg.collision_resolution);
  cfg.contact_substep = kv.get_double("contact_substep", cfg.contact_substep);
  cfg.render_observations = kv.get_bool("render", cfg.render_observations);
  cfg.dr.enabled = kv.get_bool("dr.enabled", cfg.dr.enabled);
  cfg.dr.light_gain_lo = kv.get_double("dr.light_gain_lo", cfg.dr.light_gain_lo);
  cfg.dr.light_gain_hi = kv.get_double("dr.light_gain_hi", cfg.dr.light_gain_hi);
  cfg.dr.noise_amplitude = kv.get_double("dr.noise_amplitude", cfg.dr.noise_amplitude);
  if (kv.has("dr.color_jitter")) {
    const float j = static_cast<float>(kv.get_double("dr.color_jitter", 0.25));
    cfg.dr.background = color_band(0.92f, 0.92f, 0.95f, j);
    cfg.dr.arm = color_band(0.20f, 0.35f, 0.80f, j);
    cfg.dr.obstacle = color_band(0.45f, 0.42f, 0.40f, j);
    cfg.dr.object = color_band(0.85f, 0.15f, 0.15f, j * 0.8f);
    cfg.dr.goal = color_band(0.15f, 0.75f, 0.20f, j * 0.8f);
  }
  cfg.validate();
  return cfg;
}

EnvConfig load_env_config(const std::string& path) {
  return env_config_from(KeyValueConfig::from_file(path));
}

Scenario scenario_from(const KeyValueConfig& kv) {
  Scenario sc;
  sc.id = kv.get_string("scenario.id", "original");
  sc.distractor_count = kv.get_int("scenario.distractors", 0);
  sc.distractor_radius_lo = kv.get_double("scenario.distractor_radius_lo", sc.distractor_radius_lo);
  sc.distractor_radius_hi = kv.get_double("scenario.distractor_radius_hi", sc.distractor_radius_hi);
  if (kv.get_bool("scenario.recolor_background", false)) {
    sc.override_background = true;
    sc.background = color_band(0.80f, 0.85f, 0.80f, 0.15f);
  }
  if (kv.get_bool("scenario.recolor_obstacles", false)) {
    sc.override_obstacle_color = true;
    sc.obstacle_color = color_band(0.55f, 0.45f, 0.30f, 0.15f);
  }
  sc.obstacle_visual_scale = kv.get_double("scenario.obstacle_visual_scale", 1.0);
  sc.extra_noise = kv.get_double("scenario.extra_noise", 0.0);
  return sc;
}

Scenario load_scenario(const std::string& path) {
  return scenario_from(KeyValueConfig::from_file(path));
}

}  // namespace mopa
