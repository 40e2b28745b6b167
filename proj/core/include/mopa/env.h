#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mopa/geometry.h"

namespace mopa {

enum class Task { Push, Lift, Assembly };

std::string task_name(Task t);
Task task_from_name(const std::string& name);

struct Rect {
  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
  bool contains(Vec2 p) const {
    return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
  }
  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
};

struct ColorRange {
  float lo[3] = {0, 0, 0};
  float hi[3] = {1, 1, 1};
};
ColorRange fixed_color(float r, float g, float b);
ColorRange color_band(float r, float g, float b, float jitter);

// Per-episode appearance randomization: palettes, lighting, pixel noise.
// Geometry is never touched.
struct DomainRandomizationSpec {
  bool enabled = false;
  ColorRange background = color_band(0.92f, 0.92f, 0.95f, 0.25f);
  ColorRange arm = color_band(0.20f, 0.35f, 0.80f, 0.25f);
  ColorRange obstacle = color_band(0.45f, 0.42f, 0.40f, 0.25f);
  ColorRange object = color_band(0.85f, 0.15f, 0.15f, 0.20f);
  ColorRange goal = color_band(0.15f, 0.75f, 0.20f, 0.20f);
  double light_gain_lo = 0.75;
  double light_gain_hi = 1.25;
  double noise_amplitude = 0.02;
  void validate() const;
};

// Transfer-evaluation scenario: renders extra distractor disks and appearance
// changes on top of an unchanged task (collision geometry is untouched).
struct Scenario {
  std::string id = "original";
  int distractor_count = 0;
  double distractor_radius_lo = 0.04;
  double distractor_radius_hi = 0.07;
  ColorRange distractor_color = color_band(0.3f, 0.3f, 0.9f, 0.4f);
  bool override_background = false;
  ColorRange background;
  bool override_obstacle_color = false;
  ColorRange obstacle_color;
  double obstacle_visual_scale = 1.0;  // rendering only
  double extra_noise = 0.0;
};

// Resolved per-episode appearance (sampled once at reset).
struct EpisodeVisuals {
  float background[3] = {0.92f, 0.92f, 0.95f};
  float arm[3] = {0.20f, 0.35f, 0.80f};
  float obstacle[3] = {0.45f, 0.42f, 0.40f};
  float object[3] = {0.85f, 0.15f, 0.15f};
  float goal[3] = {0.15f, 0.75f, 0.20f};
  double light_gain = 1.0;
  double noise_amplitude = 0.0;
  std::uint64_t noise_seed = 0;
  std::vector<Vec2> distractor_pos;
  std::vector<double> distractor_radius;
  std::vector<std::array<float, 3>> distractor_colors;
};

struct EnvConfig {
  Task task = Task::Push;
  ArmSpec arm;
  std::vector<Obstacle> obstacles;

  double epsilon = 0.5;          // reward-activation radius
  double success_dist = 0.05;
  int horizon = 250;
  double success_bonus = 150.0;
  double reward_scale = 0.8;
  int image_size = 32;
  DomainRandomizationSpec dr;
  double delta_q_step = 0.1;

  // task layout
  double object_radius = 0.05;
  double contact_margin = 0.01;  // push threshold = object_radius + link_radius + margin
  double grasp_radius = 0.05;    // Lift
  double lift_wall_top = 0.0;    // Lift success height
  double lift_target_height = 0.0;
  Rect object_spawn;
  Rect goal_spawn;
  double min_object_goal_dist = 0.12;
  double max_object_goal_dist = 1e9;  // Push: goal sampled in an annulus around the object
  Vec2 hole_center;              // Assembly
  double hole_jitter = 0.03;
  Rect box_region;               // Push/Lift interior incl. walls; start predicate keeps the arm out
  double arm_start_clearance = 0.05;

  // camera window
  Vec2 view_center;
  double view_half_extent = 1.0;

  double contact_substep = 0.02;       // radians per push-contact substep
  double collision_resolution = 0.02;  // swept-motion sampling
  bool render_observations = true;
  Scenario scenario;

  int action_dim() const { return arm.joints() + (task == Task::Lift ? 1 : 0); }
  int joint_feature_dim() const { return 3 * arm.joints() + 1; }
  int state_dim() const;
  double push_contact_threshold() const {
    return object_radius + arm.link_radius + contact_margin;
  }
  void validate() const;
};

// desk-scale task factories (all fields set; config files override)
EnvConfig make_push_config();
EnvConfig make_lift_config();
EnvConfig make_assembly_config();
EnvConfig make_task_config(Task task);

struct EnvState {
  JointConfig q;
  std::vector<double> joint_vel;  // displacement applied on the last step
  Vec2 object_pos;
  Vec2 goal_pos;
  bool grasped = false;
  bool push_contacted = false;  // Push reward phase, latched on first contact
  int step_count = 0;
  double initial_object_y = 0.0;
  std::uint64_t episode_seed = 0;
  EpisodeVisuals visuals;
};

struct Observation {
  int image_size = 0;
  std::vector<float> image;            // CHW in [0,1]; empty when rendering is off
  std::vector<double> joint_features;  // sin/cos per joint, joint velocities, gripper
};

struct StepOutcome {
  EnvState state;
  std::vector<double> state_vec;
  Observation obs;
  double reward = 0.0;
  bool done = false;
  bool success = false;
};

// ----- operations ----- //

// Deterministic in (cfg, seed). Rejection-samples a collision-free start that
// satisfies the task's start predicate; throws std::runtime_error after 1000
// failed attempts.
StepOutcome env_reset(const EnvConfig& cfg, std::uint64_t seed);

// One direct step: joint displacement (plus gripper command in [-1,1] as the
// last component for Lift). Blocked swept motions leave the configuration
// unchanged. Throws std::invalid_argument on an action dimension mismatch.
StepOutcome env_step(const EnvConfig& cfg, const EnvState& state,
                     const std::vector<double>& action);

bool is_success(const EnvConfig& cfg, const EnvState& state);
// shaping plus the success bonus when the state is a success state
double compute_reward(const EnvConfig& cfg, const EnvState& state);

std::vector<double> state_vector(const EnvConfig& cfg, const EnvState& state);
Observation make_observation(const EnvConfig& cfg, const EnvState& state);

// render.cpp
std::vector<float> render(const EnvConfig& cfg, const EnvState& state);
std::vector<std::uint8_t> object_coverage_mask(const EnvConfig& cfg, const EnvState& state);

// Convenience wrapper owning the current state.
class Environment {
 public:
  explicit Environment(EnvConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const EnvConfig& config() const { return cfg_; }
  const EnvState& state() const { return state_; }
  const StepOutcome& last() const { return last_; }

  const StepOutcome& reset(std::uint64_t seed) {
    last_ = env_reset(cfg_, seed);
    state_ = last_.state;
    return last_;
  }
  const StepOutcome& step(const std::vector<double>& action) {
    last_ = env_step(cfg_, state_, action);
    state_ = last_.state;
    return last_;
  }

 private:
  EnvConfig cfg_;
  EnvState state_;
  StepOutcome last_;
};

}  // namespace mopa
