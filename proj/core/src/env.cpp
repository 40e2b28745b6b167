#include "mopa/env.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mopa {

std::string task_name(Task t) {
  switch (t) {
    case Task::Push: return "push";
    case Task::Lift: return "lift";
    case Task::Assembly: return "assembly";
  }
  return "push";
}

Task task_from_name(const std::string& name) {
  if (name == "push") return Task::Push;
  if (name == "lift") return Task::Lift;
  if (name == "assembly") return Task::Assembly;
  throw std::invalid_argument("unknown task: " + name);
}

ColorRange fixed_color(float r, float g, float b) {
  ColorRange c;
  c.lo[0] = c.hi[0] = r;
  c.lo[1] = c.hi[1] = g;
  c.lo[2] = c.hi[2] = b;
  return c;
}

ColorRange color_band(float r, float g, float b, float jitter) {
  ColorRange c;
  const float base[3] = {r, g, b};
  for (int i = 0; i < 3; ++i) {
    c.lo[i] = std::clamp(base[i] - jitter, 0.0f, 1.0f);
    c.hi[i] = std::clamp(base[i] + jitter, 0.0f, 1.0f);
  }
  return c;
}

void DomainRandomizationSpec::validate() const {
  const ColorRange* ranges[5] = {&background, &arm, &obstacle, &object, &goal};
  for (const ColorRange* r : ranges)
    for (int i = 0; i < 3; ++i)
      if (r->lo[i] < 0.0f || r->hi[i] > 1.0f || r->lo[i] > r->hi[i])
        throw std::invalid_argument("DomainRandomizationSpec: palette range out of bounds");
  if (light_gain_lo <= 0.0 || light_gain_lo > light_gain_hi)
    throw std::invalid_argument("DomainRandomizationSpec: bad lighting range");
  if (noise_amplitude < 0.0)
    throw std::invalid_argument("DomainRandomizationSpec: negative noise amplitude");
}

int EnvConfig::state_dim() const {
  const int k = arm.joints();
  switch (task) {
    case Task::Push: return 3 * k + 8;      // sin/cos, vel, ee, obj, goal, d_eo, d_og
    case Task::Lift: return 3 * k + 9;      // sin/cos, vel, ee, obj, goal, d_eo, gripper, grasped
    case Task::Assembly: return 3 * k + 7;  // sin/cos, vel, peg head, peg tail, hole, d
  }
  return 0;
}

void EnvConfig::validate() const {
  arm.validate();
  dr.validate();
  if (horizon <= 0) throw std::invalid_argument("EnvConfig: horizon must be positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("EnvConfig: epsilon must be positive");
  if (!(success_dist > 0.0)) throw std::invalid_argument("EnvConfig: success_dist must be positive");
  if (image_size < 8) throw std::invalid_argument("EnvConfig: image_size must be at least 8");
  if (!(delta_q_step > 0.0)) throw std::invalid_argument("EnvConfig: delta_q_step must be positive");
  if (!(contact_substep > 0.0) || !(collision_resolution > 0.0))
    throw std::invalid_argument("EnvConfig: substep resolutions must be positive");
}

namespace {

ArmSpec desk_arm() {
  ArmSpec arm;
  arm.base = {0.0, 0.0};
  arm.link_lengths = {0.40, 0.35, 0.25};
  arm.joint_limits = {{-1.9, 1.9}, {-2.4, 2.4}, {-2.4, 2.4}};
  arm.link_radius = 0.015;
  return arm;
}

}  // namespace

EnvConfig make_push_config() {
  EnvConfig cfg;
  cfg.task = Task::Push;
  cfg.arm = desk_arm();
  // shallow C-shaped box to the right of the base; the opening faces the arm
  const double t = 0.05;               // wall thickness
  const double x0 = 0.42, x1 = 0.92;   // outer x extent
  const double y0 = -0.35, y1 = 0.35;  // outer y extent
  const double gap = 0.20;             // opening half-width
  cfg.obstacles = {
      Obstacle::rect(x0, x1, y1 - t, y1),    // top
      Obstacle::rect(x0, x1, y0, y0 + t),    // bottom
      Obstacle::rect(x1 - t, x1, y0, y1),    // right
      Obstacle::rect(x0, x0 + t, gap, y1),   // left, above the opening
      Obstacle::rect(x0, x0 + t, y0, -gap),  // left, below the opening
  };
  cfg.box_region = {x0, x1, y0, y1};
  cfg.object_radius = 0.05;
  cfg.contact_margin = 0.12;  // reward contact threshold = 0.185
  cfg.object_spawn = {0.56, 0.66, -0.10, 0.10};
  cfg.goal_spawn = {0.56, 0.85, -0.14, 0.14};
  // the annulus keeps the post-contact shaping at least as rewarding as
  // hovering at the contact threshold, so touching always pays
  cfg.min_object_goal_dist = 0.12;
  cfg.max_object_goal_dist = 0.185;
  cfg.epsilon = 0.5;
  cfg.reward_scale = 0.8;
  cfg.view_center = {0.30, 0.0};
  cfg.view_half_extent = 0.80;
  return cfg;
}

EnvConfig make_lift_config() {
  EnvConfig cfg;
  cfg.task = Task::Lift;
  cfg.arm = desk_arm();
  // open-top box; the object rests on the floor and must come out over a wall
  const double t = 0.05;
  const double x0 = 0.35, x1 = 0.80;
  const double floor_y = -0.48, top_y = 0.05;
  cfg.obstacles = {
      Obstacle::rect(x0, x0 + t, floor_y, top_y),    // left wall
      Obstacle::rect(x1 - t, x1, floor_y, top_y),    // right wall
      Obstacle::rect(x0, x1, floor_y, floor_y + t),  // floor
  };
  cfg.box_region = {x0, x1, floor_y, top_y};
  cfg.object_radius = 0.05;
  cfg.object_spawn = {0.48, 0.68, -0.36, -0.36};  // resting on the floor
  cfg.goal_spawn = {0.48, 0.68, 0.22, 0.22};      // rendered lift target
  cfg.lift_wall_top = top_y;
  cfg.lift_target_height = top_y + 0.17;
  cfg.epsilon = 0.5;
  cfg.reward_scale = 0.5;
  cfg.view_center = {0.30, -0.05};
  cfg.view_half_extent = 0.80;
  return cfg;
}

EnvConfig make_assembly_config() {
  EnvConfig cfg;
  cfg.task = Task::Assembly;
  cfg.arm = desk_arm();
  // hole between three leg obstacles; the peg is the distal part of the last
  // link, so the peg head is the end-effector
  cfg.hole_center = {0.62, 0.02};
  cfg.hole_jitter = 0.03;
  const Vec2 h = cfg.hole_center;
  const double leg_r = 0.045;
  cfg.obstacles = {
      Obstacle::circle({h.x - 0.16, h.y + 0.13}, leg_r),
      Obstacle::circle({h.x + 0.16, h.y + 0.13}, leg_r),
      Obstacle::circle({h.x, h.y - 0.20}, leg_r),
  };
  cfg.box_region = {h.x - 0.3, h.x + 0.3, h.y - 0.35, h.y + 0.3};
  cfg.object_spawn = {h.x - 0.05, h.x + 0.05, h.y - 0.05, h.y + 0.05};
  cfg.goal_spawn = cfg.object_spawn;
  cfg.epsilon = 0.5;
  cfg.reward_scale = 1.0;
  cfg.view_center = {0.30, 0.0};
  cfg.view_half_extent = 0.80;
  return cfg;
}

EnvConfig make_task_config(Task task) {
  switch (task) {
    case Task::Push: return make_push_config();
    case Task::Lift: return make_lift_config();
    case Task::Assembly: return make_assembly_config();
  }
  return make_push_config();
}

namespace {

void sample_color(const ColorRange& range, Rng& rng, float* out) {
  for (int i = 0; i < 3; ++i)
    out[i] = static_cast<float>(rng.uniform(range.lo[i], range.hi[i]));
}

Rect inflate(const Rect& r, double by) {
  return {r.xmin - by, r.xmax + by, r.ymin - by, r.ymax + by};
}

EpisodeVisuals sample_visuals(const EnvConfig& cfg, Rng& rng) {
  EpisodeVisuals vis;  // defaults are the canonical palette
  if (cfg.dr.enabled) {
    sample_color(cfg.dr.background, rng, vis.background);
    sample_color(cfg.dr.arm, rng, vis.arm);
    sample_color(cfg.dr.obstacle, rng, vis.obstacle);
    sample_color(cfg.dr.object, rng, vis.object);
    sample_color(cfg.dr.goal, rng, vis.goal);
    vis.light_gain = rng.uniform(cfg.dr.light_gain_lo, cfg.dr.light_gain_hi);
    vis.noise_amplitude = cfg.dr.noise_amplitude;
    vis.noise_seed = rng.next_u64();
  }
  const Scenario& sc = cfg.scenario;
  if (sc.override_background) sample_color(sc.background, rng, vis.background);
  if (sc.override_obstacle_color) sample_color(sc.obstacle_color, rng, vis.obstacle);
  if (sc.extra_noise > 0.0) {
    vis.noise_amplitude += sc.extra_noise;
    if (vis.noise_seed == 0) vis.noise_seed = rng.next_u64();
  }
  if (sc.distractor_count > 0) {
    // distractors never enter the object or goal spawn regions
    const Rect keepout_obj = inflate(cfg.object_spawn, cfg.object_radius + 0.08);
    const Rect keepout_goal = inflate(cfg.goal_spawn, cfg.object_radius + 0.08);
    const double he = cfg.view_half_extent * 0.9;
    for (int i = 0; i < sc.distractor_count; ++i) {
      for (int attempt = 0; attempt < 200; ++attempt) {
        Vec2 p{cfg.view_center.x + rng.uniform(-he, he),
               cfg.view_center.y + rng.uniform(-he, he)};
        const double r = rng.uniform(sc.distractor_radius_lo, sc.distractor_radius_hi);
        const Rect bubble{p.x - r, p.x + r, p.y - r, p.y + r};
        const auto overlaps = [](const Rect& a, const Rect& b) {
          return a.xmin <= b.xmax && b.xmin <= a.xmax && a.ymin <= b.ymax && b.ymin <= a.ymax;
        };
        if (overlaps(bubble, keepout_obj) || overlaps(bubble, keepout_goal)) continue;
        vis.distractor_pos.push_back(p);
        vis.distractor_radius.push_back(r);
        std::array<float, 3> col{};
        sample_color(sc.distractor_color, rng, col.data());
        vis.distractor_colors.push_back(col);
        break;
      }
    }
  }
  return vis;
}

bool start_predicate(const EnvConfig& cfg, const JointConfig& q) {
  const Vec2 ee = end_effector(cfg.arm, q);
  switch (cfg.task) {
    case Task::Push:
    case Task::Lift:
      return !inflate(cfg.box_region, cfg.arm_start_clearance).contains(ee);
    case Task::Assembly:
      return distance(ee, cfg.hole_center) >= 0.35;
  }
  return true;
}

StepOutcome finish_outcome(const EnvConfig& cfg, EnvState state) {
  StepOutcome out;
  out.success = is_success(cfg, state);
  out.done = out.success || state.step_count >= cfg.horizon;
  out.reward = compute_reward(cfg, state);
  out.state_vec = state_vector(cfg, state);
  out.obs = make_observation(cfg, state);
  out.state = std::move(state);
  return out;
}

// push the object disk out of any obstacle it overlaps; returns false when
// the resolution fails (caller reverts the object)
bool resolve_object_obstacles(const EnvConfig& cfg, Vec2& pos) {
  for (int round = 0; round < 4; ++round) {
    bool moved = false;
    for (const Obstacle& obs : cfg.obstacles) {
      if (obs.kind == Obstacle::Kind::AxisRect) {
        const double cx = std::clamp(pos.x, obs.xmin, obs.xmax);
        const double cy = std::clamp(pos.y, obs.ymin, obs.ymax);
        const Vec2 cp{cx, cy};
        const double d = distance(pos, cp);
        if (d >= cfg.object_radius) continue;
        if (d > 1e-9) {
          const Vec2 dir = (pos - cp) * (1.0 / d);
          pos = cp + dir * (cfg.object_radius + 1e-6);
        } else {
          // center inside the rect: exit through the nearest face
          const double to_left = pos.x - obs.xmin, to_right = obs.xmax - pos.x;
          const double to_down = pos.y - obs.ymin, to_up = obs.ymax - pos.y;
          const double m = std::min(std::min(to_left, to_right), std::min(to_down, to_up));
          if (m == to_left) pos.x = obs.xmin - cfg.object_radius - 1e-6;
          else if (m == to_right) pos.x = obs.xmax + cfg.object_radius + 1e-6;
          else if (m == to_down) pos.y = obs.ymin - cfg.object_radius - 1e-6;
          else pos.y = obs.ymax + cfg.object_radius + 1e-6;
        }
        moved = true;
      } else {
        const double d = distance(pos, obs.center);
        const double want = cfg.object_radius + obs.radius;
        if (d >= want) continue;
        const Vec2 dir = d > 1e-9 ? (pos - obs.center) * (1.0 / d) : Vec2{1.0, 0.0};
        pos = obs.center + dir * (want + 1e-6);
        moved = true;
      }
    }
    if (!moved) return true;
  }
  return !disk_collides(pos, cfg.object_radius, cfg.obstacles);
}

void apply_contact_rules(const EnvConfig& cfg, EnvState& st, const JointConfig& q_sub) {
  const Vec2 ee = end_effector(cfg.arm, q_sub);
  switch (cfg.task) {
    case Task::Push: {
      const double d = distance(ee, st.object_pos);
      if (d <= cfg.push_contact_threshold()) st.push_contacted = true;
      const double pen = (cfg.object_radius + cfg.arm.link_radius) - d;
      if (pen > 0.0) {
        const Vec2 dir = d > 1e-9 ? (st.object_pos - ee) * (1.0 / d) : Vec2{1.0, 0.0};
        Vec2 candidate = st.object_pos + dir * pen;
        if (resolve_object_obstacles(cfg, candidate)) st.object_pos = candidate;
      }
      break;
    }
    case Task::Lift: {
      if (!st.grasped && st.q.gripper > 0.5 && distance(ee, st.object_pos) <= cfg.grasp_radius)
        st.grasped = true;
      if (st.grasped && st.q.gripper <= 0.5) st.grasped = false;  // released in place
      if (st.grasped) st.object_pos = ee;
      break;
    }
    case Task::Assembly:
      st.object_pos = ee;  // peg head
      break;
  }
}

// Lift carries the payload with the tip; the payload disk must stay clear of
// the box, otherwise the whole motion is blocked
bool carried_object_blocked(const EnvConfig& cfg, const EnvState& st, const JointConfig& q_from,
                            const JointConfig& q_to) {
  if (cfg.task != Task::Lift || !st.grasped) return false;
  const double span = config_max_abs_diff(q_from, q_to);
  const int steps = std::max(1, static_cast<int>(std::ceil(span / cfg.collision_resolution)));
  for (int i = 0; i <= steps; ++i) {
    const Vec2 ee =
        end_effector(cfg.arm, lerp_config(q_from, q_to, static_cast<double>(i) / steps));
    if (disk_collides(ee, cfg.object_radius, cfg.obstacles)) return true;
  }
  return false;
}

}  // namespace

StepOutcome env_reset(const EnvConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(hash_combine(seed, 0x9044ull));

  EnvState st;
  st.episode_seed = seed;
  bool found = false;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    JointConfig q = random_config(cfg.arm, rng);
    if (config_collides(cfg.arm, q, cfg.obstacles)) continue;
    if (!start_predicate(cfg, q)) continue;
    st.q = q;
    found = true;
    break;
  }
  if (!found)
    throw std::runtime_error("env_reset: no collision-free start found in 1000 attempts");
  st.q.gripper = 0.0;
  st.joint_vel.assign(static_cast<std::size_t>(cfg.arm.joints()), 0.0);

  switch (cfg.task) {
    case Task::Push: {
      st.object_pos = {rng.uniform(cfg.object_spawn.xmin, cfg.object_spawn.xmax),
                       rng.uniform(cfg.object_spawn.ymin, cfg.object_spawn.ymax)};
      bool goal_ok = false;
      for (int attempt = 0; attempt < 1000; ++attempt) {
        st.goal_pos = {rng.uniform(cfg.goal_spawn.xmin, cfg.goal_spawn.xmax),
                       rng.uniform(cfg.goal_spawn.ymin, cfg.goal_spawn.ymax)};
        const double d = distance(st.goal_pos, st.object_pos);
        if (d >= cfg.min_object_goal_dist && d <= cfg.max_object_goal_dist &&
            !disk_collides(st.goal_pos, cfg.object_radius, cfg.obstacles)) {
          goal_ok = true;
          break;
        }
      }
      if (!goal_ok) throw std::runtime_error("env_reset: could not separate goal from object");
      break;
    }
    case Task::Lift: {
      st.object_pos = {rng.uniform(cfg.object_spawn.xmin, cfg.object_spawn.xmax),
                       rng.uniform(cfg.object_spawn.ymin, cfg.object_spawn.ymax)};
      st.goal_pos = {st.object_pos.x, cfg.lift_target_height};
      break;
    }
    case Task::Assembly: {
      st.goal_pos = {cfg.hole_center.x + rng.uniform(-cfg.hole_jitter, cfg.hole_jitter),
                     cfg.hole_center.y + rng.uniform(-cfg.hole_jitter, cfg.hole_jitter)};
      st.object_pos = end_effector(cfg.arm, st.q);
      break;
    }
  }
  st.initial_object_y = st.object_pos.y;
  st.visuals = sample_visuals(cfg, rng);
  st.step_count = 0;
  return finish_outcome(cfg, std::move(st));
}

StepOutcome env_step(const EnvConfig& cfg, const EnvState& state,
                     const std::vector<double>& action) {
  if (static_cast<int>(action.size()) != cfg.action_dim())
    throw std::invalid_argument("env_step: expected action of dimension " +
                                std::to_string(cfg.action_dim()) + ", got " +
                                std::to_string(action.size()));
  EnvState st = state;
  const int k = cfg.arm.joints();

  if (cfg.task == Task::Lift) {
    const double g = std::clamp(action[static_cast<std::size_t>(k)], -1.0, 1.0);
    st.q.gripper = 0.5 * (g + 1.0);
  }

  JointConfig target = st.q;
  for (int i = 0; i < k; ++i)
    target.angles[static_cast<std::size_t>(i)] +=
        std::clamp(action[static_cast<std::size_t>(i)], -cfg.delta_q_step, cfg.delta_q_step);
  target = clamp_config(cfg.arm, target);
  target.gripper = st.q.gripper;

  const bool blocked =
      motion_collides(cfg.arm, st.q, target, cfg.obstacles, cfg.collision_resolution) ||
      carried_object_blocked(cfg, st, st.q, target);
  if (blocked) {
    std::fill(st.joint_vel.begin(), st.joint_vel.end(), 0.0);
    apply_contact_rules(cfg, st, st.q);  // gripper latch/release still applies
  } else {
    const double span = config_max_abs_diff(st.q, target);
    const int substeps = std::max(1, static_cast<int>(std::ceil(span / cfg.contact_substep)));
    const JointConfig from = st.q;
    for (int i = 1; i <= substeps; ++i)
      apply_contact_rules(cfg, st, lerp_config(from, target, static_cast<double>(i) / substeps));
    for (int i = 0; i < k; ++i)
      st.joint_vel[static_cast<std::size_t>(i)] =
          target.angles[static_cast<std::size_t>(i)] - from.angles[static_cast<std::size_t>(i)];
    st.q = target;
  }

  st.step_count += 1;
  return finish_outcome(cfg, std::move(st));
}

bool is_success(const EnvConfig& cfg, const EnvState& state) {
  switch (cfg.task) {
    case Task::Push:
      return distance(state.object_pos, state.goal_pos) < cfg.success_dist;
    case Task::Lift:
      return state.grasped && state.object_pos.y > cfg.lift_wall_top;
    case Task::Assembly:
      return distance(end_effector(cfg.arm, state.q), state.goal_pos) < cfg.success_dist;
  }
  return false;
}

double compute_reward(const EnvConfig& cfg, const EnvState& state) {
  const Vec2 ee = end_effector(cfg.arm, state.q);
  double shaped = 0.0;
  switch (cfg.task) {
    case Task::Push: {
      const double d = state.push_contacted ? distance(state.object_pos, state.goal_pos)
                                            : distance(ee, state.object_pos);
      shaped = cfg.reward_scale * std::max(0.0, cfg.epsilon - d) / cfg.epsilon;
      break;
    }
    case Task::Assembly: {
      const double d = distance(ee, state.goal_pos);
      shaped = cfg.reward_scale * std::max(0.0, cfg.epsilon - d) / cfg.epsilon;
      break;
    }
    case Task::Lift: {
      const double d = distance(ee, state.object_pos);
      const double reach = std::max(0.0, cfg.epsilon - d) / cfg.epsilon * 0.3;
      const double grasp = state.grasped ? 0.35 : 0.0;
      double lift = 0.0;
      if (state.grasped) {
        const double denom = cfg.lift_target_height - state.initial_object_y;
        if (denom > 1e-9)
          lift = 0.35 * std::clamp((state.object_pos.y - state.initial_object_y) / denom, 0.0, 1.0);
      }
      shaped = cfg.reward_scale * (reach + grasp + lift);
      break;
    }
  }
  return shaped + (is_success(cfg, state) ? cfg.success_bonus : 0.0);
}

std::vector<double> state_vector(const EnvConfig& cfg, const EnvState& state) {
  const int k = cfg.arm.joints();
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(cfg.state_dim()));
  for (int i = 0; i < k; ++i) {
    v.push_back(std::sin(state.q.angles[static_cast<std::size_t>(i)]));
    v.push_back(std::cos(state.q.angles[static_cast<std::size_t>(i)]));
  }
  for (int i = 0; i < k; ++i) v.push_back(state.joint_vel[static_cast<std::size_t>(i)]);
  const auto pts = forward_kinematics(cfg.arm, state.q);
  const Vec2 ee = pts.back();
  switch (cfg.task) {
    case Task::Push:
      v.insert(v.end(), {ee.x, ee.y, state.object_pos.x, state.object_pos.y, state.goal_pos.x,
                         state.goal_pos.y, distance(ee, state.object_pos),
                         distance(state.object_pos, state.goal_pos)});
      break;
    case Task::Lift:
      v.insert(v.end(), {ee.x, ee.y, state.object_pos.x, state.object_pos.y, state.goal_pos.x,
                         state.goal_pos.y, distance(ee, state.object_pos), state.q.gripper,
                         state.grasped ? 1.0 : 0.0});
      break;
    case Task::Assembly: {
      const Vec2 tail = pts[pts.size() - 2];
      v.insert(v.end(), {ee.x, ee.y, tail.x, tail.y, state.goal_pos.x, state.goal_pos.y,
                         distance(ee, state.goal_pos)});
      break;
    }
  }
  return v;
}

Observation make_observation(const EnvConfig& cfg, const EnvState& state) {
  Observation obs;
  obs.image_size = cfg.image_size;
  const int k = cfg.arm.joints();
  obs.joint_features.reserve(static_cast<std::size_t>(cfg.joint_feature_dim()));
  for (int i = 0; i < k; ++i) {
    obs.joint_features.push_back(std::sin(state.q.angles[static_cast<std::size_t>(i)]));
    obs.joint_features.push_back(std::cos(state.q.angles[static_cast<std::size_t>(i)]));
  }
  for (int i = 0; i < k; ++i)
    obs.joint_features.push_back(state.joint_vel[static_cast<std::size_t>(i)]);
  obs.joint_features.push_back(state.q.gripper);
  if (cfg.render_observations) obs.image = render(cfg, state);
  return obs;
}

}  // namespace mopa
