#include "mopa/planner.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mopa {

void PlannerConfig::validate() const {
  if (max_iterations <= 0) throw std::invalid_argument("PlannerConfig: max_iterations must be > 0");
  if (!(extend_step > 0.0)) throw std::invalid_argument("PlannerConfig: extend_step must be > 0");
  if (!(collision_resolution > 0.0))
    throw std::invalid_argument("PlannerConfig: collision_resolution must be > 0");
}

double planning_margin(const ArmSpec& arm, double resolution) {
  return 0.5 * resolution * arm.joints() * arm.reach();
}

ArmSpec padded_arm(const ArmSpec& arm, double margin) {
  ArmSpec padded = arm;
  padded.link_radius += margin;
  return padded;
}

double PlannerConfig::margin_for(const ArmSpec& arm) const {
  return collision_margin >= 0.0 ? collision_margin : planning_margin(arm, collision_resolution);
}

double Path::arc_length() const {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    double seg = 0.0;
    for (std::size_t j = 0; j < waypoints[i].angles.size(); ++j) {
      const double d = waypoints[i + 1].angles[j] - waypoints[i].angles[j];
      seg += d * d;
    }
    len += std::sqrt(seg);
  }
  return len;
}

namespace {

double config_l2(const JointConfig& a, const JointConfig& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.angles.size(); ++i) {
    const double d = a.angles[i] - b.angles[i];
    s += d * d;
  }
  return std::sqrt(s);
}

struct Tree {
  std::vector<JointConfig> nodes;
  std::vector<int> parent;

  int nearest(const JointConfig& q) const {
    int best = 0;
    double best_d = config_l2(nodes[0], q);
    for (std::size_t i = 1; i < nodes.size(); ++i) {
      const double d = config_l2(nodes[i], q);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  }

  int add(JointConfig q, int from) {
    nodes.push_back(std::move(q));
    parent.push_back(from);
    return static_cast<int>(nodes.size()) - 1;
  }

  std::vector<JointConfig> trace(int idx) const {
    std::vector<JointConfig> out;
    for (int i = idx; i >= 0; i = parent[static_cast<std::size_t>(i)])
      out.push_back(nodes[static_cast<std::size_t>(i)]);
    return out;  // leaf-to-root order
  }
};

enum class Extend { Trapped, Advanced, Reached };

Extend extend_tree(Tree& tree, const JointConfig& target, const ArmSpec& arm,
                   const std::vector<Obstacle>& obstacles, const PlannerConfig& cfg,
                   int* new_index) {
  const int near = tree.nearest(target);
  const JointConfig& q_near = tree.nodes[static_cast<std::size_t>(near)];
  const double d = config_l2(q_near, target);
  JointConfig q_new = target;
  bool reached = true;
  if (d > cfg.extend_step) {
    q_new = lerp_config(q_near, target, cfg.extend_step / d);
    reached = false;
  }
  if (motion_collides(arm, q_near, q_new, obstacles, cfg.collision_resolution))
    return Extend::Trapped;
  *new_index = tree.add(std::move(q_new), near);
  return reached ? Extend::Reached : Extend::Advanced;
}

}  // namespace

std::optional<Path> rrt_connect(const JointConfig& q_start, const JointConfig& q_goal,
                                const ArmSpec& arm, const std::vector<Obstacle>& obstacles,
                                const PlannerConfig& cfg) {
  cfg.validate();
  if (q_start.angles.size() != arm.link_lengths.size() ||
      q_goal.angles.size() != arm.link_lengths.size())
    throw std::invalid_argument("rrt_connect: configuration dimension mismatch");

  if (config_max_abs_diff(q_start, q_goal) <= cfg.goal_tolerance) {
    if (config_collides(arm, q_start, obstacles)) return std::nullopt;
    Path p;
    p.waypoints = {q_start};
    return p;
  }

  // all planning happens against the padded arm so that sampled sweeps
  // certify the continuous motion
  const ArmSpec planner_arm = padded_arm(arm, cfg.margin_for(arm));
  if (config_collides(planner_arm, q_start, obstacles)) return std::nullopt;
  if (config_collides(planner_arm, q_goal, obstacles)) return std::nullopt;

  if (!motion_collides(planner_arm, q_start, q_goal, obstacles, cfg.collision_resolution)) {
    Path p;
    p.waypoints = {q_start, q_goal};
    return p;
  }

  Rng rng(hash_combine(cfg.seed, 0x7a317ull));
  Tree start_tree, goal_tree;
  start_tree.add(q_start, -1);
  goal_tree.add(q_goal, -1);
  Tree* a = &start_tree;
  Tree* b = &goal_tree;
  bool a_is_start = true;

  for (int it = 0; it < cfg.max_iterations; ++it) {
    JointConfig q_rand = random_config(planner_arm, rng);
    q_rand.gripper = q_start.gripper;
    int a_new = -1;
    if (extend_tree(*a, q_rand, planner_arm, obstacles, cfg, &a_new) != Extend::Trapped) {
      // connect: greedily extend the other tree toward the new node
      const JointConfig target = a->nodes[static_cast<std::size_t>(a_new)];
      int b_new = -1;
      Extend status = Extend::Advanced;
      while (status == Extend::Advanced)
        status = extend_tree(*b, target, planner_arm, obstacles, cfg, &b_new);
      if (status == Extend::Reached) {
        std::vector<JointConfig> from_a = a->trace(a_new);   // meet -> start of a
        std::vector<JointConfig> from_b = b->trace(b_new);   // meet -> start of b
        std::reverse(from_a.begin(), from_a.end());
        // from_b.front() duplicates the meeting configuration
        from_a.insert(from_a.end(), from_b.begin() + 1, from_b.end());
        if (!a_is_start) std::reverse(from_a.begin(), from_a.end());
        Path p;
        p.waypoints = std::move(from_a);
        for (auto& w : p.waypoints) w.gripper = q_start.gripper;
        return p;
      }
    }
    std::swap(a, b);
    a_is_start = !a_is_start;
  }
  return std::nullopt;
}

Path shortcut(const Path& path, const ArmSpec& arm, const std::vector<Obstacle>& obstacles,
              const PlannerConfig& cfg) {
  if (path.waypoints.size() <= 2) return path;
  const ArmSpec planner_arm = padded_arm(arm, cfg.margin_for(arm));
  Path cur = path;
  for (int round = 0; round < std::max(1, cfg.shortcut_rounds); ++round) {
    // greedy skip-ahead: from each waypoint, jump to the farthest directly
    // reachable successor
    std::vector<JointConfig> next;
    next.push_back(cur.waypoints.front());
    std::size_t i = 0;
    while (i + 1 < cur.waypoints.size()) {
      std::size_t j = cur.waypoints.size() - 1;
      for (; j > i + 1; --j) {
        if (!motion_collides(planner_arm, cur.waypoints[i], cur.waypoints[j], obstacles,
                             cfg.collision_resolution))
          break;
      }
      next.push_back(cur.waypoints[j]);
      i = j;
    }
    const bool changed = next.size() != cur.waypoints.size();
    cur.waypoints = std::move(next);
    if (!changed) break;
  }
  return cur;
}

std::vector<std::vector<double>> discretize_path(const Path& path, double delta_q_step) {
  if (!(delta_q_step > 0.0)) throw std::invalid_argument("discretize_path: step must be > 0");
  std::vector<std::vector<double>> actions;
  if (path.waypoints.size() < 2) return actions;
  const std::size_t k = path.waypoints.front().angles.size();
  std::vector<double> cursor = path.waypoints.front().angles;
  for (std::size_t s = 0; s + 1 < path.waypoints.size(); ++s) {
    const std::vector<double>& from = path.waypoints[s].angles;
    const std::vector<double>& to = path.waypoints[s + 1].angles;
    double span = 0.0;
    for (std::size_t j = 0; j < k; ++j) span = std::max(span, std::fabs(to[j] - from[j]));
    if (span <= 0.0) continue;
    // full-size steps followed by one shorter remainder step that closes on
    // the waypoint exactly
    int full = static_cast<int>(std::floor(span / delta_q_step + 1e-12));
    double rem = span - full * delta_q_step;
    if (rem < 1e-12 && full > 0) {
      full -= 1;
      rem = delta_q_step;
    }
    const int count = full + 1;
    for (int n = 1; n <= count; ++n) {
      std::vector<double> target(k);
      if (n == count) {
        target = to;
      } else {
        const double t = n * delta_q_step / span;
        for (std::size_t j = 0; j < k; ++j) target[j] = from[j] + (to[j] - from[j]) * t;
      }
      std::vector<double> a(k);
      for (std::size_t j = 0; j < k; ++j) {
        a[j] = std::clamp(target[j] - cursor[j], -delta_q_step, delta_q_step);
        target[j] = cursor[j] + a[j];
      }
      actions.push_back(std::move(a));
      cursor = std::move(target);
    }
  }
  return actions;
}

bool path_is_valid(const Path& path, const ArmSpec& arm, const std::vector<Obstacle>& obstacles,
                   double collision_resolution) {
  if (path.waypoints.empty()) return false;
  for (std::size_t i = 0; i + 1 < path.waypoints.size(); ++i)
    if (motion_collides(arm, path.waypoints[i], path.waypoints[i + 1], obstacles,
                        collision_resolution))
      return false;
  return true;
}

}  // namespace mopa
