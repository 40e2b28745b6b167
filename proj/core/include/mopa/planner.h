#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mopa/geometry.h"

namespace mopa {

struct PlannerConfig {
  int max_iterations = 1000;
  double extend_step = 0.2;          // radians per tree extension
  double goal_tolerance = 1e-9;      // paths end exactly on the goal config
  int shortcut_rounds = 100;         // cap on skip-ahead passes
  double collision_resolution = 0.02;
  // Link-radius padding applied to every planner collision check so sampled
  // sweeps certify the continuous motion: any point moves at most
  // joints * reach * resolution / 2 between samples. Negative selects that
  // bound automatically.
  double collision_margin = -1.0;
  std::uint64_t seed = 0;

  void validate() const;
  double margin_for(const ArmSpec& arm) const;
};

// worst-case point excursion between sweep samples
double planning_margin(const ArmSpec& arm, double resolution);
ArmSpec padded_arm(const ArmSpec& arm, double margin);

struct Path {
  std::vector<JointConfig> waypoints;

  double arc_length() const;  // joint-space L2 arc length
};

// Bidirectional RRT. Returns nullopt when the goal or start is in collision
// or no connection is found within max_iterations. Deterministic in cfg.seed.
std::optional<Path> rrt_connect(const JointConfig& q_start, const JointConfig& q_goal,
                                const ArmSpec& arm, const std::vector<Obstacle>& obstacles,
                                const PlannerConfig& cfg);

// Greedy skip-ahead shortcutting iterated to a fixpoint (at most
// shortcut_rounds passes). Output endpoints match the input's; arc length
// never increases; all shortcuts are collision-checked.
Path shortcut(const Path& path, const ArmSpec& arm, const std::vector<Obstacle>& obstacles,
              const PlannerConfig& cfg);

// Splits every segment into direct actions with |a|_inf <= delta_q_step.
// Accumulating the actions from the path start reproduces each waypoint
// exactly; the last sub-step of a segment may be shorter.
std::vector<std::vector<double>> discretize_path(const Path& path, double delta_q_step);

// Validates the Path invariants (used by tests and callers after planning).
bool path_is_valid(const Path& path, const ArmSpec& arm, const std::vector<Obstacle>& obstacles,
                   double collision_resolution);

}  // namespace mopa
