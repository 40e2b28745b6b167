#pragma once

#include <vector>

#include "mopa/rng.h"

namespace mopa {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const;
};

double distance(Vec2 a, Vec2 b);

// Planar revolute arm. Links are capsules of half-width `link_radius`; joint
// angles are clamped into `joint_limits` at construction time so downstream
// configurations are always valid.
struct ArmSpec {
  Vec2 base;
  std::vector<double> link_lengths;                    // all > 0
  std::vector<std::pair<double, double>> joint_limits; // lo < hi, radians
  double link_radius = 0.02;

  int joints() const { return static_cast<int>(link_lengths.size()); }
  double reach() const;
  void validate() const;  // throws std::invalid_argument on a malformed spec
};

struct JointConfig {
  std::vector<double> angles;  // length k, within joint limits
  double gripper = 0.0;        // in [0,1]; only the Lift task reads it
};

// clamps angles into the arm's joint limits and the gripper into [0,1]
JointConfig make_config(const ArmSpec& arm, std::vector<double> angles, double gripper = 0.0);
JointConfig clamp_config(const ArmSpec& arm, const JointConfig& q);

struct Obstacle {
  enum class Kind { AxisRect, Circle };
  Kind kind = Kind::AxisRect;
  // AxisRect
  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
  // Circle
  Vec2 center;
  double radius = 0.0;

  static Obstacle rect(double xmin, double xmax, double ymin, double ymax);
  static Obstacle circle(Vec2 center, double radius);
};

// k+1 positions: base, joints, end-effector (cumulative-angle chain)
std::vector<Vec2> forward_kinematics(const ArmSpec& arm, const JointConfig& q);
Vec2 end_effector(const ArmSpec& arm, const JointConfig& q);

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);
double segment_segment_distance(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1);
double segment_rect_distance(Vec2 a, Vec2 b, const Obstacle& rect);

bool config_collides(const ArmSpec& arm, const JointConfig& q,
                     const std::vector<Obstacle>& obstacles);
// swept straight joint-space segment sampled at steps <= resolution,
// endpoints included
bool motion_collides(const ArmSpec& arm, const JointConfig& q_a, const JointConfig& q_b,
                     const std::vector<Obstacle>& obstacles, double resolution);

// disk (e.g. a pushed object) against the obstacle set
bool disk_collides(Vec2 center, double radius, const std::vector<Obstacle>& obstacles);

JointConfig random_config(const ArmSpec& arm, Rng& rng);
JointConfig lerp_config(const JointConfig& a, const JointConfig& b, double t);
double config_max_abs_diff(const JointConfig& a, const JointConfig& b);

}  // namespace mopa
