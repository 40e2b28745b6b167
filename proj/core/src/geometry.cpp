#include "mopa/geometry.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mopa {

double Vec2::norm() const { return std::hypot(x, y); }

double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

double ArmSpec::reach() const {
  double r = 0.0;
  for (double l : link_lengths) r += l;
  return r;
}

void ArmSpec::validate() const {
  if (link_lengths.size() < 2) throw std::invalid_argument("ArmSpec: need at least 2 links");
  if (joint_limits.size() != link_lengths.size())
    throw std::invalid_argument("ArmSpec: one joint limit pair per link required");
  for (double l : link_lengths)
    if (!(l > 0.0)) throw std::invalid_argument("ArmSpec: link lengths must be positive");
  for (const auto& [lo, hi] : joint_limits)
    if (!(lo < hi)) throw std::invalid_argument("ArmSpec: joint limit lo < hi violated");
  if (link_radius < 0.0) throw std::invalid_argument("ArmSpec: negative link radius");
}

JointConfig make_config(const ArmSpec& arm, std::vector<double> angles, double gripper) {
  if (angles.size() != arm.link_lengths.size())
    throw std::invalid_argument("make_config: angle count does not match arm joints");
  JointConfig q;
  q.angles = std::move(angles);
  q.gripper = gripper;
  return clamp_config(arm, q);
}

JointConfig clamp_config(const ArmSpec& arm, const JointConfig& q) {
  JointConfig out = q;
  for (std::size_t i = 0; i < out.angles.size(); ++i) {
    const auto& [lo, hi] = arm.joint_limits[i];
    out.angles[i] = std::clamp(out.angles[i], lo, hi);
  }
  out.gripper = std::clamp(out.gripper, 0.0, 1.0);
  return out;
}

Obstacle Obstacle::rect(double xmin, double xmax, double ymin, double ymax) {
  if (!(xmin < xmax && ymin < ymax)) throw std::invalid_argument("Obstacle::rect: empty extent");
  Obstacle o;
  o.kind = Kind::AxisRect;
  o.xmin = xmin;
  o.xmax = xmax;
  o.ymin = ymin;
  o.ymax = ymax;
  return o;
}

Obstacle Obstacle::circle(Vec2 center, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("Obstacle::circle: radius must be positive");
  Obstacle o;
  o.kind = Kind::Circle;
  o.center = center;
  o.radius = radius;
  return o;
}

std::vector<Vec2> forward_kinematics(const ArmSpec& arm, const JointConfig& q) {
  if (q.angles.size() != arm.link_lengths.size())
    throw std::invalid_argument("forward_kinematics: angle count mismatch");
  std::vector<Vec2> pts;
  pts.reserve(arm.link_lengths.size() + 1);
  pts.push_back(arm.base);
  double heading = 0.0;
  Vec2 p = arm.base;
  for (std::size_t i = 0; i < arm.link_lengths.size(); ++i) {
    heading += q.angles[i];
    p = p + Vec2{std::cos(heading), std::sin(heading)} * arm.link_lengths[i];
    pts.push_back(p);
  }
  return pts;
}

Vec2 end_effector(const ArmSpec& arm, const JointConfig& q) {
  double heading = 0.0;
  Vec2 p = arm.base;
  for (std::size_t i = 0; i < arm.link_lengths.size(); ++i) {
    heading += q.angles[i];
    p = p + Vec2{std::cos(heading), std::sin(heading)} * arm.link_lengths[i];
  }
  return p;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = ab.dot(ab);
  if (len2 <= 0.0) return distance(p, a);
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return distance(p, a + ab * t);
}

double segment_segment_distance(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1) {
  // planar segments: zero if they intersect, otherwise the closest
  // endpoint-to-segment distance
  const auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
    const double v = (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    if (v > 0.0) return 1;
    if (v < 0.0) return -1;
    return 0;
  };
  const auto on_segment = [](Vec2 p, Vec2 q, Vec2 r) {
    return std::min(p.x, r.x) <= q.x && q.x <= std::max(p.x, r.x) &&
           std::min(p.y, r.y) <= q.y && q.y <= std::max(p.y, r.y);
  };
  const int o1 = orient(a0, a1, b0);
  const int o2 = orient(a0, a1, b1);
  const int o3 = orient(b0, b1, a0);
  const int o4 = orient(b0, b1, a1);
  bool intersect = (o1 != o2 && o3 != o4);
  if (!intersect) {
    if (o1 == 0 && on_segment(a0, b0, a1)) intersect = true;
    if (o2 == 0 && on_segment(a0, b1, a1)) intersect = true;
    if (o3 == 0 && on_segment(b0, a0, b1)) intersect = true;
    if (o4 == 0 && on_segment(b0, a1, b1)) intersect = true;
  }
  if (intersect) return 0.0;
  return std::min(std::min(point_segment_distance(a0, b0, b1), point_segment_distance(a1, b0, b1)),
                  std::min(point_segment_distance(b0, a0, a1), point_segment_distance(b1, a0, a1)));
}

double segment_rect_distance(Vec2 a, Vec2 b, const Obstacle& rect) {
  const auto inside = [&](Vec2 p) {
    return p.x >= rect.xmin && p.x <= rect.xmax && p.y >= rect.ymin && p.y <= rect.ymax;
  };
  if (inside(a) || inside(b)) return 0.0;
  const Vec2 c0{rect.xmin, rect.ymin}, c1{rect.xmax, rect.ymin};
  const Vec2 c2{rect.xmax, rect.ymax}, c3{rect.xmin, rect.ymax};
  double d = segment_segment_distance(a, b, c0, c1);
  d = std::min(d, segment_segment_distance(a, b, c1, c2));
  d = std::min(d, segment_segment_distance(a, b, c2, c3));
  d = std::min(d, segment_segment_distance(a, b, c3, c0));
  return d;
}

namespace {

bool segment_hits_obstacle(Vec2 a, Vec2 b, double radius, const Obstacle& obs) {
  if (obs.kind == Obstacle::Kind::AxisRect) return segment_rect_distance(a, b, obs) <= radius;
  return point_segment_distance(obs.center, a, b) <= radius + obs.radius;
}

}  // namespace

bool config_collides(const ArmSpec& arm, const JointConfig& q,
                     const std::vector<Obstacle>& obstacles) {
  if (obstacles.empty()) return false;
  const std::vector<Vec2> pts = forward_kinematics(arm, q);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    for (const Obstacle& obs : obstacles)
      if (segment_hits_obstacle(pts[i], pts[i + 1], arm.link_radius, obs)) return true;
  return false;
}

bool motion_collides(const ArmSpec& arm, const JointConfig& q_a, const JointConfig& q_b,
                     const std::vector<Obstacle>& obstacles, double resolution) {
  if (!(resolution > 0.0)) throw std::invalid_argument("motion_collides: resolution must be > 0");
  const double span = config_max_abs_diff(q_a, q_b);
  // power-of-two step count: halving the resolution samples a strict superset
  // of the coarser grid, so refinement can never lose a detected collision
  int steps = 1;
  while (steps * resolution < span && steps < (1 << 24)) steps <<= 1;
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    if (config_collides(arm, lerp_config(q_a, q_b, t), obstacles)) return true;
  }
  return false;
}

bool disk_collides(Vec2 center, double radius, const std::vector<Obstacle>& obstacles) {
  for (const Obstacle& obs : obstacles) {
    if (obs.kind == Obstacle::Kind::AxisRect) {
      const double cx = std::clamp(center.x, obs.xmin, obs.xmax);
      const double cy = std::clamp(center.y, obs.ymin, obs.ymax);
      if (distance(center, {cx, cy}) <= radius) return true;
    } else {
      if (distance(center, obs.center) <= radius + obs.radius) return true;
    }
  }
  return false;
}

JointConfig random_config(const ArmSpec& arm, Rng& rng) {
  JointConfig q;
  q.angles.reserve(arm.joint_limits.size());
  for (const auto& [lo, hi] : arm.joint_limits) q.angles.push_back(rng.uniform(lo, hi));
  return q;
}

JointConfig lerp_config(const JointConfig& a, const JointConfig& b, double t) {
  JointConfig q;
  q.angles.resize(a.angles.size());
  for (std::size_t i = 0; i < a.angles.size(); ++i)
    q.angles[i] = a.angles[i] + (b.angles[i] - a.angles[i]) * t;
  q.gripper = a.gripper + (b.gripper - a.gripper) * t;
  return q;
}

double config_max_abs_diff(const JointConfig& a, const JointConfig& b) {
  if (a.angles.size() != b.angles.size())
    throw std::invalid_argument("config_max_abs_diff: dimension mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.angles.size(); ++i)
    m = std::max(m, std::fabs(a.angles[i] - b.angles[i]));
  return m;
}

}  // namespace mopa
