#include <algorithm>
#include <cmath>

#include "mopa/env.h"

namespace mopa {

namespace {

// signed distances (negative inside)
double sdf_circle(Vec2 p, Vec2 c, double r) { return distance(p, c) - r; }

double sdf_rect(Vec2 p, double xmin, double xmax, double ymin, double ymax) {
  const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
  const double hx = 0.5 * (xmax - xmin), hy = 0.5 * (ymax - ymin);
  const double dx = std::fabs(p.x - cx) - hx;
  const double dy = std::fabs(p.y - cy) - hy;
  const double ox = std::max(dx, 0.0), oy = std::max(dy, 0.0);
  return std::hypot(ox, oy) + std::min(std::max(dx, dy), 0.0);
}

double sdf_capsule(Vec2 p, Vec2 a, Vec2 b, double r) {
  return point_segment_distance(p, a, b) - r;
}

struct Canvas {
  int size = 0;
  double px_world = 0.0;  // world units per pixel
  Vec2 origin;            // world position of the top-left pixel center
  std::vector<float> rgb; // CHW

  Vec2 pixel_center(int row, int col) const {
    return {origin.x + col * px_world, origin.y - row * px_world};
  }
  void blend(int row, int col, const float* color, double coverage) {
    if (coverage <= 0.0) return;
    const float c = static_cast<float>(std::min(coverage, 1.0));
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    const std::size_t idx = static_cast<std::size_t>(row) * size + col;
    for (int ch = 0; ch < 3; ++ch)
      rgb[plane * ch + idx] = (1.0f - c) * rgb[plane * ch + idx] + c * color[ch];
  }
};

Canvas make_canvas(const EnvConfig& cfg) {
  Canvas cv;
  cv.size = cfg.image_size;
  cv.px_world = 2.0 * cfg.view_half_extent / cfg.image_size;
  cv.origin = {cfg.view_center.x - cfg.view_half_extent + 0.5 * cv.px_world,
               cfg.view_center.y + cfg.view_half_extent - 0.5 * cv.px_world};
  cv.rgb.assign(static_cast<std::size_t>(3) * cv.size * cv.size, 0.0f);
  return cv;
}

double coverage_of(double sdf, double px_world) {
  return std::clamp(0.5 - sdf / px_world, 0.0, 1.0);
}

template <typename SdfFn>
void paint(Canvas& cv, const float* color, SdfFn&& sdf) {
  for (int row = 0; row < cv.size; ++row)
    for (int col = 0; col < cv.size; ++col)
      cv.blend(row, col, color, coverage_of(sdf(cv.pixel_center(row, col)), cv.px_world));
}

// Obstacles with the scenario's visual-only scale applied around their center.
double obstacle_sdf(const Obstacle& obs, Vec2 p, double visual_scale) {
  if (obs.kind == Obstacle::Kind::Circle)
    return sdf_circle(p, obs.center, obs.radius * visual_scale);
  const double cx = 0.5 * (obs.xmin + obs.xmax), cy = 0.5 * (obs.ymin + obs.ymax);
  const double hx = 0.5 * (obs.xmax - obs.xmin) * visual_scale;
  const double hy = 0.5 * (obs.ymax - obs.ymin) * visual_scale;
  return sdf_rect(p, cx - hx, cx + hx, cy - hy, cy + hy);
}

struct ObjectShape {
  // Push/Lift: the object disk; Assembly: the distal half of the last link
  bool capsule = false;
  Vec2 a, b;
  double radius = 0.0;

  double sdf(Vec2 p) const {
    return capsule ? sdf_capsule(p, a, b, radius) : sdf_circle(p, a, radius);
  }
};

ObjectShape object_shape(const EnvConfig& cfg, const EnvState& state) {
  ObjectShape s;
  if (cfg.task == Task::Assembly) {
    const auto pts = forward_kinematics(cfg.arm, state.q);
    const Vec2 tail = pts[pts.size() - 2];
    const Vec2 head = pts.back();
    s.capsule = true;
    s.a = tail + (head - tail) * 0.5;
    s.b = head;
    s.radius = cfg.arm.link_radius * 1.5;
  } else {
    s.a = state.object_pos;
    s.radius = cfg.object_radius;
  }
  return s;
}

float noise_at(std::uint64_t seed, int index) {
  // uniform in [-1, 1]
  const std::uint64_t h = hash_combine(seed, static_cast<std::uint64_t>(index));
  return static_cast<float>(static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0);
}

}  // namespace

std::vector<float> render(const EnvConfig& cfg, const EnvState& state) {
  Canvas cv = make_canvas(cfg);
  const EpisodeVisuals& vis = state.visuals;

  for (float& v : cv.rgb) v = 0.0f;
  // background
  {
    const std::size_t plane = static_cast<std::size_t>(cv.size) * cv.size;
    for (int ch = 0; ch < 3; ++ch)
      std::fill(cv.rgb.begin() + static_cast<std::ptrdiff_t>(ch * plane),
                cv.rgb.begin() + static_cast<std::ptrdiff_t>((ch + 1) * plane),
                vis.background[ch]);
  }

  // distractors (visual only)
  for (std::size_t i = 0; i < vis.distractor_pos.size(); ++i)
    paint(cv, vis.distractor_colors[i].data(), [&](Vec2 p) {
      return sdf_circle(p, vis.distractor_pos[i], vis.distractor_radius[i]);
    });

  // obstacles
  for (const Obstacle& obs : cfg.obstacles)
    paint(cv, vis.obstacle,
          [&](Vec2 p) { return obstacle_sdf(obs, p, cfg.scenario.obstacle_visual_scale); });

  // goal marker
  {
    const double goal_r = std::max(cfg.success_dist, 1.5 * cv.px_world);
    paint(cv, vis.goal, [&](Vec2 p) { return sdf_circle(p, state.goal_pos, goal_r); });
  }

  // object (or peg)
  {
    const ObjectShape shape = object_shape(cfg, state);
    paint(cv, vis.object, [&](Vec2 p) { return shape.sdf(p); });
  }

  // arm links and joints
  {
    const auto pts = forward_kinematics(cfg.arm, state.q);
    const double r = std::max(cfg.arm.link_radius, 0.75 * cv.px_world);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
      paint(cv, vis.arm, [&](Vec2 p) { return sdf_capsule(p, pts[i], pts[i + 1], r); });
  }

  // lighting and per-pixel noise
  const float gain = static_cast<float>(vis.light_gain);
  const float amp = static_cast<float>(vis.noise_amplitude);
  const std::size_t plane = static_cast<std::size_t>(cv.size) * cv.size;
  for (std::size_t i = 0; i < plane; ++i) {
    const float n = amp > 0.0f ? amp * noise_at(vis.noise_seed, static_cast<int>(i)) : 0.0f;
    for (int ch = 0; ch < 3; ++ch) {
      float& v = cv.rgb[plane * ch + i];
      v = std::clamp(v * gain + n, 0.0f, 1.0f);
    }
  }
  return cv.rgb;
}

std::vector<std::uint8_t> object_coverage_mask(const EnvConfig& cfg, const EnvState& state) {
  Canvas cv = make_canvas(cfg);
  const ObjectShape shape = object_shape(cfg, state);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(cv.size) * cv.size, 0);
  for (int row = 0; row < cv.size; ++row)
    for (int col = 0; col < cv.size; ++col)
      mask[static_cast<std::size_t>(row) * cv.size + col] =
          coverage_of(shape.sdf(cv.pixel_center(row, col)), cv.px_world) > 0.0 ? 1 : 0;
  return mask;
}

}  // namespace mopa
