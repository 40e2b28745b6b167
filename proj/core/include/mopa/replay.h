#pragma once

#include <cstddef>
#include <vector>

#include "mopa/rng.h"

namespace mopa {

// One low-level step in the direct action space. Observations are stored as
// f32 (images may be empty when rendering was disabled at collection time).
// `steps` is the number of environment steps the tuple spans: 1 for direct
// transitions, the constituent count for planner-realized macro transitions,
// so bootstrapped targets can discount by gamma^steps (semi-MDP backup).
struct Transition {
  std::vector<float> state;
  std::vector<float> image;
  std::vector<float> joint_features;
  std::vector<float> action;
  float reward = 0.0f;
  std::vector<float> next_state;
  std::vector<float> next_image;
  std::vector<float> next_joint_features;
  bool done = false;
  int steps = 1;

  bool finite() const;
};

// Bounded FIFO transition store (ring buffer). Instantiated as the
// demonstration dataset, the expert buffer and the agent buffer.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return ring_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return ring_.empty(); }

  // i = 0 is the oldest stored transition
  const Transition& at(std::size_t i) const;
  const Transition& sample(Rng& rng) const;

  void clear();

 private:
  std::size_t capacity_;
  std::vector<Transition> ring_;
  std::size_t cursor_ = 0;  // next write position once full
};

// A macro-level step: either a single direct action or a multi-step planner
// realization. `reward` is the discounted sum of the constituent rewards.
struct AugmentedTransition {
  std::vector<float> state;
  std::vector<float> action;
  float reward = 0.0f;
  std::vector<float> next_state;
  bool done = false;
  bool planner_fallback = false;
  std::vector<Transition> constituents;
};

}  // namespace mopa
