#include "mopa/replay.h"

#include <cmath>
#include <stdexcept>

namespace mopa {

namespace {

bool finite_vec(const std::vector<float>& v) {
  for (float x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

bool Transition::finite() const {
  return std::isfinite(reward) && finite_vec(state) && finite_vec(image) &&
         finite_vec(joint_features) && finite_vec(action) && finite_vec(next_state) &&
         finite_vec(next_image) && finite_vec(next_joint_features);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
    return;
  }
  // FIFO eviction: overwrite the oldest entry
  ring_[cursor_] = std::move(t);
  cursor_ = (cursor_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= ring_.size()) throw std::out_of_range("ReplayBuffer: index out of range");
  if (ring_.size() < capacity_) return ring_[i];
  return ring_[(cursor_ + i) % capacity_];
}

const Transition& ReplayBuffer::sample(Rng& rng) const {
  if (ring_.empty()) throw std::runtime_error("ReplayBuffer: sample from empty buffer");
  return ring_[static_cast<std::size_t>(rng.uniform_index(ring_.size()))];
}

void ReplayBuffer::clear() {
  ring_.clear();
  cursor_ = 0;
}

}  // namespace mopa
