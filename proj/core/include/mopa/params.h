#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mopa/tensor.h"

namespace mopa {

// Ordered, uniquely named tensor collection. Iteration order is insertion
// order, which makes checkpoints and optimizer state deterministic.
struct ParamSet {
  std::vector<std::pair<std::string, Tensor>> items;

  Tensor& add(const std::string& name, Tensor t);
  Tensor* find(const std::string& name);
  const Tensor* find(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  std::int64_t total_elements() const;
  bool all_finite() const;

  // true iff both sets hold the same names with the same shapes, in order;
  // on mismatch, fills `why` with the offending entries when provided
  bool shapes_match(const ParamSet& other, std::string* why = nullptr) const;
};

}  // namespace mopa
