#include "mopa/params.h"

#include <stdexcept>

namespace mopa {

Tensor& ParamSet::add(const std::string& name, Tensor t) {
  if (find(name) != nullptr) throw std::invalid_argument("ParamSet: duplicate name " + name);
  items.emplace_back(name, std::move(t));
  return items.back().second;
}

Tensor* ParamSet::find(const std::string& name) {
  for (auto& [n, t] : items)
    if (n == name) return &t;
  return nullptr;
}

const Tensor* ParamSet::find(const std::string& name) const {
  for (const auto& [n, t] : items)
    if (n == name) return &t;
  return nullptr;
}

Tensor& ParamSet::at(const std::string& name) {
  Tensor* t = find(name);
  if (!t) throw std::out_of_range("ParamSet: no tensor named " + name);
  return *t;
}

const Tensor& ParamSet::at(const std::string& name) const {
  const Tensor* t = find(name);
  if (!t) throw std::out_of_range("ParamSet: no tensor named " + name);
  return *t;
}

std::int64_t ParamSet::total_elements() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : items) n += t.numel();
  return n;
}

bool ParamSet::all_finite() const {
  for (const auto& [name, t] : items)
    if (!t.all_finite()) return false;
  return true;
}

bool ParamSet::shapes_match(const ParamSet& other, std::string* why) const {
  if (items.size() != other.items.size()) {
    if (why) *why = "different parameter counts";
    return false;
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].first != other.items[i].first) {
      if (why) *why = "name mismatch: " + items[i].first + " vs " + other.items[i].first;
      return false;
    }
    if (!items[i].second.same_shape(other.items[i].second)) {
      if (why)
        *why = "shape mismatch at " + items[i].first + ": " + items[i].second.shape_str() +
               " vs " + other.items[i].second.shape_str();
      return false;
    }
  }
  return true;
}

}  // namespace mopa
