#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vaelab/tensor.hpp"

namespace vaelab::inline VAELAB_NS {

/// Named tensors with a stable insertion order. Holds model parameters and
/// gradients keyed by the same names.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
  };

  void add(std::string name, Tensor value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t total_elements() const;

  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  Entry& operator[](std::size_t i) { return entries_[i]; }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  /// Same names in the same order with matching shapes.
  bool same_layout(const ParamSet& other) const;

  bool operator==(const ParamSet& other) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace vaelab::inline VAELAB_NS
