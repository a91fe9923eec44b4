#pragma once

#include <airl/numerics/tensor.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace airl {

// Role tag attached to every stored tensor. Optimizer exclusions and
// NormRescale select parameters by role. The numeric values are the on-disk
// role byte of the checkpoint format.
enum class Role : std::uint8_t {
  weight = 0,
  norm_gain = 1,
  norm_bias = 2,
  bias = 3,
  buffer = 4,  // BN running statistics
  state = 5,   // non-parameter training state (memory queue, cursors)
};

inline std::string_view role_name(Role r) {
  switch (r) {
    case Role::weight: return "weight";
    case Role::norm_gain: return "norm_gain";
    case Role::norm_bias: return "norm_bias";
    case Role::bias: return "bias";
    case Role::buffer: return "buffer";
    case Role::state: return "state";
  }
  return "unknown";
}

inline bool role_from_name(std::string_view s, Role& out) {
  for (auto r : {Role::weight, Role::norm_gain, Role::norm_bias, Role::bias, Role::buffer,
                 Role::state}) {
    if (role_name(r) == s) {
      out = r;
      return true;
    }
  }
  return false;
}

struct NamedTensor {
  std::string name;
  Role role;
  Tensor value;
};

// Ordered map name -> (role, tensor). Iteration follows insertion order,
// which the network builder makes equal to depth order.
class ParamSet {
 public:
  using iterator = std::vector<NamedTensor>::iterator;
  using const_iterator = std::vector<NamedTensor>::const_iterator;

  void add(std::string name, Role role, Tensor value) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.push_back({std::move(name), role, std::move(value)});
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  NamedTensor* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &entries_[it->second];
  }
  const NamedTensor* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  Tensor& at(const std::string& name) { return checked(name).value; }
  const Tensor& at(const std::string& name) const {
    return const_cast<ParamSet*>(this)->checked(name).value;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  iterator begin() { return entries_.begin(); }
  iterator end() { return entries_.end(); }
  const_iterator begin() const { return entries_.begin(); }
  const_iterator end() const { return entries_.end(); }

  // Same names, roles and shapes; values zero.
  ParamSet zeros_like() const {
    ParamSet z;
    for (const auto& e : entries_) z.add(e.name, e.role, Tensor(e.value.shape()));
    return z;
  }

  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      const auto& x = a.entries_[i];
      const auto& y = b.entries_[i];
      if (x.name != y.name || x.role != y.role || !(x.value == y.value)) return false;
    }
    return true;
  }

 private:
  NamedTensor& checked(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("no parameter named '" + name + "'");
    return entries_[it->second];
  }

  std::vector<NamedTensor> entries_;
  std::map<std::string, std::size_t> index_;
};

// Trainable parameters plus BN running statistics of one encoder.
struct EncoderParams {
  ParamSet params;
  ParamSet buffers;

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

}  // namespace airl
