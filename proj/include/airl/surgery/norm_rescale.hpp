#pragma once

#include <airl/encoder/params.hpp>
#include <airl/numerics/ops.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace airl {

enum class AnchorKind { checkpoint, constant };

// Target norms for rescaling: either the tensors of a reference model
// (matched by name) or a single multiplicative factor.
struct Anchor {
  AnchorKind kind = AnchorKind::constant;
  ParamSet reference;
  double factor = 1.0;

  static Anchor from_params(ParamSet ref) {
    Anchor a;
    a.kind = AnchorKind::checkpoint;
    a.reference = std::move(ref);
    return a;
  }

  static Anchor constant(double c) {
    if (!(c > 0.0) || !std::isfinite(c))
      throw ConfigError("rescale factor must be a finite positive number");
    Anchor a;
    a.factor = c;
    return a;
  }
};

// w * (target / |w|): same direction, prescribed norm.
inline Tensor norm_rescale(const Tensor& w, double target_norm) {
  const double n = l2_norm(w);
  if (!(n > 0.0)) throw DegenerateError("norm_rescale: zero-norm tensor has no direction");
  if (!(target_norm >= 0.0)) throw ConfigError("norm_rescale: target norm must be >= 0");
  Tensor out = w;
  out *= target_norm / n;
  return out;
}

struct RescaleOptions {
  bool include_buffers = false;  // BN running statistics are left alone by default
};

struct RescaleReport {
  std::vector<std::string> touched;
  std::vector<std::string> unmatched;  // absent from the anchor, left unchanged
  std::vector<std::string> warnings;
};

inline bool rescalable(Role r, const RescaleOptions& opt) {
  switch (r) {
    case Role::weight:
    case Role::norm_gain:
    case Role::norm_bias:
    case Role::bias: return true;
    case Role::buffer: return opt.include_buffers;
    case Role::state: return false;
  }
  return false;
}

// Rescales every eligible tensor of `params` in place.
inline RescaleReport norm_rescale(ParamSet& params, const Anchor& anchor,
                                  const RescaleOptions& opt = {}) {
  RescaleReport rep;
  for (auto& e : params) {
    if (!rescalable(e.role, opt)) continue;
    if (anchor.kind == AnchorKind::constant) {
      e.value *= anchor.factor;
      rep.touched.push_back(e.name);
      continue;
    }
    const NamedTensor* ref = anchor.reference.find(e.name);
    if (!ref) {
      rep.unmatched.push_back(e.name);
      continue;
    }
    if (ref->value.shape() != e.value.shape()) {
      throw DimensionError("anchor tensor '" + e.name + "' has shape " +
                           shape_str(ref->value.shape()) + ", expected " +
                           shape_str(e.value.shape()));
    }
    const double target = l2_norm(ref->value);
    if (!(l2_norm(e.value) > 0.0)) {
      rep.warnings.push_back(e.name + ": zero norm, direction undefined; left unchanged");
      continue;
    }
    if (!(target > 0.0)) {
      rep.warnings.push_back(e.name + ": anchor norm is zero; left unchanged");
      continue;
    }
    e.value = norm_rescale(e.value, target);
    rep.touched.push_back(e.name);
  }
  return rep;
}

}  // namespace airl
