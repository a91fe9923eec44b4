#pragma once

#include <airl/encoder/params.hpp>
#include <airl/numerics/ops.hpp>

#include <algorithm>
#include <functional>
#include <string>

namespace airl::testing {

// |a - b| / max(|a|, |b|); tensors whose gradients are both below `floor`
// are compared absolutely instead.
inline double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-5) {
  const double diff = l2_norm(a - b);
  const double scale = std::max(l2_norm(a), l2_norm(b));
  if (scale < floor) return diff / floor;
  return diff / scale;
}

struct GradMismatch {
  std::string name;
  double rel_err = 0.0;
};

// Central-difference check of every tensor of `params` against `analytic`.
// `loss` evaluates the scalar objective with a modified copy of params.
inline GradMismatch worst_grad_error(const ParamSet& params, const ParamSet& analytic,
                                     const std::function<double(const ParamSet&)>& loss,
                                     double h = kDefaultFdStep) {
  GradMismatch worst;
  ParamSet probe = params;
  for (const auto& e : params) {
    const Tensor* g = analytic.find(e.name) ? &analytic.find(e.name)->value : nullptr;
    Tensor zero(e.value.shape());
    auto f = [&](const Tensor& v) {
      probe.at(e.name) = v;
      const double out = loss(probe);
      probe.at(e.name) = e.value;
      return out;
    };
    Tensor fd = finite_diff_grad(f, e.value, h);
    const double err = relative_error(g ? *g : zero, fd);
    if (err > worst.rel_err) worst = {e.name, err};
  }
  return worst;
}

}  // namespace airl::testing
