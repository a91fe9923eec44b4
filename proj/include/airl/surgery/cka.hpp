#pragma once

#include <airl/encoder/network.hpp>
#include <airl/numerics/ops.hpp>

#include <string>
#include <vector>

namespace airl {

namespace detail {

inline Tensor center_columns(const Tensor& x) {
  Tensor c = x;
  const std::size_t n = x.rows(), d = x.cols();
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x(i, j);
    m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) c(i, j) -= m;
  }
  return c;
}

inline double frobenius_sq(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v * v;
  return s;
}

}  // namespace detail

// Linear CKA in feature space: |Yc^T Xc|_F^2 / (|Xc^T Xc|_F |Yc^T Yc|_F).
inline double linear_cka(const Tensor& x, const Tensor& y) {
  x.require_rank(2);
  y.require_rank(2);
  if (x.rows() != y.rows()) {
    throw DimensionError("linear_cka: row counts differ, " + shape_str(x.shape()) + " vs " +
                         shape_str(y.shape()));
  }
  if (x.rows() < 2) throw DimensionError("linear_cka: needs at least 2 samples");
  const Tensor xc = detail::center_columns(x);
  const Tensor yc = detail::center_columns(y);
  // Relative threshold: centering a constant matrix leaves only rounding noise.
  auto degenerate = [](const Tensor& raw, const Tensor& c) {
    const double r = l2_norm(raw), v = l2_norm(c);
    return !(v > 1e-12 * r);
  };
  if (degenerate(x, xc)) throw DegenerateError("linear_cka: first representation has zero variance");
  if (degenerate(y, yc)) throw DegenerateError("linear_cka: second representation has zero variance");
  const Tensor xt = transpose(xc), yt = transpose(yc);
  const double cross = detail::frobenius_sq(matmul(yt, xc));
  const double sx = std::sqrt(detail::frobenius_sq(matmul(xt, xc)));
  const double sy = std::sqrt(detail::frobenius_sq(matmul(yt, yc)));
  return cross / (sx * sy);
}

struct StageCka {
  std::string stage;
  double cka = 0.0;
};

// CKA between the per-stage activations of two models on one probe batch,
// both run in eval mode.
inline std::vector<StageCka> stagewise_cka(const Network& net_a, const EncoderParams& a,
                                           const Network& net_b, const EncoderParams& b,
                                           const Tensor& probe) {
  if (net_a.stages.size() != net_b.stages.size() || net_a.input_dim != net_b.input_dim)
    throw DimensionError("stagewise_cka: architectures differ");
  for (std::size_t i = 0; i < net_a.stages.size(); ++i) {
    if (net_a.stages[i].name != net_b.stages[i].name)
      throw DimensionError("stagewise_cka: stage " + std::to_string(i) + " is '" +
                           net_a.stages[i].name + "' vs '" + net_b.stages[i].name + "'");
  }
  Rng unused(0, 0);
  ForwardOptions opt{.training = false};
  auto ra = forward(net_a, a, probe, opt, unused);
  auto rb = forward(net_b, b, probe, opt, unused);
  std::vector<StageCka> out;
  for (std::size_t i = 0; i < net_a.stages.size(); ++i)
    out.push_back({net_a.stages[i].name, linear_cka(ra.stage_outputs[i], rb.stage_outputs[i])});
  return out;
}

}  // namespace airl
