#pragma once

#include <airl/numerics/ops.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace airl {

struct LossResult {
  double loss = 0.0;
  Tensor grad_q;  // d loss / d q
  Tensor grad_k;  // d loss / d k (positive keys); used only without stop-gradient
};

// Mean over rows of -log softmax(q.k+ / tau, q.k- / tau)[positive].
// Positives and negatives are treated as constants for grad_q.
inline LossResult contrastive_loss(const Tensor& q, const Tensor& k_pos, const Tensor& negatives,
                                   double tau) {
  if (!(tau > 0.0)) throw ConfigError("contrastive_loss: temperature must be > 0");
  q.require_same(k_pos, "contrastive_loss q/k_pos");
  const std::size_t n = q.rows(), d = q.cols();
  std::size_t K = 0;
  if (negatives.size() != 0) {
    negatives.require_rank(2);
    if (negatives.cols() != d) {
      throw DimensionError("contrastive_loss: negatives " + shape_str(negatives.shape()) +
                           " vs features " + shape_str(q.shape()));
    }
    K = negatives.rows();
  }
  LossResult r{0.0, Tensor(q.shape()), Tensor(q.shape())};
  std::vector<double> logits(K + 1), prob(K + 1);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto qi = q.row(i);
    logits[0] = dot(qi, k_pos.row(i)) / tau;
    for (std::size_t j = 0; j < K; ++j) logits[j + 1] = dot(qi, negatives.row(j)) / tau;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (std::size_t j = 0; j <= K; ++j) {
      prob[j] = std::exp(logits[j] - mx);
      z += prob[j];
    }
    const double lse = mx + std::log(z);
    if (!std::isfinite(lse)) throw NumericError("contrastive_loss: non-finite logits");
    r.loss += (lse - logits[0]) * inv_n;
    for (auto& p : prob) p /= z;

    auto gq = r.grad_q.row(i);
    auto gk = r.grad_k.row(i);
    const double c0 = (prob[0] - 1.0) * inv_n / tau;
    auto kp = k_pos.row(i);
    for (std::size_t c = 0; c < d; ++c) {
      gq[c] = c0 * kp[c];
      gk[c] = c0 * qi[c];
    }
    for (std::size_t j = 0; j < K; ++j) {
      const double cj = prob[j + 1] * inv_n / tau;
      auto kn = negatives.row(j);
      for (std::size_t c = 0; c < d; ++c) gq[c] += cj * kn[c];
    }
  }
  return r;
}

// Mean over rows of |q - k|^2. On unit rows this is 2 - 2 q.k per row.
inline LossResult byol_loss(const Tensor& q, const Tensor& k) {
  q.require_same(k, "byol_loss");
  const std::size_t n = q.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossResult r{0.0, Tensor(q.shape()), Tensor(q.shape())};
  for (std::size_t i = 0; i < n; ++i) {
    auto qi = q.row(i), ki = k.row(i);
    auto gq = r.grad_q.row(i), gk = r.grad_k.row(i);
    double s = 0.0;
    for (std::size_t c = 0; c < qi.size(); ++c) {
      const double diff = qi[c] - ki[c];
      s += diff * diff;
      gq[c] = 2.0 * diff * inv_n;
      gk[c] = -2.0 * diff * inv_n;
    }
    r.loss += s * inv_n;
  }
  return r;
}

}  // namespace airl
