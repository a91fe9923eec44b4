#pragma once

#include <airl/numerics/ops.hpp>

#include <Eigen/SVD>

#include <cmath>

namespace airl {

struct CollapseMetrics {
  double per_dim_std_mean = 0.0;
  double effective_rank = 0.0;
};

// Per-dimension std of uniformly spread unit vectors in d dimensions.
inline double isotropic_std_reference(std::size_t d) { return 1.0 / std::sqrt(static_cast<double>(d)); }

// Statistics of L2-normalised rows (rows of norm below kMinRowNorm count as
// zero vectors). Effective rank is exp of the entropy of the normalised
// singular-value distribution; an all-zero matrix has effective rank 0.
inline CollapseMetrics collapse_metrics(const Tensor& features) {
  features.require_rank(2);
  const std::size_t n = features.rows(), d = features.cols();
  if (n < 2) throw DimensionError("collapse_metrics: needs at least 2 samples");
  Tensor z(features.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double nrm = l2_norm(features.row(i));
    if (nrm < kMinRowNorm) continue;
    auto src = features.row(i);
    auto dst = z.row(i);
    for (std::size_t j = 0; j < d; ++j) dst[j] = src[j] / nrm;
  }

  CollapseMetrics m;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += z(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (z(i, j) - mean) * (z(i, j) - mean);
    m.per_dim_std_mean += std::sqrt(var / static_cast<double>(n));
  }
  m.per_dim_std_mean /= static_cast<double>(d);

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> mat(z.raw().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const Eigen::VectorXd sv = Eigen::JacobiSVD<RowMajor>(mat).singularValues();
  const double total = sv.sum();
  if (!(total > 0.0)) return m;
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    const double p = sv[i] / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  m.effective_rank = std::exp(entropy);
  return m;
}

}  // namespace airl
