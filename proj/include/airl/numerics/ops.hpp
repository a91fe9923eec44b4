#pragma once

#include <airl/numerics/tensor.hpp>

#include <cmath>
#include <functional>
#include <string>

namespace airl {

// C = A * B. Each output element is accumulated over k in increasing order.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor c({m, n});
  const double* pa = a.raw().data();
  const double* pb = b.raw().data();
  double* pc = c.raw().data();
  // Four rows of A share each pass over a row of B; per-element summation
  // order is unchanged.
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* c0 = pc + i * n;
    double* c1 = c0 + n;
    double* c2 = c1 + n;
    double* c3 = c2 + n;
    for (std::size_t p = 0; p < k; ++p) {
      const double a0 = pa[i * k + p], a1 = pa[(i + 1) * k + p];
      const double a2 = pa[(i + 2) * k + p], a3 = pa[(i + 3) * k + p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double bv = brow[j];
        c0[j] += a0 * bv;
        c1[j] += a1 * bv;
        c2[j] += a2 * bv;
        c3[j] += a3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    double* crow = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

inline Tensor transpose(const Tensor& a) {
  a.require_rank(2);
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor t({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t(j, i) = a(i, j);
  return t;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }
inline double l2_norm(const Tensor& t) { return l2_norm(t.values()); }

inline double sum(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v;
  return s;
}

// Minimum row norm accepted by l2_normalize_rows.
inline constexpr double kMinRowNorm = 1e-12;

inline Tensor l2_normalize_rows(const Tensor& x) {
  x.require_rank(2);
  Tensor y = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double nrm = l2_norm(x.row(i));
    if (!(nrm >= kMinRowNorm)) {
      throw DegenerateError("l2_normalize_rows: row " + std::to_string(i) + " has norm " +
                            std::to_string(nrm));
    }
    for (double& v : y.row(i)) v /= nrm;
  }
  return y;
}

// Backprop through y = x / |x| row-wise: dx = (dy - y (y . dy)) / |x|.
inline Tensor l2_normalize_rows_backward(const Tensor& x, const Tensor& y, const Tensor& dy) {
  x.require_same(dy, "l2_normalize_rows_backward");
  Tensor dx(x.shape());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double nrm = l2_norm(x.row(i));
    const double yd = dot(y.row(i), dy.row(i));
    auto yr = y.row(i);
    auto dyr = dy.row(i);
    auto dxr = dx.row(i);
    for (std::size_t j = 0; j < dxr.size(); ++j) dxr[j] = (dyr[j] - yr[j] * yd) / nrm;
  }
  return dx;
}

inline constexpr double kDefaultFdStep = 1e-5;

// Central-difference gradient of a scalar function.
inline Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                               double h = kDefaultFdStep) {
  Tensor g(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = f(probe);
    probe[i] = orig - h;
    const double fm = f(probe);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw OracleError("finite_diff_grad: non-finite value at coordinate " + std::to_string(i));
    }
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace airl
