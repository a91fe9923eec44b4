#pragma once

#include <airl/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace airl {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream oss;
  oss << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) oss << 'x';
    oss << s[i];
  }
  oss << ']';
  return oss.str();
}

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

// Dense row-major float64 array.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
      throw DimensionError("tensor shape " + shape_str(shape_) + " does not hold " +
                           std::to_string(data_.size()) + " values");
    }
  }

  // Row-major matrix literal: Tensor::matrix({{1, 2}, {3, 4}}).
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t n = rows.size();
    const std::size_t d = n ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(n * d);
    for (const auto& r : rows) {
      if (r.size() != d) throw DimensionError("ragged matrix literal");
      data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({n, d}, std::move(data));
  }

  static Tensor vector(std::initializer_list<double> v) {
    return Tensor({v.size()}, std::vector<double>(v));
  }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t rows() const {
    require_rank(2);
    return shape_[0];
  }
  std::size_t cols() const {
    require_rank(2);
    return shape_[1];
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::vector<double>& raw() noexcept { return data_; }
  const std::vector<double>& raw() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * shape_[1], shape_[1]}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * shape_[1], shape_[1]};
  }

  bool all_finite() const noexcept {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor& operator+=(const Tensor& o) {
    require_same(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    require_same(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Tensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(Tensor a, double s) { return a *= s; }
  friend Tensor operator*(double s, Tensor a) { return a *= s; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  void require_rank(std::size_t r) const {
    if (shape_.size() != r) {
      throw DimensionError("expected rank-" + std::to_string(r) + " tensor, got " +
                           shape_str(shape_));
    }
  }

  void require_same(const Tensor& o, const char* what) const {
    if (shape_ != o.shape_) {
      throw DimensionError(std::string(what) + ": shape " + shape_str(shape_) + " vs " +
                           shape_str(o.shape_));
    }
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace airl
