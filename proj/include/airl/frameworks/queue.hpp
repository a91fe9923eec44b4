#pragma once

#include <airl/numerics/ops.hpp>

#include <cmath>
#include <string>

namespace airl {

// Fixed-capacity FIFO ring of unit-norm feature rows.
class MemoryQueue {
 public:
  static constexpr double kUnitTolerance = 1e-9;

  MemoryQueue() = default;
  MemoryQueue(std::size_t capacity, std::size_t dim)
      : capacity_(capacity), dim_(dim), storage_(capacity ? Shape{capacity, dim} : Shape{0, dim}) {}

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t fill() const noexcept { return fill_; }
  std::size_t cursor() const noexcept { return cursor_; }
  const Tensor& storage() const noexcept { return storage_; }

  void enqueue(const Tensor& feats) {
    if (feats.size() == 0) return;
    feats.require_rank(2);
    if (feats.cols() != dim_) {
      throw DimensionError("queue: feature dim " + std::to_string(feats.cols()) +
                           " != queue dim " + std::to_string(dim_));
    }
    const std::size_t b = feats.rows();
    if (b > capacity_) {
      throw ConfigError("queue: cannot enqueue " + std::to_string(b) + " rows into capacity " +
                        std::to_string(capacity_));
    }
    for (std::size_t i = 0; i < b; ++i) {
      const double nrm = l2_norm(feats.row(i));
      if (std::abs(nrm - 1.0) > kUnitTolerance)
        throw DegenerateError("queue: row " + std::to_string(i) + " is not unit-norm");
    }
    for (std::size_t i = 0; i < b; ++i) {
      auto src = feats.row(i);
      std::copy(src.begin(), src.end(), storage_.row(cursor_).begin());
      cursor_ = (cursor_ + 1) % capacity_;
    }
    fill_ = std::min(capacity_, fill_ + b);
  }

  // Stored rows, oldest first. Empty [0 x dim] tensor when nothing is stored.
  Tensor contents() const {
    Tensor out({fill_, dim_});
    const std::size_t start = fill_ < capacity_ ? 0 : cursor_;
    for (std::size_t i = 0; i < fill_; ++i) {
      auto src = storage_.row((start + i) % capacity_);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  // Restores a queue from serialized storage.
  static MemoryQueue restore(Tensor storage, std::size_t fill, std::size_t cursor) {
    storage.require_rank(2);
    MemoryQueue q;
    q.capacity_ = storage.rows();
    q.dim_ = storage.cols();
    if (fill > q.capacity_ || (q.capacity_ && cursor >= q.capacity_))
      throw FormatError("queue: fill/cursor out of range");
    q.storage_ = std::move(storage);
    q.fill_ = fill;
    q.cursor_ = cursor;
    return q;
  }

  friend bool operator==(const MemoryQueue&, const MemoryQueue&) = default;

 private:
  std::size_t capacity_ = 0;
  std::size_t dim_ = 0;
  Tensor storage_;
  std::size_t fill_ = 0;
  std::size_t cursor_ = 0;
};

}  // namespace airl
