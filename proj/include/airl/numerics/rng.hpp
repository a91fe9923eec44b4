#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <numbers>
#include <vector>

namespace airl {

namespace detail {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Counter-based generator: draw i of stream (seed, stream_id) is a pure
// function of (seed, stream_id, i). Integer-only core, so sequences are the
// same on every platform. Streams are split by hashing child ids into the
// stream id, never by sharing a generator.
class Rng {
 public:
  Rng() : Rng(0, 0) {}
  Rng(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed),
        stream_(stream_id),
        key_(detail::mix64(seed ^ detail::mix64(stream_id ^ 0x5851f42d4c957f2dULL))) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  // Independent child stream; does not advance this generator.
  Rng substream(std::uint64_t id) const {
    return Rng(seed_, detail::mix64(stream_ ^ detail::mix64(id + 0x2545f4914f6cdd1dULL)));
  }
  Rng substream(std::initializer_list<std::uint64_t> path) const {
    Rng r = *this;
    for (auto id : path) r = r.substream(id);
    return r;
  }

  std::uint64_t next_u64() noexcept {
    return detail::mix64(key_ + detail::mix64(counter_++));
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Uniform integer in [0, n), rejection sampling for exact uniformity.
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller (one draw per call, two uniforms consumed).
  double normal() noexcept {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(p[i - 1], p[j]);
    }
    return p;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace airl
