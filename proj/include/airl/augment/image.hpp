#pragma once

#include <airl/error.hpp>
#include <airl/numerics/tensor.hpp>

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace airl {

// RGB raster, channel-interleaved (HWC), values in [0, 1].
struct Image {
  static constexpr std::size_t kChannels = 3;

  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), pixels(h * w * kChannels, fill) {
    if (h == 0 || w == 0) throw DimensionError("image dimensions must be positive");
  }

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * kChannels + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * kChannels + c];
  }

  std::size_t feature_dim() const { return pixels.size(); }

  void clamp() {
    for (double& v : pixels) v = std::clamp(v, 0.0, 1.0);
  }

  friend bool operator==(const Image&, const Image&) = default;
};

// Stacks images into an [n x (h*w*3)] feature matrix.
inline Tensor images_to_batch(std::span<const Image> imgs) {
  if (imgs.empty()) throw DimensionError("empty image batch");
  const std::size_t d = imgs.front().feature_dim();
  Tensor t({imgs.size(), d});
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    if (imgs[i].feature_dim() != d) throw DimensionError("images in a batch differ in size");
    std::copy(imgs[i].pixels.begin(), imgs[i].pixels.end(), t.row(i).begin());
  }
  return t;
}

// Fixed input normalisation applied between images and the encoder.
inline constexpr double kPixelMean = 0.5;
inline constexpr double kPixelStd = 0.25;

inline Tensor network_input(std::span<const Image> imgs) {
  Tensor t = images_to_batch(imgs);
  for (double& v : t.values()) v = (v - kPixelMean) / kPixelStd;
  return t;
}

}  // namespace airl
