#pragma once

#include <airl/augment/image.hpp>
#include <airl/numerics/rng.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace airl {

inline constexpr std::array<double, 3> kLumaWeights{0.299, 0.587, 0.114};

inline Image solarize(Image img, double threshold) {
  for (double& p : img.pixels)
    if (p >= threshold) p = 1.0 - p;
  return img;
}

inline Image hflip(const Image& img) {
  Image out(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < Image::kChannels; ++c)
        out.at(y, img.width - 1 - x, c) = img.at(y, x, c);
  return out;
}

inline double luma(const Image& img, std::size_t y, std::size_t x) {
  return kLumaWeights[0] * img.at(y, x, 0) + kLumaWeights[1] * img.at(y, x, 1) +
         kLumaWeights[2] * img.at(y, x, 2);
}

inline Image grayscale(const Image& img) {
  Image out(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const double l = std::clamp(luma(img, y, x), 0.0, 1.0);
      for (std::size_t c = 0; c < Image::kChannels; ++c) out.at(y, x, c) = l;
    }
  return out;
}

// Bilinear resampling of the window [top, top+h) x [left, left+w) to side x side
// (pixel-center alignment, edge clamped).
inline Image crop_resize(const Image& img, std::size_t top, std::size_t left, std::size_t h,
                         std::size_t w, std::size_t side) {
  Image out(side, side);
  const double sy = static_cast<double>(h) / static_cast<double>(side);
  const double sx = static_cast<double>(w) / static_cast<double>(side);
  for (std::size_t oy = 0; oy < side; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < side; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        const double a = img.at(top + y0, left + x0, c), b = img.at(top + y0, left + x1, c);
        const double d = img.at(top + y1, left + x0, c), e = img.at(top + y1, left + x1, c);
        const double top_row = wx == 0.0 ? a : a + wx * (b - a);
        const double bot_row = wx == 0.0 ? d : d + wx * (e - d);
        out.at(oy, ox, c) = wy == 0.0 ? top_row : top_row + wy * (bot_row - top_row);
      }
    }
  }
  out.clamp();
  return out;
}

struct CropWindow {
  std::size_t top = 0, left = 0, height = 0, width = 0;
};

// Area fraction uniform in `scale`, aspect ratio uniform in `ratio`; up to 10
// attempts, then the center crop of the full image (aspect clamped to ratio).
inline CropWindow sample_crop(std::size_t H, std::size_t W, std::pair<double, double> scale,
                              std::pair<double, double> ratio, Rng& rng) {
  const double area = static_cast<double>(H * W);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(scale.first, scale.second);
    const double ar = rng.uniform(ratio.first, ratio.second);
    const auto w = static_cast<std::size_t>(std::lround(std::sqrt(target * ar)));
    const auto h = static_cast<std::size_t>(std::lround(std::sqrt(target / ar)));
    if (w > 0 && h > 0 && w <= W && h <= H) {
      const auto top = static_cast<std::size_t>(rng.below(H - h + 1));
      const auto left = static_cast<std::size_t>(rng.below(W - w + 1));
      return {top, left, h, w};
    }
  }
  const double in_ratio = static_cast<double>(W) / static_cast<double>(H);
  std::size_t w = W, h = H;
  if (in_ratio < ratio.first) {
    h = std::min(H, static_cast<std::size_t>(std::lround(W / ratio.first)));
  } else if (in_ratio > ratio.second) {
    w = std::min(W, static_cast<std::size_t>(std::lround(H * ratio.second)));
  }
  return {(H - h) / 2, (W - w) / 2, h, w};
}

inline Image random_resized_crop(const Image& img, std::pair<double, double> scale,
                                 std::size_t out_side, Rng& rng,
                                 std::pair<double, double> ratio = {3.0 / 4.0, 4.0 / 3.0}) {
  if (out_side < 2) throw DimensionError("random_resized_crop: out_side must be >= 2");
  if (img.height < 2 || img.width < 2) throw DimensionError("random_resized_crop: image < 2x2");
  const CropWindow c = sample_crop(img.height, img.width, scale, ratio, rng);
  return crop_resize(img, c.top, c.left, c.height, c.width, out_side);
}

struct JitterStrength {
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.2;
  double hue = 0.1;
};

// Brightness, contrast, saturation, hue in that fixed order. Hue is a
// rotation of RGB about the gray axis by 2*pi*shift, shift in [-hue, hue].
inline Image color_jitter(Image img, const JitterStrength& s, Rng& rng) {
  const double fb = rng.uniform(1.0 - s.brightness, 1.0 + s.brightness);
  const double fc = rng.uniform(1.0 - s.contrast, 1.0 + s.contrast);
  const double fs = rng.uniform(1.0 - s.saturation, 1.0 + s.saturation);
  const double shift = rng.uniform(-s.hue, s.hue);

  if (fb != 1.0) {
    for (double& p : img.pixels) p *= fb;
    img.clamp();
  }
  if (fc != 1.0) {
    double mean = 0.0;
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) mean += luma(img, y, x);
    mean /= static_cast<double>(img.height * img.width);
    for (double& p : img.pixels) p = mean + fc * (p - mean);
    img.clamp();
  }
  if (fs != 1.0) {
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) {
        const double l = luma(img, y, x);
        for (std::size_t c = 0; c < Image::kChannels; ++c)
          img.at(y, x, c) = l + fs * (img.at(y, x, c) - l);
      }
    img.clamp();
  }
  if (shift != 0.0) {
    const double th = 2.0 * std::numbers::pi * shift;
    const double co = std::cos(th), si = std::sin(th);
    const double k = 1.0 / std::sqrt(3.0);
    // Rodrigues rotation about (1,1,1)/sqrt(3).
    const double diag = co + k * k * (1.0 - co);
    const double off_p = k * k * (1.0 - co) + k * si;
    const double off_m = k * k * (1.0 - co) - k * si;
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) {
        const double r = img.at(y, x, 0), g = img.at(y, x, 1), b = img.at(y, x, 2);
        img.at(y, x, 0) = diag * r + off_m * g + off_p * b;
        img.at(y, x, 1) = off_p * r + diag * g + off_m * b;
        img.at(y, x, 2) = off_m * r + off_p * g + diag * b;
      }
    img.clamp();
  }
  return img;
}

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(2.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  return k;
}

// Separable Gaussian blur with reflected borders.
inline Image gaussian_blur_sigma(const Image& img, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  auto reflect = [](int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  const int H = static_cast<int>(img.height), W = static_cast<int>(img.width);
  Image tmp(img.height, img.width), out(img.height, img.width);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        double s = 0.0;
        for (int t = -radius; t <= radius; ++t)
          s += k[static_cast<std::size_t>(t + radius)] *
               img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(reflect(x + t, W)), c);
        tmp.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = s;
      }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        double s = 0.0;
        for (int t = -radius; t <= radius; ++t)
          s += k[static_cast<std::size_t>(t + radius)] *
               tmp.at(static_cast<std::size_t>(reflect(y + t, H)), static_cast<std::size_t>(x), c);
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = s;
      }
  out.clamp();
  return out;
}

inline Image gaussian_blur(const Image& img, std::pair<double, double> sigma_range, Rng& rng) {
  return gaussian_blur_sigma(img, rng.uniform(sigma_range.first, sigma_range.second));
}

// ---------------------------------------------------------------------------
// Pipeline

enum class AugKind : std::uint8_t {
  random_resized_crop = 0,
  hflip = 1,
  color_jitter = 2,
  grayscale = 3,
  gaussian_blur = 4,
  solarize = 5,
};

inline std::string_view aug_name(AugKind k) {
  switch (k) {
    case AugKind::random_resized_crop: return "random_resized_crop";
    case AugKind::hflip: return "hflip";
    case AugKind::color_jitter: return "color_jitter";
    case AugKind::grayscale: return "grayscale";
    case AugKind::gaussian_blur: return "gaussian_blur";
    case AugKind::solarize: return "solarize";
  }
  return "unknown";
}

inline bool aug_from_name(std::string_view s, AugKind& out) {
  for (auto k : {AugKind::random_resized_crop, AugKind::hflip, AugKind::color_jitter,
                 AugKind::grayscale, AugKind::gaussian_blur, AugKind::solarize}) {
    if (aug_name(k) == s) {
      out = k;
      return true;
    }
  }
  return false;
}

struct AugStep {
  AugKind kind;
  double probability = 1.0;
  // Interpretation per kind: crop (scale_lo, scale_hi, ratio_lo, ratio_hi);
  // jitter (b, c, s, h); blur (sigma_lo, sigma_hi); solarize (threshold).
  std::vector<double> params;
};

struct AugPipeline {
  std::vector<AugStep> steps;
  std::size_t out_side = 16;

  bool contains(AugKind k) const {
    for (const auto& s : steps)
      if (s.kind == k) return true;
    return false;
  }

  AugPipeline without(AugKind k) const {
    AugPipeline p = *this;
    std::erase_if(p.steps, [k](const AugStep& s) { return s.kind == k; });
    return p;
  }

  // Crop/resize at p=1.0 with (0.08, 1.0); flip 0.5; jitter 0.8 with
  // (0.4, 0.4, 0.2, 0.1); grayscale 0.2; blur 0.5 with sigma in (0.1, 2.0);
  // solarize 0.2 at 128/255.
  static AugPipeline standard(std::size_t out_side = 16) {
    AugPipeline p;
    p.out_side = out_side;
    p.steps = {
        {AugKind::random_resized_crop, 1.0, {0.08, 1.0, 3.0 / 4.0, 4.0 / 3.0}},
        {AugKind::hflip, 0.5, {}},
        {AugKind::color_jitter, 0.8, {0.4, 0.4, 0.2, 0.1}},
        {AugKind::grayscale, 0.2, {}},
        {AugKind::gaussian_blur, 0.5, {0.1, 2.0}},
        {AugKind::solarize, 0.2, {128.0 / 255.0}},
    };
    return p;
  }

  // Only a full-image resize: every view equals the resized source.
  static AugPipeline identity(std::size_t out_side = 16) {
    AugPipeline p;
    p.out_side = out_side;
    p.steps = {{AugKind::random_resized_crop, 1.0, {1.0, 1.0, 1.0, 1.0}}};
    return p;
  }
};

// Color augmentations dropped cumulatively, in this order, by the ablation
// ladder.
inline constexpr std::array<AugKind, 4> kRemovalOrder{AugKind::solarize, AugKind::gaussian_blur,
                                                      AugKind::grayscale, AugKind::color_jitter};

// Rung 0 is the full pipeline; rung r drops the first r entries of kRemovalOrder.
inline AugPipeline removal_ladder(const AugPipeline& full, std::size_t rung) {
  if (rung > kRemovalOrder.size()) {
    throw ConfigError("removal ladder rung " + std::to_string(rung) + " out of range [0, 4]");
  }
  AugPipeline p = full;
  for (std::size_t i = 0; i < rung; ++i) p = p.without(kRemovalOrder[i]);
  return p;
}

namespace detail {

inline void require_params(const AugStep& s, std::size_t n) {
  if (s.params.size() != n) {
    throw ConfigError(std::string(aug_name(s.kind)) + " expects " + std::to_string(n) +
                      " parameters, got " + std::to_string(s.params.size()));
  }
}

// Each step draws from a stream keyed by its kind, so removing one step
// leaves the draws of the others untouched.
inline Rng step_stream(const Rng& view_rng, AugKind k) {
  return view_rng.substream(static_cast<std::uint64_t>(k));
}

}  // namespace detail

inline void validate(const AugPipeline& p) {
  if (p.out_side < 2) throw ConfigError("pipeline out_side must be >= 2");
  bool has_crop = false;
  for (const auto& s : p.steps) {
    if (!(s.probability >= 0.0 && s.probability <= 1.0))
      throw ConfigError(std::string(aug_name(s.kind)) + ": probability outside [0, 1]");
    switch (s.kind) {
      case AugKind::random_resized_crop:
        detail::require_params(s, 4);
        has_crop = true;
        break;
      case AugKind::color_jitter: detail::require_params(s, 4); break;
      case AugKind::gaussian_blur: detail::require_params(s, 2); break;
      case AugKind::solarize: detail::require_params(s, 1); break;
      default: detail::require_params(s, 0); break;
    }
  }
  if (!has_crop || p.steps.front().kind != AugKind::random_resized_crop)
    throw ConfigError("pipeline must start with random_resized_crop");
}

// Which steps fire for a view drawn from view_rng.
inline std::vector<bool> sample_firing(const AugPipeline& p, const Rng& view_rng) {
  std::vector<bool> fired;
  fired.reserve(p.steps.size());
  for (const auto& s : p.steps) {
    Rng r = detail::step_stream(view_rng, s.kind);
    fired.push_back(r.bernoulli(s.probability));
  }
  return fired;
}

inline Image apply_pipeline(const Image& src, const AugPipeline& p, const Rng& view_rng) {
  Image img = src;
  for (const auto& s : p.steps) {
    Rng r = detail::step_stream(view_rng, s.kind);
    if (!r.bernoulli(s.probability)) continue;
    switch (s.kind) {
      case AugKind::random_resized_crop:
        img = random_resized_crop(img, {s.params[0], s.params[1]}, p.out_side, r,
                                  {s.params[2], s.params[3]});
        break;
      case AugKind::hflip: img = hflip(img); break;
      case AugKind::color_jitter:
        img = color_jitter(std::move(img), {s.params[0], s.params[1], s.params[2], s.params[3]}, r);
        break;
      case AugKind::grayscale: img = grayscale(img); break;
      case AugKind::gaussian_blur: img = gaussian_blur(img, {s.params[0], s.params[1]}, r); break;
      case AugKind::solarize: img = solarize(std::move(img), s.params[0]); break;
    }
  }
  return img;
}

// Two independent draws of the pipeline; view v of sample s uses the stream
// rng.substream({s, v}).
inline std::pair<Image, Image> two_views(const Image& src, const AugPipeline& p, const Rng& rng,
                                         std::uint64_t sample_id) {
  return {apply_pipeline(src, p, rng.substream({sample_id, 0})),
          apply_pipeline(src, p, rng.substream({sample_id, 1}))};
}

}  // namespace airl
