#pragma once

#include <airl/augment/augment.hpp>
#include <airl/numerics/rng.hpp>

#include <charconv>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace airl {

enum class Split : std::uint8_t { train, val };

struct Dataset {
  std::size_t classes = 0;
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<Split> splits;

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < splits.size(); ++i)
      if (splits[i] == s) out.push_back(i);
    return out;
  }

  std::vector<Image> images_of(Split s) const {
    std::vector<Image> out;
    for (auto i : indices(s)) out.push_back(images[i]);
    return out;
  }

  std::vector<int> labels_of(Split s) const {
    std::vector<int> out;
    for (auto i : indices(s)) out.push_back(labels[i]);
    return out;
  }
};

// Procedural shape classes. Every class is a mirror-symmetric shape (disk,
// square, diamond, cross, ...; cycling when classes > 8), so identity
// survives horizontal flips, colour changes and moderate crops. `noise`
// scales every per-sample nuisance: position, size, foreground and
// background colour, edge softness and pixel noise. noise = 0 makes all
// samples of a class identical.
struct SyntheticSpec {
  std::size_t classes = 8;
  std::size_t train_per_class = 64;
  std::size_t val_per_class = 32;
  std::size_t side = 16;
  double noise = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
    if (side < 2) throw ConfigError("synthetic image side must be >= 2");
    if (train_per_class == 0) throw ConfigError("train_per_class must be > 0");
    if (!(noise >= 0.0)) throw ConfigError("noise must be >= 0");
  }

  // "classes=8,train=64,val=32,side=16,noise=1,seed=3"; omitted keys keep defaults.
  static SyntheticSpec parse(std::string_view text) {
    SyntheticSpec s;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t end = text.find(',', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view item = text.substr(pos, end - pos);
      pos = end + 1;
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError("data spec item '" + std::string(item) + "' is not key=value");
      const std::string key(item.substr(0, eq));
      const std::string val(item.substr(eq + 1));
      try {
        if (key == "classes") s.classes = std::stoul(val);
        else if (key == "train") s.train_per_class = std::stoul(val);
        else if (key == "val") s.val_per_class = std::stoul(val);
        else if (key == "side") s.side = std::stoul(val);
        else if (key == "noise") s.noise = std::stod(val);
        else if (key == "seed") s.seed = std::stoull(val);
        else throw ConfigError("unknown data spec key '" + key + "'");
      } catch (const std::logic_error&) {
        throw ConfigError("bad value '" + val + "' for data spec key '" + key + "'");
      }
    }
    s.validate();
    return s;
  }
};

namespace detail {

inline constexpr std::size_t kShapeFamilies = 8;

// Signed "inside" score of the shape at offset (u, v) from its centre with
// radius r: positive inside, negative outside, roughly in pixels.
inline double shape_score(std::size_t family, double u, double v, double r) {
  const double au = std::abs(u), av = std::abs(v);
  switch (family % kShapeFamilies) {
    case 0: return r - std::hypot(u, v);                                     // disk
    case 1: return r - std::max(au, av);                                     // square
    case 2: return r - (au + av) / std::numbers::sqrt2 * 1.2;                // diamond
    case 3: return std::max(std::min(r - au, 0.35 * r - av),                 // plus
                            std::min(0.35 * r - au, r - av));
    case 4: return 0.3 * r - std::abs(std::hypot(u, v) - 0.75 * r);          // ring
    case 5: return std::min(r - au, 0.35 * r - av);                          // horizontal bar
    case 6: return std::min(0.35 * r - au, r - av);                          // vertical bar
    default: return std::min(r - av, (r - v) * 0.5 - au);                    // triangle
  }
}

inline Image synthetic_sample(const SyntheticSpec& s, std::size_t cls, Rng rng) {
  const double nz = s.noise;
  const double side = static_cast<double>(s.side);
  const double radius = 0.32 * side * std::exp(nz * rng.uniform(-0.2, 0.2));
  const double cx = (side - 1.0) / 2.0 + nz * rng.uniform(-0.1, 0.1) * side;
  const double cy = (side - 1.0) / 2.0 + nz * rng.uniform(-0.1, 0.1) * side;
  double fg[3], bg[3];
  for (int c = 0; c < 3; ++c) {
    fg[c] = 0.75 + nz * rng.uniform(-0.25, 0.25);
    bg[c] = 0.25 + nz * rng.uniform(-0.25, 0.25);
  }
  const double softness = 0.5 + 0.5 * nz * rng.uniform();
  const double pixel_sigma = 0.04 * nz;

  Image img(s.side, s.side);
  for (std::size_t y = 0; y < s.side; ++y) {
    for (std::size_t x = 0; x < s.side; ++x) {
      const double score = shape_score(cls, static_cast<double>(x) - cx,
                                       static_cast<double>(y) - cy, radius);
      const double a = 1.0 / (1.0 + std::exp(-score / softness));
      for (std::size_t c = 0; c < 3; ++c) {
        double val = bg[c] + a * (fg[c] - bg[c]);
        if (pixel_sigma > 0.0) val += pixel_sigma * rng.normal();
        img.at(y, x, c) = val;
      }
    }
  }
  img.clamp();
  return img;
}

}  // namespace detail

// Train samples first (class-major), then validation samples. Sample i of
// class c in split s depends only on (seed, s, c, i).
inline Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
  spec.validate();
  Dataset d;
  d.classes = spec.classes;
  const Rng root(spec.seed, 0x5d);
  for (auto split : {Split::train, Split::val}) {
    const std::size_t per = split == Split::train ? spec.train_per_class : spec.val_per_class;
    for (std::size_t c = 0; c < spec.classes; ++c) {
      for (std::size_t i = 0; i < per; ++i) {
        d.images.push_back(detail::synthetic_sample(
            spec, c, root.substream({static_cast<std::uint64_t>(split), c, i})));
        d.labels.push_back(static_cast<int>(c));
        d.splits.push_back(split);
      }
    }
  }
  return d;
}

// Resizes (if needed), flattens and normalises images for the encoder.
inline Tensor eval_batch(std::span<const Image> images, std::size_t side) {
  std::vector<Image> prepared;
  prepared.reserve(images.size());
  for (const auto& img : images) {
    if (img.height == side && img.width == side) {
      prepared.push_back(img);
    } else {
      prepared.push_back(crop_resize(img, 0, 0, img.height, img.width, side));
    }
  }
  return network_input(prepared);
}

}  // namespace airl
