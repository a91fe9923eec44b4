#pragma once

#include <airl/eval/collapse.hpp>
#include <airl/eval/dataset.hpp>
#include <airl/encoder/network.hpp>
#include <airl/optim/optim.hpp>

#include <cmath>
#include <vector>

namespace airl {

// Linear classifier on frozen features, trained by SGD without weight decay.
struct ProbeConfig {
  std::size_t epochs = 50;
  std::size_t batch = 64;
  LrSchedule lr{LrKind::step_decay, 0.3, 0.0, {0.6, 0.8}, 0.1};
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  // Re-estimate BN running statistics on the probe's training images before
  // extracting features.
  bool recalibrate_bn = true;

  void validate() const {
    if (epochs == 0 || batch == 0) throw ConfigError("probe epochs and batch must be > 0");
    if (!(lr.base_lr > 0.0)) throw ConfigError("probe lr must be > 0");
  }
};

struct ProbeResult {
  double top1 = 0.0;        // validation split
  double train_top1 = 0.0;
  Tensor weight;            // [classes x feature_dim]
  Tensor bias;              // [classes]
  double feature_std = 0.0;  // mean per-dimension std of raw training features
};

inline constexpr double kCollapseStd = 1e-6;

namespace detail {

inline double mean_feature_std(const Tensor& f) {
  const std::size_t n = f.rows(), d = f.cols();
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += f(i, j);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) var += (f(i, j) - mean) * (f(i, j) - mean);
    total += std::sqrt(var / static_cast<double>(n));
  }
  return total / static_cast<double>(d);
}

inline double accuracy(const Tensor& f, const std::vector<int>& labels, const Tensor& w,
                       const Tensor& b) {
  if (labels.empty()) return 0.0;
  Tensor logits = matmul(f, transpose(w));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < f.rows(); ++i) {
    auto r = logits.row(i);
    std::size_t best = 0;
    for (std::size_t c = 0; c < r.size(); ++c)
      if (r[c] + b[c] > r[best] + b[best]) best = c;
    hits += static_cast<int>(best) == labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace detail

// Softmax cross-entropy probe on precomputed features.
inline ProbeResult train_probe(const Tensor& train_f, const std::vector<int>& train_y,
                               const Tensor& val_f, const std::vector<int>& val_y,
                               std::size_t classes, const ProbeConfig& cfg) {
  cfg.validate();
  train_f.require_rank(2);
  if (train_f.rows() != train_y.size() || (val_f.size() && val_f.rows() != val_y.size()))
    throw DimensionError("probe: feature rows and label counts differ");
  for (int y : train_y)
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw ConfigError("probe: label " + std::to_string(y) + " out of range");
  const std::size_t n = train_f.rows(), d = train_f.cols();

  ProbeResult res;
  res.feature_std = detail::mean_feature_std(train_f);
  if (res.feature_std < kCollapseStd) {
    throw DegenerateError("feature collapse: mean per-dimension std " +
                          std::to_string(res.feature_std) + " < 1e-6; probe would be at chance");
  }

  ParamSet p;
  p.add("probe.weight", Role::weight, Tensor({classes, d}));
  p.add("probe.bias", Role::bias, Tensor({classes}));
  OptimizerState state;
  const SgdConfig sgd{cfg.lr.base_lr, cfg.momentum, cfg.weight_decay, false};
  Rng rng(cfg.seed, 0x9b);
  const std::size_t steps_per_epoch = (n + cfg.batch - 1) / cfg.batch;
  const double total_steps = static_cast<double>(cfg.epochs * steps_per_epoch);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = rng.substream(epoch).permutation(n);
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t lo = s * cfg.batch, hi = std::min(n, lo + cfg.batch);
      const double inv_b = 1.0 / static_cast<double>(hi - lo);
      const Tensor& w = p.at("probe.weight");
      const Tensor& b = p.at("probe.bias");
      ParamSet g = p.zeros_like();
      Tensor& gw = g.at("probe.weight");
      Tensor& gb = g.at("probe.bias");
      std::vector<double> z(classes);
      for (std::size_t k = lo; k < hi; ++k) {
        auto x = train_f.row(order[k]);
        double mx = -INFINITY;
        for (std::size_t c = 0; c < classes; ++c) {
          z[c] = dot(x, w.row(c)) + b[c];
          mx = std::max(mx, z[c]);
        }
        double sum = 0.0;
        for (auto& v : z) sum += (v = std::exp(v - mx));
        const auto y = static_cast<std::size_t>(train_y[order[k]]);
        for (std::size_t c = 0; c < classes; ++c) {
          const double dz = (z[c] / sum - (c == y ? 1.0 : 0.0)) * inv_b;
          gb[c] += dz;
          auto gr = gw.row(c);
          for (std::size_t j = 0; j < d; ++j) gr[j] += dz * x[j];
        }
      }
      const double lr = lr_at(static_cast<double>(step) / total_steps, cfg.lr);
      sgd_step(p, g, state, sgd, lr);
      ++step;
    }
  }
  res.weight = p.at("probe.weight");
  res.bias = p.at("probe.bias");
  res.train_top1 = detail::accuracy(train_f, train_y, res.weight, res.bias);
  res.top1 = val_f.size() ? detail::accuracy(val_f, val_y, res.weight, res.bias) : 0.0;
  return res;
}

// Replaces every BN layer's running statistics with the exact statistics of x.
inline void recalibrate_bn(const Network& net, EncoderParams& p, const Tensor& x) {
  Rng unused(0, 0);
  auto res = forward(net, p, x, {.training = true, .bn_mode = BnMode::global}, unused);
  const double n = static_cast<double>(x.rows());
  for (std::size_t si = 0; si < net.stages.size(); ++si) {
    const auto& s = net.stages[si];
    for (std::size_t li = 0; li < s.layers.size(); ++li) {
      if (s.layers[li].kind != LayerKind::batch_norm) continue;
      const auto& lc = res.cache.layers[si][li];
      const std::string pre = layer_prefix(s, li);
      Tensor& rm = p.buffers.at(pre + ".running_mean");
      Tensor& rv = p.buffers.at(pre + ".running_var");
      for (std::size_t j = 0; j < rm.size(); ++j) {
        rm[j] = lc.batch_mean[0][j];
        rv[j] = lc.batch_var[0][j] * n / (n - 1.0);
      }
    }
  }
}

// Eval-mode encoder output for a batch of images.
inline Tensor extract_features(const Network& net, const EncoderParams& p, const Tensor& x) {
  Rng unused(0, 0);
  return forward(net, p, x, {.training = false}, unused).output;
}

// Probes the output of `net` (normally the backbone) on the dataset. `params`
// is copied, never modified.
inline ProbeResult linear_probe(const Network& net, const EncoderParams& params, const Dataset& data,
                                const ProbeConfig& cfg, std::size_t input_side) {
  const auto train_imgs = data.images_of(Split::train);
  const auto val_imgs = data.images_of(Split::val);
  const Tensor xtr = eval_batch(train_imgs, input_side);
  EncoderParams p = params;
  if (cfg.recalibrate_bn) recalibrate_bn(net, p, xtr);
  const Tensor ftr = extract_features(net, p, xtr);
  const Tensor fval = val_imgs.empty() ? Tensor() : extract_features(net, p, eval_batch(val_imgs, input_side));
  return train_probe(ftr, data.labels_of(Split::train), fval, data.labels_of(Split::val),
                     data.classes, cfg);
}

}  // namespace airl
