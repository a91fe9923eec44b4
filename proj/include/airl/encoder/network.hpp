#pragma once

#include <airl/encoder/params.hpp>
#include <airl/numerics/ops.hpp>
#include <airl/numerics/rng.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace airl {

enum class LayerKind { linear, batch_norm, relu };

struct LayerSpec {
  LayerKind kind;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  bool bias = true;       // linear only
  bool bn_affine = true;  // batch_norm only

  static LayerSpec linear(std::size_t in, std::size_t out, bool with_bias = true) {
    return {LayerKind::linear, in, out, with_bias, false};
  }
  static LayerSpec batch_norm(std::size_t dim, bool affine = true) {
    return {LayerKind::batch_norm, dim, dim, false, affine};
  }
  static LayerSpec relu(std::size_t dim) { return {LayerKind::relu, dim, dim, false, false}; }
};

// A named run of layers. Stage boundaries are where activations are probed
// (CKA) and where a branch may stop (teacher without predictor).
struct Stage {
  std::string name;
  std::vector<LayerSpec> layers;
};

struct Network {
  std::size_t input_dim = 0;
  std::vector<Stage> stages;

  std::size_t output_dim() const {
    std::size_t d = input_dim;
    for (const auto& s : stages)
      for (const auto& l : s.layers) d = l.out_dim;
    return d;
  }

  bool has_stage(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return true;
    return false;
  }

  // Copy holding only the leading stages for which keep(name) holds.
  template <typename Pred>
  Network prefix_while(Pred keep) const {
    Network n{input_dim, {}};
    for (const auto& s : stages) {
      if (!keep(s.name)) break;
      n.stages.push_back(s);
    }
    return n;
  }

  void validate() const {
    std::size_t d = input_dim;
    if (d == 0) throw DimensionError("network input_dim must be positive");
    for (const auto& s : stages) {
      for (std::size_t i = 0; i < s.layers.size(); ++i) {
        const auto& l = s.layers[i];
        if (l.in_dim != d) {
          throw DimensionError("layer " + s.name + "." + std::to_string(i) + " expects input " +
                               std::to_string(l.in_dim) + " but receives " + std::to_string(d));
        }
        if (l.out_dim == 0) throw DimensionError("layer " + s.name + " has zero width");
        if (l.kind != LayerKind::linear && l.in_dim != l.out_dim) {
          throw DimensionError("layer " + s.name + "." + std::to_string(i) +
                               " must preserve width");
        }
        d = l.out_dim;
      }
    }
  }
};

inline std::string layer_prefix(const Stage& s, std::size_t i) {
  return s.name + "." + std::to_string(i);
}

inline constexpr double kBnEpsilon = 1e-5;
inline constexpr double kBnMomentum = 0.9;

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, unit BN gains.
inline EncoderParams init_params(const Network& net, Rng& rng) {
  net.validate();
  EncoderParams p;
  for (const auto& s : net.stages) {
    for (std::size_t i = 0; i < s.layers.size(); ++i) {
      const auto& l = s.layers[i];
      const std::string pre = layer_prefix(s, i);
      switch (l.kind) {
        case LayerKind::linear: {
          const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_dim));
          Tensor w({l.out_dim, l.in_dim});
          for (double& v : w.values()) v = rng.uniform(-bound, bound);
          p.params.add(pre + ".weight", Role::weight, std::move(w));
          if (l.bias) {
            Tensor b({l.out_dim});
            for (double& v : b.values()) v = rng.uniform(-bound, bound);
            p.params.add(pre + ".bias", Role::bias, std::move(b));
          }
          break;
        }
        case LayerKind::batch_norm:
          if (l.bn_affine) {
            p.params.add(pre + ".gain", Role::norm_gain, Tensor({l.out_dim}, 1.0));
            p.params.add(pre + ".bias", Role::norm_bias, Tensor({l.out_dim}, 0.0));
          }
          p.buffers.add(pre + ".running_mean", Role::buffer, Tensor({l.out_dim}, 0.0));
          p.buffers.add(pre + ".running_var", Role::buffer, Tensor({l.out_dim}, 1.0));
          break;
        case LayerKind::relu:
          break;
      }
    }
  }
  return p;
}

enum class BnMode { global, shuffled };

struct ForwardOptions {
  bool training = true;
  BnMode bn_mode = BnMode::global;
  // Number of emulated devices for shuffled BN; statistics are computed per
  // contiguous chunk of the permuted batch.
  std::size_t shuffle_groups = 2;
  // Explicit permutation for shuffled BN; drawn from the rng when absent.
  std::optional<std::vector<std::size_t>> permutation;
};

struct LayerCache {
  Tensor input;                                 // linear, relu
  Tensor xhat;                                  // batch_norm
  std::vector<std::vector<double>> inv_std;     // batch_norm, per group
  std::vector<std::vector<double>> batch_mean;  // batch_norm, per group
  std::vector<std::vector<double>> batch_var;   // batch_norm, per group (biased)
};

struct ForwardCache {
  Network net;
  bool training = false;
  std::vector<std::vector<std::size_t>> groups;  // BN row groups
  std::vector<std::vector<LayerCache>> layers;   // [stage][layer]
  std::size_t batch = 0;
};

struct ForwardResult {
  Tensor output;
  std::vector<Tensor> stage_outputs;  // activation after each stage
  ForwardCache cache;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> bn_groups(std::size_t n, const ForwardOptions& opt,
                                                       Rng& rng) {
  if (opt.bn_mode == BnMode::global) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return {all};
  }
  std::vector<std::size_t> perm = opt.permutation ? *opt.permutation : rng.permutation(n);
  if (perm.size() != n) throw DimensionError("shuffle permutation length != batch size");
  const std::size_t g = std::max<std::size_t>(1, opt.shuffle_groups);
  if (n / g < 2) {
    throw DimensionError("shuffled BN: batch of " + std::to_string(n) + " cannot fill " +
                         std::to_string(g) + " groups of at least 2 samples");
  }
  std::vector<std::vector<std::size_t>> out(g);
  for (std::size_t k = 0; k < g; ++k) {
    const std::size_t lo = k * n / g, hi = (k + 1) * n / g;
    out[k].assign(perm.begin() + static_cast<std::ptrdiff_t>(lo),
                  perm.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return out;
}

inline Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor* b) {
  Tensor y = matmul(x, transpose(w));
  if (b) {
    for (std::size_t i = 0; i < y.rows(); ++i) {
      auto r = y.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += (*b)[j];
    }
  }
  return y;
}

}  // namespace detail

// Runs the network. Pure in params: running statistics are returned in the
// cache and committed separately by commit_running_stats.
inline ForwardResult forward(const Network& net, const EncoderParams& p, const Tensor& x,
                             const ForwardOptions& opt, Rng& rng) {
  x.require_rank(2);
  if (x.cols() != net.input_dim) {
    throw DimensionError("forward: input " + shape_str(x.shape()) + " vs network input dim " +
                         std::to_string(net.input_dim));
  }
  if (!x.all_finite()) throw NumericError("forward: non-finite input");
  const std::size_t n = x.rows();

  bool has_bn = false;
  for (const auto& s : net.stages)
    for (const auto& l : s.layers) has_bn |= l.kind == LayerKind::batch_norm;

  ForwardResult res;
  res.cache.net = net;
  res.cache.training = opt.training;
  res.cache.batch = n;
  if (opt.training && has_bn) {
    if (n < 2) throw DimensionError("batch too small: training-mode BN needs at least 2 samples");
    res.cache.groups = detail::bn_groups(n, opt, rng);
  }

  Tensor h = x;
  for (const auto& s : net.stages) {
    auto& stage_cache = res.cache.layers.emplace_back();
    for (std::size_t i = 0; i < s.layers.size(); ++i) {
      const auto& l = s.layers[i];
      const std::string pre = layer_prefix(s, i);
      LayerCache lc;
      switch (l.kind) {
        case LayerKind::linear: {
          const Tensor* b = l.bias ? &p.params.at(pre + ".bias") : nullptr;
          Tensor y = detail::linear_forward(h, p.params.at(pre + ".weight"), b);
          lc.input = std::move(h);
          h = std::move(y);
          break;
        }
        case LayerKind::batch_norm: {
          const std::size_t d = l.out_dim;
          Tensor xhat(h.shape());
          if (opt.training) {
            for (const auto& grp : res.cache.groups) {
              std::vector<double> mean(d, 0.0), var(d, 0.0), inv(d);
              const double m = static_cast<double>(grp.size());
              for (auto r : grp)
                for (std::size_t j = 0; j < d; ++j) mean[j] += h(r, j);
              for (auto& v : mean) v /= m;
              for (auto r : grp)
                for (std::size_t j = 0; j < d; ++j) {
                  const double c = h(r, j) - mean[j];
                  var[j] += c * c;
                }
              for (std::size_t j = 0; j < d; ++j) {
                var[j] /= m;
                inv[j] = 1.0 / std::sqrt(var[j] + kBnEpsilon);
              }
              for (auto r : grp)
                for (std::size_t j = 0; j < d; ++j) xhat(r, j) = (h(r, j) - mean[j]) * inv[j];
              lc.inv_std.push_back(std::move(inv));
              lc.batch_mean.push_back(std::move(mean));
              lc.batch_var.push_back(std::move(var));
            }
          } else {
            const Tensor& rm = p.buffers.at(pre + ".running_mean");
            const Tensor& rv = p.buffers.at(pre + ".running_var");
            for (std::size_t r = 0; r < n; ++r)
              for (std::size_t j = 0; j < d; ++j)
                xhat(r, j) = (h(r, j) - rm[j]) / std::sqrt(rv[j] + kBnEpsilon);
          }
          Tensor y = xhat;
          if (l.bn_affine) {
            const Tensor& g = p.params.at(pre + ".gain");
            const Tensor& b = p.params.at(pre + ".bias");
            for (std::size_t r = 0; r < n; ++r)
              for (std::size_t j = 0; j < d; ++j) y(r, j) = g[j] * xhat(r, j) + b[j];
          }
          lc.xhat = std::move(xhat);
          h = std::move(y);
          break;
        }
        case LayerKind::relu: {
          Tensor y = h;
          for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
          lc.input = std::move(h);
          h = std::move(y);
          break;
        }
      }
      if (!h.all_finite()) throw NumericError("numeric overflow in layer " + pre);
      if (opt.training) stage_cache.push_back(std::move(lc));
    }
    res.stage_outputs.push_back(h);
  }
  if (!opt.training) res.cache.layers.clear();
  res.output = std::move(h);
  return res;
}

// Folds the batch statistics of a training-mode forward into the running
// estimates (momentum kBnMomentum, unbiased variance, averaged over groups).
inline void commit_running_stats(const ForwardCache& cache, EncoderParams& p) {
  if (!cache.training) return;
  for (std::size_t si = 0; si < cache.net.stages.size(); ++si) {
    const auto& s = cache.net.stages[si];
    for (std::size_t i = 0; i < s.layers.size(); ++i) {
      if (s.layers[i].kind != LayerKind::batch_norm) continue;
      const auto& lc = cache.layers[si][i];
      const std::string pre = layer_prefix(s, i);
      Tensor& rm = p.buffers.at(pre + ".running_mean");
      Tensor& rv = p.buffers.at(pre + ".running_var");
      const double ng = static_cast<double>(lc.batch_mean.size());
      for (std::size_t j = 0; j < rm.size(); ++j) {
        double mean = 0.0, var = 0.0;
        for (std::size_t g = 0; g < lc.batch_mean.size(); ++g) {
          const double m = static_cast<double>(cache.groups[g].size());
          mean += lc.batch_mean[g][j];
          var += lc.batch_var[g][j] * m / (m - 1.0);
        }
        rm[j] = kBnMomentum * rm[j] + (1.0 - kBnMomentum) * mean / ng;
        rv[j] = kBnMomentum * rv[j] + (1.0 - kBnMomentum) * var / ng;
      }
    }
  }
}

struct BackwardResult {
  ParamSet param_grads;  // same names/roles as the params used in forward
  Tensor grad_in;
};

// With input_grad = false the gradient w.r.t. the network input is skipped
// and grad_in is left empty.
inline BackwardResult backward(const ForwardCache& cache, const EncoderParams& p,
                               const Tensor& grad_out, bool input_grad = true) {
  if (!cache.training) throw ConfigError("backward requires a training-mode forward cache");
  grad_out.require_rank(2);
  if (grad_out.rows() != cache.batch || grad_out.cols() != cache.net.output_dim()) {
    throw DimensionError("backward: grad_out " + shape_str(grad_out.shape()) +
                         " does not match forward output [" + std::to_string(cache.batch) + "x" +
                         std::to_string(cache.net.output_dim()) + "]");
  }
  BackwardResult res;
  // Gradients for every parameter of the stages that ran, in params order.
  for (const auto& e : p.params) {
    for (const auto& s : cache.net.stages) {
      if (e.name.starts_with(s.name + ".")) {
        res.param_grads.add(e.name, e.role, Tensor(e.value.shape()));
        break;
      }
    }
  }

  Tensor g = grad_out;
  const std::size_t n = cache.batch;
  for (std::size_t si = cache.net.stages.size(); si-- > 0;) {
    const auto& s = cache.net.stages[si];
    for (std::size_t i = s.layers.size(); i-- > 0;) {
      const auto& l = s.layers[i];
      const auto& lc = cache.layers[si][i];
      const std::string pre = layer_prefix(s, i);
      switch (l.kind) {
        case LayerKind::linear: {
          res.param_grads.at(pre + ".weight") += matmul(transpose(g), lc.input);
          if (l.bias) {
            Tensor& gb = res.param_grads.at(pre + ".bias");
            for (std::size_t r = 0; r < n; ++r)
              for (std::size_t j = 0; j < l.out_dim; ++j) gb[j] += g(r, j);
          }
          if (si == 0 && i == 0 && !input_grad) return res;
          g = matmul(g, p.params.at(pre + ".weight"));
          break;
        }
        case LayerKind::batch_norm: {
          const std::size_t d = l.out_dim;
          Tensor dxhat = g;
          if (l.bn_affine) {
            const Tensor& gain = p.params.at(pre + ".gain");
            Tensor& ggain = res.param_grads.at(pre + ".gain");
            Tensor& gbias = res.param_grads.at(pre + ".bias");
            for (std::size_t r = 0; r < n; ++r)
              for (std::size_t j = 0; j < d; ++j) {
                ggain[j] += g(r, j) * lc.xhat(r, j);
                gbias[j] += g(r, j);
                dxhat(r, j) = g(r, j) * gain[j];
              }
          }
          Tensor dx(g.shape());
          for (std::size_t gi = 0; gi < cache.groups.size(); ++gi) {
            const auto& grp = cache.groups[gi];
            const double m = static_cast<double>(grp.size());
            std::vector<double> sum_d(d, 0.0), sum_dx(d, 0.0);
            for (auto r : grp)
              for (std::size_t j = 0; j < d; ++j) {
                sum_d[j] += dxhat(r, j);
                sum_dx[j] += dxhat(r, j) * lc.xhat(r, j);
              }
            for (auto r : grp)
              for (std::size_t j = 0; j < d; ++j)
                dx(r, j) = lc.inv_std[gi][j] / m *
                           (m * dxhat(r, j) - sum_d[j] - lc.xhat(r, j) * sum_dx[j]);
          }
          g = std::move(dx);
          break;
        }
        case LayerKind::relu: {
          for (std::size_t k = 0; k < g.size(); ++k)
            if (!(lc.input[k] > 0.0)) g[k] = 0.0;
          break;
        }
      }
    }
  }
  res.grad_in = std::move(g);
  return res;
}

}  // namespace airl
