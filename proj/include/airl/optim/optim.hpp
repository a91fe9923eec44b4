#pragma once

#include <airl/encoder/params.hpp>
#include <airl/numerics/ops.hpp>

#include <cmath>
#include <numbers>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace airl {

struct SgdConfig {
  double lr = 0.06;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  bool nesterov = false;
};

struct LarsConfig {
  double lr = 0.06;
  double momentum = 0.9;
  double weight_decay = 1.5e-6;
  double trust = 1e-3;
  double eps = 1e-9;
  // Roles that get neither weight decay nor the trust ratio.
  std::set<Role> exclude_roles{Role::norm_gain, Role::norm_bias, Role::bias};
};

inline void validate(const SgdConfig& c) {
  if (!(c.lr > 0.0)) throw ConfigError("sgd: lr must be > 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("sgd: momentum must be in [0, 1)");
  if (c.weight_decay < 0.0) throw ConfigError("sgd: weight_decay must be >= 0");
}

inline void validate(const LarsConfig& c) {
  if (!(c.lr > 0.0)) throw ConfigError("lars: lr must be > 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("lars: momentum must be in [0, 1)");
  if (c.weight_decay < 0.0) throw ConfigError("lars: weight_decay must be >= 0");
  if (!(c.trust > 0.0)) throw ConfigError("lars: trust coefficient must be > 0");
}

// Momentum buffers, zero-initialised on first use.
struct OptimizerState {
  ParamSet velocity;
};

namespace detail {

inline bool trainable_role(Role r) {
  return r == Role::weight || r == Role::norm_gain || r == Role::norm_bias || r == Role::bias;
}

inline void check_step_inputs(const ParamSet& params, const ParamSet& grads, OptimizerState& st) {
  for (const auto& p : params) {
    if (!trainable_role(p.role)) {
      throw ConfigError("parameter '" + p.name + "' has no trainable role tag (" +
                        std::string(role_name(p.role)) + ")");
    }
    const auto* g = grads.find(p.name);
    if (!g) throw ConfigError("optimizer: no gradient for parameter '" + p.name + "'");
    p.value.require_same(g->value, p.name.c_str());
    if (!g->value.all_finite()) throw NumericError("non-finite gradient in " + p.name);
  }
  if (st.velocity.empty()) st.velocity = params.zeros_like();
  if (st.velocity.size() != params.size())
    throw ConfigError("optimizer state does not match parameter set");
}

}  // namespace detail

// g = grad + wd*w; v = mu*v + g; w -= lr*v  (nesterov: w -= lr*(g + mu*v)).
inline void sgd_step(ParamSet& params, const ParamSet& grads, OptimizerState& st,
                     const SgdConfig& cfg, double lr) {
  detail::check_step_inputs(params, grads, st);
  for (auto& p : params) {
    const Tensor& g = grads.at(p.name);
    Tensor& v = st.velocity.at(p.name);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double gi = g[i] + cfg.weight_decay * p.value[i];
      v[i] = cfg.momentum * v[i] + gi;
      p.value[i] -= lr * (cfg.nesterov ? gi + cfg.momentum * v[i] : v[i]);
    }
  }
}

// Layer-wise trust ratio; excluded roles take a plain momentum step without decay.
inline void lars_step(ParamSet& params, const ParamSet& grads, OptimizerState& st,
                      const LarsConfig& cfg, double lr) {
  detail::check_step_inputs(params, grads, st);
  for (auto& p : params) {
    const Tensor& grad = grads.at(p.name);
    Tensor& v = st.velocity.at(p.name);
    const bool excluded = cfg.exclude_roles.count(p.role) != 0;
    const double wd = excluded ? 0.0 : cfg.weight_decay;
    Tensor g = grad;
    if (wd != 0.0)
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += wd * p.value[i];
    double local = 1.0;
    if (!excluded) {
      const double wn = l2_norm(p.value), gn = l2_norm(g);
      if (wn > 0.0 && gn > 0.0) local = cfg.trust * wn / (gn + cfg.eps);
    }
    const double scale = lr * local;
    for (std::size_t i = 0; i < g.size(); ++i) {
      v[i] = cfg.momentum * v[i] + scale * g[i];
      p.value[i] -= v[i];
    }
  }
}

struct Optimizer {
  std::variant<SgdConfig, LarsConfig> config;
  OptimizerState state;

  double base_lr() const {
    return std::visit([](const auto& c) { return c.lr; }, config);
  }
  bool is_lars() const { return std::holds_alternative<LarsConfig>(config); }

  void step(ParamSet& params, const ParamSet& grads, double lr) {
    if (const auto* s = std::get_if<SgdConfig>(&config)) {
      sgd_step(params, grads, state, *s, lr);
    } else {
      lars_step(params, grads, state, std::get<LarsConfig>(config), lr);
    }
  }
};

enum class LrKind { step_decay, cosine };

// Learning rate as a function of training progress in [0, 1].
struct LrSchedule {
  LrKind kind = LrKind::cosine;
  double base_lr = 0.06;
  double warmup = 0.1;                  // fraction of training spent in linear warm-up
  std::vector<double> milestones{0.6, 0.8};  // step_decay: progress points
  double decay_factor = 0.1;
};

inline double lr_at(double progress, const LrSchedule& s) {
  const double p = std::clamp(progress, 0.0, 1.0);
  if (s.warmup > 0.0 && p < s.warmup) return s.base_lr * p / s.warmup;
  if (s.kind == LrKind::step_decay) {
    double lr = s.base_lr;
    for (double m : s.milestones)
      if (p >= m) lr *= s.decay_factor;
    return lr;
  }
  const double q = s.warmup >= 1.0 ? 1.0 : (p - s.warmup) / (1.0 - s.warmup);
  return s.base_lr * (std::cos(std::numbers::pi * q) + 1.0) / 2.0;
}

// 2-norm of every weight-role tensor, in depth order.
inline std::vector<std::pair<std::string, double>> weight_norm_report(const ParamSet& params) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& p : params)
    if (p.role == Role::weight) out.emplace_back(p.name, l2_norm(p.value));
  return out;
}

// Sum of 2-norms over tensors with the given role.
inline double summed_norm(const ParamSet& params, Role role) {
  double s = 0.0;
  for (const auto& p : params)
    if (p.role == role) s += l2_norm(p.value);
  return s;
}

}  // namespace airl
