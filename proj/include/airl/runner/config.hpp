#pragma once

#include <airl/augment/augment.hpp>
#include <airl/eval/dataset.hpp>
#include <airl/eval/probe.hpp>
#include <airl/frameworks/config.hpp>
#include <airl/optim/optim.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace airl {

enum class OptimizerKind { sgd, lars };

struct OptimizerSection {
  OptimizerKind kind = OptimizerKind::sgd;
  double lr = 0.06;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  bool nesterov = false;
  double trust = 1e-3;
  double eps = 1e-9;
  std::set<Role> exclude_roles{Role::norm_gain, Role::norm_bias, Role::bias};

  Optimizer make() const {
    if (kind == OptimizerKind::sgd) {
      SgdConfig c{lr, momentum, weight_decay, nesterov};
      validate(c);
      return {c, {}};
    }
    LarsConfig c{lr, momentum, weight_decay, trust, eps, exclude_roles};
    validate(c);
    return {c, {}};
  }
};

struct ScheduleSection {
  LrKind kind = LrKind::cosine;
  double warmup = 0.1;
  std::vector<double> milestones{0.6, 0.8};
  double decay_factor = 0.1;
};

struct AugmentSection {
  // Subset of the standard pipeline, by step name.
  std::vector<AugKind> steps{AugKind::random_resized_crop, AugKind::hflip, AugKind::color_jitter,
                             AugKind::grayscale, AugKind::gaussian_blur, AugKind::solarize};
  std::size_t rung = 0;  // removal-ladder position applied on top of `steps`
  double crop_scale_min = 0.08;
  std::size_t out_side = 16;

  AugPipeline pipeline() const {
    AugPipeline full = AugPipeline::standard(out_side);
    AugPipeline p;
    p.out_side = out_side;
    for (const auto& s : full.steps)
      if (std::find(steps.begin(), steps.end(), s.kind) != steps.end()) p.steps.push_back(s);
    for (auto& s : p.steps)
      if (s.kind == AugKind::random_resized_crop) s.params[0] = crop_scale_min;
    p = removal_ladder(p, rung);
    validate(p);
    return p;
  }
};

struct RunSection {
  std::size_t epochs = 40;
  std::size_t batch = 64;
  std::uint64_t seed = 0;
  std::string name = "run";
  std::size_t checkpoint_every = 0;  // epochs; 0 = final checkpoint only
  std::size_t log_every = 10;        // steps
};

struct ExperimentConfig {
  FrameworkConfig framework = FrameworkConfig::preset(FrameworkKind::byol);
  OptimizerSection optimizer;
  ScheduleSection schedule;
  AugmentSection augment;
  SyntheticSpec data;
  RunSection run;
  ProbeConfig probe;

  // Encoder input follows the augmentation output size.
  FrameworkConfig framework_resolved() const {
    FrameworkConfig f = framework;
    f.dims.input_dim = augment.out_side * augment.out_side * 3;
    return f;
  }

  LrSchedule lr_schedule() const {
    return {schedule.kind, optimizer.lr, schedule.warmup, schedule.milestones, schedule.decay_factor};
  }

  std::size_t steps_per_epoch() const { return data.classes * data.train_per_class / run.batch; }
  std::size_t total_steps() const { return run.epochs * steps_per_epoch(); }

  void validate() const {
    framework_resolved().validate();
    (void)optimizer.make();
    (void)augment.pipeline();
    data.validate();
    probe.validate();
    if (run.batch < 2) throw ConfigError("run.batch must be >= 2");
    if (steps_per_epoch() == 0)
      throw ConfigError("run.batch larger than the training set");
    if (schedule.warmup < 0.0 || schedule.warmup > 1.0)
      throw ConfigError("schedule.warmup must be a fraction in [0, 1]");
  }
};

// ---------------------------------------------------------------------------
// Text format: one `section.key = value` per line, '#' starts a comment.

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& v) {
  double out = 0.0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_uint(const std::string& v) {
  std::uint64_t out = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected true/false, got '" + v + "'");
}

template <class E>
E parse_enum(const std::string& v, std::initializer_list<E> options, std::string_view (*name)(E)) {
  std::string known;
  for (E e : options) {
    if (name(e) == v) return e;
    known += (known.empty() ? "" : ", ") + std::string(name(e));
  }
  throw ConfigError("unknown value '" + v + "' (expected one of: " + known + ")");
}

inline std::string_view optimizer_kind_name(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "lars"; }
inline std::string_view lr_kind_name(LrKind k) { return k == LrKind::cosine ? "cosine" : "step_decay"; }

inline std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_double(v[i]);
  return s;
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define AIRL_NUM(k, member)                                                              \
  Field{k, [](ExperimentConfig& c, const std::string& v) { c.member = parse_double(v); }, \
        [](const ExperimentConfig& c) { return fmt_double(c.member); }}
#define AIRL_UINT(k, member)                                                                      \
  Field{k,                                                                                        \
        [](ExperimentConfig& c, const std::string& v) {                                           \
          c.member = static_cast<decltype(c.member)>(parse_uint(v));                              \
        },                                                                                        \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }}
#define AIRL_BOOL(k, member)                                                             \
  Field{k, [](ExperimentConfig& c, const std::string& v) { c.member = parse_bool(v); }, \
        [](const ExperimentConfig& c) { return std::string(c.member ? "true" : "false"); }}
#define AIRL_ENUM(k, member, name_fn, ...)                                                   \
  Field{k,                                                                                   \
        [](ExperimentConfig& c, const std::string& v) {                                      \
          c.member = parse_enum(v, {__VA_ARGS__}, +[](decltype(c.member) e) { return name_fn(e); }); \
        },                                                                                   \
        [](const ExperimentConfig& c) { return std::string(name_fn(c.member)); }}

// framework.kind comes first: it resets the framework block to the preset.
inline const std::vector<Field>& fields() {
  using FK = FrameworkKind;
  static const std::vector<Field> f = {
      Field{"framework.kind",
            [](ExperimentConfig& c, const std::string& v) {
              const FrameworkKind k = parse_enum(
                  v, {FK::moco_v2, FK::moco_v2_plus, FK::s_moco_v2_plus, FK::byol},
                  +[](FK e) { return kind_name(e); });
              const EncoderDims dims = c.framework.dims;
              c.framework = FrameworkConfig::preset(k);
              c.framework.dims = dims;
            },
            [](const ExperimentConfig& c) { return std::string(kind_name(c.framework.kind)); }},
      AIRL_NUM("framework.temperature", framework.temperature),
      AIRL_UINT("framework.queue_size", framework.queue_size),
      AIRL_BOOL("framework.symmetric_loss", framework.symmetric_loss),
      AIRL_ENUM("framework.predictor", framework.predictor, placement_name, PredictorPlacement::none,
                PredictorPlacement::student_only, PredictorPlacement::both),
      AIRL_NUM("framework.momentum_base", framework.momentum_base),
      AIRL_ENUM("framework.momentum_schedule", framework.momentum_schedule, schedule_name,
                MomentumSchedule::constant, MomentumSchedule::cosine_ascend),
      AIRL_BOOL("framework.projector_hidden_bn", framework.projector_hidden_bn),
      AIRL_ENUM("framework.bn_mode", framework.bn_mode, bn_mode_name, BnMode::global, BnMode::shuffled),
      AIRL_UINT("framework.shuffle_groups", framework.shuffle_groups),
      AIRL_BOOL("framework.stop_gradient", framework.stop_gradient),
      Field{"framework.backbone",
            [](ExperimentConfig& c, const std::string& v) {
              c.framework.dims.backbone.clear();
              for (const auto& s : split_list(v)) c.framework.dims.backbone.push_back(parse_uint(s));
            },
            [](const ExperimentConfig& c) { return join_sizes(c.framework.dims.backbone); }},
      AIRL_UINT("framework.projector_hidden", framework.dims.projector_hidden),
      AIRL_UINT("framework.projector_out", framework.dims.projector_out),

      AIRL_ENUM("optimizer.kind", optimizer.kind, optimizer_kind_name, OptimizerKind::sgd, OptimizerKind::lars),
      AIRL_NUM("optimizer.lr", optimizer.lr),
      AIRL_NUM("optimizer.momentum", optimizer.momentum),
      AIRL_NUM("optimizer.weight_decay", optimizer.weight_decay),
      AIRL_BOOL("optimizer.nesterov", optimizer.nesterov),
      AIRL_NUM("optimizer.trust", optimizer.trust),
      AIRL_NUM("optimizer.eps", optimizer.eps),
      Field{"optimizer.exclude",
            [](ExperimentConfig& c, const std::string& v) {
              c.optimizer.exclude_roles.clear();
              if (v == "none") return;
              for (const auto& s : split_list(v)) {
                Role r;
                if (!role_from_name(s, r)) throw ConfigError("unknown role '" + s + "'");
                c.optimizer.exclude_roles.insert(r);
              }
            },
            [](const ExperimentConfig& c) {
              std::string s;
              for (Role r : c.optimizer.exclude_roles) s += (s.empty() ? "" : ",") + std::string(role_name(r));
              return s.empty() ? std::string("none") : s;
            }},

      AIRL_ENUM("schedule.kind", schedule.kind, lr_kind_name, LrKind::cosine, LrKind::step_decay),
      AIRL_NUM("schedule.warmup", schedule.warmup),
      Field{"schedule.milestones",
            [](ExperimentConfig& c, const std::string& v) {
              c.schedule.milestones.clear();
              for (const auto& s : split_list(v)) c.schedule.milestones.push_back(parse_double(s));
            },
            [](const ExperimentConfig& c) { return join_doubles(c.schedule.milestones); }},
      AIRL_NUM("schedule.decay_factor", schedule.decay_factor),

      Field{"augment.steps",
            [](ExperimentConfig& c, const std::string& v) {
              c.augment.steps.clear();
              for (const auto& s : split_list(v)) {
                AugKind k;
                if (!aug_from_name(s, k)) throw ConfigError("unknown augmentation '" + s + "'");
                c.augment.steps.push_back(k);
              }
            },
            [](const ExperimentConfig& c) {
              std::string s;
              for (auto k : c.augment.steps) s += (s.empty() ? "" : ",") + std::string(aug_name(k));
              return s;
            }},
      AIRL_UINT("augment.rung", augment.rung),
      AIRL_NUM("augment.crop_scale_min", augment.crop_scale_min),
      AIRL_UINT("augment.out_side", augment.out_side),

      AIRL_UINT("data.classes", data.classes),
      AIRL_UINT("data.train_per_class", data.train_per_class),
      AIRL_UINT("data.val_per_class", data.val_per_class),
      AIRL_UINT("data.side", data.side),
      AIRL_NUM("data.noise", data.noise),
      AIRL_UINT("data.seed", data.seed),

      AIRL_UINT("run.epochs", run.epochs),
      AIRL_UINT("run.batch", run.batch),
      AIRL_UINT("run.seed", run.seed),
      Field{"run.name", [](ExperimentConfig& c, const std::string& v) { c.run.name = v; },
            [](const ExperimentConfig& c) { return c.run.name; }},
      AIRL_UINT("run.checkpoint_every", run.checkpoint_every),
      AIRL_UINT("run.log_every", run.log_every),

      AIRL_UINT("probe.epochs", probe.epochs),
      AIRL_UINT("probe.batch", probe.batch),
      AIRL_NUM("probe.lr", probe.lr.base_lr),
      AIRL_ENUM("probe.schedule", probe.lr.kind, lr_kind_name, LrKind::cosine, LrKind::step_decay),
      AIRL_NUM("probe.momentum", probe.momentum),
      AIRL_UINT("probe.seed", probe.seed),
      AIRL_BOOL("probe.recalibrate_bn", probe.recalibrate_bn),
  };
  return f;
}

#undef AIRL_NUM
#undef AIRL_UINT
#undef AIRL_BOOL
#undef AIRL_ENUM

}  // namespace detail

// Applies one `key = value` assignment.
inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  for (const auto& f : detail::fields()) {
    if (f.key == key) {
      f.set(c, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'");
}

inline ExperimentConfig parse_config(std::string_view text, const std::string& origin = "<config>") {
  struct Line {
    std::size_t no;
    std::string key, value;
  };
  std::vector<Line> lines;
  std::istringstream in{std::string(text)};
  std::string raw;
  for (std::size_t no = 1; std::getline(in, raw); ++no) {
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(no) + ": expected 'section.key = value'");
    lines.push_back({no, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1))});
  }
  ExperimentConfig c;
  // The preset must be applied before any framework override.
  std::stable_partition(lines.begin(), lines.end(),
                        [](const Line& l) { return l.key == "framework.kind"; });
  std::set<std::string> seen;
  for (const auto& l : lines) {
    const std::string where = origin + ":" + std::to_string(l.no) + ": ";
    if (!seen.insert(l.key).second) throw ConfigError(where + "duplicate key '" + l.key + "'");
    try {
      set_config_value(c, l.key, l.value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + l.key + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

// Canonical text: every key, fixed order, shortest round-trip numbers.
inline std::string to_text(const ExperimentConfig& c) {
  std::string out;
  for (const auto& f : detail::fields()) out += f.key + " = " + f.get(c) + "\n";
  return out;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_text(c))));
  return buf;
}

}  // namespace airl
