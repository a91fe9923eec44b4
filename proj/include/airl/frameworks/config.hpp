#pragma once

#include <airl/encoder/network.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace airl {

enum class FrameworkKind { moco_v2, moco_v2_plus, s_moco_v2_plus, byol };
enum class PredictorPlacement { none, student_only, both };
enum class MomentumSchedule { constant, cosine_ascend };

inline std::string_view kind_name(FrameworkKind k) {
  switch (k) {
    case FrameworkKind::moco_v2: return "moco_v2";
    case FrameworkKind::moco_v2_plus: return "moco_v2_plus";
    case FrameworkKind::s_moco_v2_plus: return "s_moco_v2_plus";
    case FrameworkKind::byol: return "byol";
  }
  return "unknown";
}

inline std::string_view placement_name(PredictorPlacement p) {
  switch (p) {
    case PredictorPlacement::none: return "none";
    case PredictorPlacement::student_only: return "student_only";
    case PredictorPlacement::both: return "both";
  }
  return "unknown";
}

inline std::string_view schedule_name(MomentumSchedule s) {
  return s == MomentumSchedule::constant ? "constant" : "cosine_ascend";
}

inline std::string_view bn_mode_name(BnMode m) {
  return m == BnMode::global ? "global" : "shuffled";
}

// Layer widths of one branch.
struct EncoderDims {
  std::size_t input_dim = 16 * 16 * 3;
  std::vector<std::size_t> backbone{128, 64};
  std::size_t projector_hidden = 64;
  std::size_t projector_out = 32;
};

struct FrameworkConfig {
  FrameworkKind kind = FrameworkKind::byol;
  double temperature = 0.2;
  std::size_t queue_size = 256;
  bool symmetric_loss = true;
  PredictorPlacement predictor = PredictorPlacement::student_only;
  double momentum_base = 0.99;
  MomentumSchedule momentum_schedule = MomentumSchedule::cosine_ascend;
  bool projector_hidden_bn = true;
  BnMode bn_mode = BnMode::global;
  std::size_t shuffle_groups = 2;
  // false: the target branch is computed by the student itself and the loss
  // is differentiated through both branches (collapse ablation).
  bool stop_gradient = true;
  EncoderDims dims;

  bool contrastive() const { return kind != FrameworkKind::byol; }

  static FrameworkConfig preset(FrameworkKind kind) {
    FrameworkConfig c;
    c.kind = kind;
    switch (kind) {
      case FrameworkKind::moco_v2:
        c.predictor = PredictorPlacement::none;
        c.momentum_base = 0.999;
        c.momentum_schedule = MomentumSchedule::constant;
        c.symmetric_loss = false;
        c.bn_mode = BnMode::shuffled;
        c.projector_hidden_bn = false;
        break;
      case FrameworkKind::moco_v2_plus:
        break;
      case FrameworkKind::s_moco_v2_plus:
        c.predictor = PredictorPlacement::both;
        break;
      case FrameworkKind::byol:
        c.queue_size = 0;
        break;
    }
    return c;
  }

  void validate() const {
    if (contrastive() && !(temperature > 0.0))
      throw ConfigError("temperature must be > 0, got " + std::to_string(temperature));
    if (!(momentum_base >= 0.0 && momentum_base <= 1.0))
      throw ConfigError("momentum_base must be in [0, 1]");
    if (dims.input_dim == 0 || dims.backbone.empty() || dims.projector_hidden == 0 ||
        dims.projector_out == 0) {
      throw ConfigError("encoder dimensions must be positive and backbone non-empty");
    }
    for (auto d : dims.backbone)
      if (d == 0) throw ConfigError("backbone widths must be positive");
    if (bn_mode == BnMode::shuffled && shuffle_groups == 0)
      throw ConfigError("shuffle_groups must be >= 1");
  }
};

// One stage per backbone block (linear -> BN -> relu), then projector and
// optional predictor (linear -> [BN] -> relu -> linear).
inline Network student_network(const FrameworkConfig& cfg) {
  const auto& d = cfg.dims;
  Network net{d.input_dim, {}};
  std::size_t in = d.input_dim;
  for (std::size_t b = 0; b < d.backbone.size(); ++b) {
    const std::size_t w = d.backbone[b];
    net.stages.push_back({"backbone." + std::to_string(b),
                          {LayerSpec::linear(in, w, false), LayerSpec::batch_norm(w),
                           LayerSpec::relu(w)}});
    in = w;
  }
  auto head = [&](const std::string& name, std::size_t in_dim) {
    Stage s{name, {}};
    s.layers.push_back(LayerSpec::linear(in_dim, d.projector_hidden, !cfg.projector_hidden_bn));
    if (cfg.projector_hidden_bn) s.layers.push_back(LayerSpec::batch_norm(d.projector_hidden));
    s.layers.push_back(LayerSpec::relu(d.projector_hidden));
    s.layers.push_back(LayerSpec::linear(d.projector_hidden, d.projector_out));
    return s;
  };
  net.stages.push_back(head("projector", in));
  if (cfg.predictor != PredictorPlacement::none)
    net.stages.push_back(head("predictor", d.projector_out));
  return net;
}

inline Network teacher_network(const FrameworkConfig& cfg) {
  Network s = student_network(cfg);
  if (cfg.predictor == PredictorPlacement::both) return s;
  return s.prefix_while([](const std::string& n) { return n != "predictor"; });
}

inline Network backbone_network(const Network& net) {
  return net.prefix_while([](const std::string& n) { return n.starts_with("backbone."); });
}

}  // namespace airl
