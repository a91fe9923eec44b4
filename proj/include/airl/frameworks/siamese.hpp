#pragma once

#include <airl/frameworks/config.hpp>
#include <airl/frameworks/losses.hpp>
#include <airl/frameworks/queue.hpp>
#include <airl/optim/optim.hpp>

#include <cmath>
#include <numbers>
#include <optional>

namespace airl {

inline double momentum_at(std::size_t t, std::size_t T, double m0, MomentumSchedule schedule) {
  if (T == 0) throw ConfigError("momentum_at: total steps must be > 0");
  if (t > T) throw ConfigError("momentum_at: step beyond schedule end");
  if (schedule == MomentumSchedule::constant) return m0;
  const double c = std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(T));
  return 1.0 - (1.0 - m0) * (c + 1.0) / 2.0;
}

struct SiameseState {
  Network student_net;
  Network teacher_net;
  EncoderParams student;
  EncoderParams teacher;
  std::optional<MemoryQueue> queue;  // contrastive kinds only
  std::size_t step = 0;
  std::size_t total_steps = 1;
};

// Student from rng, teacher initialised as a copy of the student's shared stages.
inline SiameseState build_siamese(const FrameworkConfig& cfg, Rng& rng, std::size_t total_steps) {
  cfg.validate();
  SiameseState s;
  s.student_net = student_network(cfg);
  s.teacher_net = teacher_network(cfg);
  s.student = init_params(s.student_net, rng);
  EncoderParams proto = init_params(s.teacher_net, rng);  // names/shapes only
  for (auto& e : proto.params) e.value = s.student.params.at(e.name);
  for (auto& e : proto.buffers) e.value = s.student.buffers.at(e.name);
  s.teacher = std::move(proto);
  if (cfg.contrastive()) s.queue = MemoryQueue(cfg.queue_size, cfg.dims.projector_out);
  s.total_steps = total_steps;
  return s;
}

// teacher <- m * teacher + (1 - m) * student, over the teacher's parameters.
inline void ema_update(EncoderParams& teacher, const EncoderParams& student, double m) {
  for (auto& e : teacher.params) {
    const Tensor& s = student.params.at(e.name);
    for (std::size_t i = 0; i < e.value.size(); ++i) e.value[i] = m * e.value[i] + (1.0 - m) * s[i];
  }
}

struct StepOutput {
  double loss = 0.0;
  ParamSet grads;                   // student parameters only
  std::vector<Tensor> keys;         // normalized target features per direction
  std::vector<ForwardCache> student_caches;
  std::vector<ForwardCache> teacher_caches;
  std::vector<Tensor> student_features;  // normalized predictions per direction
};

namespace detail {

inline void accumulate(ParamSet& into, const ParamSet& g, double scale) {
  for (const auto& e : g) {
    Tensor& t = into.at(e.name);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += scale * e.value[i];
  }
}

}  // namespace detail

// Loss and student gradients for one batch of positive pairs, without
// touching the state. rng drives the teacher's BN shuffle only.
inline StepOutput compute_step(const SiameseState& st, const Tensor& view_a, const Tensor& view_b,
                               const FrameworkConfig& cfg, const Rng& rng) {
  view_a.require_same(view_b, "training_step views");
  if (view_a.rows() < 2) throw DimensionError("training_step: batch size must be >= 2");
  if (cfg.contrastive()) {
    if (!st.queue) throw ConfigError("contrastive framework without memory queue");
    if (st.queue->dim() != cfg.dims.projector_out)
      throw DimensionError("queue dimension does not match projector output");
  }

  StepOutput out;
  out.grads = st.student.params.zeros_like();
  const Tensor negatives = cfg.contrastive() ? st.queue->contents() : Tensor();

  // The target branch always has the teacher's structure; without
  // stop-gradient it runs on the student's weights.
  const Network& target_net = st.teacher_net;
  const EncoderParams& target_params = cfg.stop_gradient ? st.teacher : st.student;

  const int directions = cfg.symmetric_loss ? 2 : 1;
  const double weight = 1.0 / directions;
  for (int dir = 0; dir < directions; ++dir) {
    const Tensor& xs = dir == 0 ? view_a : view_b;
    const Tensor& xt = dir == 0 ? view_b : view_a;

    Rng unused(0, 0);
    ForwardOptions sopt{.training = true, .bn_mode = BnMode::global};
    auto sres = forward(st.student_net, st.student, xs, sopt, unused);
    const Tensor q = l2_normalize_rows(sres.output);

    Rng trng = rng.substream(static_cast<std::uint64_t>(dir));
    ForwardOptions topt{.training = true,
                        .bn_mode = cfg.stop_gradient ? cfg.bn_mode : BnMode::global,
                        .shuffle_groups = cfg.shuffle_groups};
    auto tres = forward(target_net, target_params, xt, topt, trng);
    const Tensor k = l2_normalize_rows(tres.output);

    LossResult lr = cfg.contrastive() ? contrastive_loss(q, k, negatives, cfg.temperature)
                                      : byol_loss(q, k);
    out.loss += weight * lr.loss;

    Tensor gq = l2_normalize_rows_backward(sres.output, q, lr.grad_q);
    auto sb = backward(sres.cache, st.student, gq, false);
    detail::accumulate(out.grads, sb.param_grads, weight);

    if (!cfg.stop_gradient) {
      Tensor gk = l2_normalize_rows_backward(tres.output, k, lr.grad_k);
      auto tb = backward(tres.cache, st.student, gk, false);
      detail::accumulate(out.grads, tb.param_grads, weight);
    }

    out.keys.push_back(k);
    out.student_features.push_back(q);
    out.student_caches.push_back(std::move(sres.cache));
    out.teacher_caches.push_back(std::move(tres.cache));
  }
  if (!std::isfinite(out.loss)) throw NumericError("training_step: non-finite loss");
  return out;
}

struct StepMetrics {
  double loss = 0.0;
  double lr = 0.0;
  double momentum = 0.0;
  std::size_t queue_fill = 0;
  Tensor keys;  // normalized target features of the first direction
};

// One optimisation step: gradients, optimizer update of the student, EMA of
// the teacher, enqueue of this step's keys.
inline StepMetrics training_step(SiameseState& st, const Tensor& view_a, const Tensor& view_b,
                                 const FrameworkConfig& cfg, Optimizer& opt, double lr,
                                 const Rng& rng) {
  StepOutput out = compute_step(st, view_a, view_b, cfg, rng);

  for (const auto& c : out.student_caches) commit_running_stats(c, st.student);
  if (cfg.stop_gradient) {
    for (const auto& c : out.teacher_caches) commit_running_stats(c, st.teacher);
  } else {
    for (const auto& c : out.teacher_caches) commit_running_stats(c, st.student);
  }

  opt.step(st.student.params, out.grads, lr);

  const std::size_t t = std::min(st.step, st.total_steps);
  const double m = momentum_at(t, st.total_steps, cfg.momentum_base, cfg.momentum_schedule);
  ema_update(st.teacher, st.student, m);

  if (cfg.contrastive()) {
    for (const auto& k : out.keys) st.queue->enqueue(k);
  }
  ++st.step;
  return {out.loss, lr, m, st.queue ? st.queue->fill() : 0, std::move(out.keys.front())};
}

}  // namespace airl
