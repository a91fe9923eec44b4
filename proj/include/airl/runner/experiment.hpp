#pragma once

#include <airl/eval/collapse.hpp>
#include <airl/eval/probe.hpp>
#include <airl/frameworks/siamese.hpp>
#include <airl/runner/checkpoint.hpp>
#include <airl/runner/config.hpp>
#include <airl/runner/metrics.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace airl {

// Root directory for run outputs; AIRL_OUTPUT_ROOT overrides the default.
inline std::filesystem::path output_root() {
  const char* env = std::getenv("AIRL_OUTPUT_ROOT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("airl_runs");
}

// Independent streams per stochastic consumer, all derived from run.seed.
enum class Stream : std::uint64_t { init = 1, data_order = 2, augment = 3, bn_shuffle = 4 };

inline Rng run_stream(const ExperimentConfig& c, Stream s) {
  return Rng(c.run.seed, static_cast<std::uint64_t>(s));
}

struct TrainingRun {
  ExperimentConfig config;
  SiameseState state;
  Optimizer optimizer;
  std::vector<MetricRow> metrics;
};

// ---------------------------------------------------------------- checkpoints

inline Checkpoint make_checkpoint(const TrainingRun& run) {
  Checkpoint c;
  const auto& st = run.state;
  c.meta = {{"config_hash", config_hash(run.config)},
            {"config", to_text(run.config)},
            {"framework", std::string(kind_name(run.config.framework.kind))},
            {"step", st.step},
            {"total_steps", st.total_steps},
            {"queue_fill", st.queue ? st.queue->fill() : 0},
            {"queue_cursor", st.queue ? st.queue->cursor() : 0}};
  auto add_all = [&](const std::string& prefix, const ParamSet& ps) {
    for (const auto& e : ps) c.records.add(prefix + e.name, e.role, e.value);
  };
  add_all("student.", st.student.params);
  add_all("student.", st.student.buffers);
  add_all("teacher.", st.teacher.params);
  add_all("teacher.", st.teacher.buffers);
  if (st.queue) c.records.add("queue.storage", Role::state, st.queue->storage());
  for (const auto& e : run.optimizer.state.velocity)
    c.records.add("optim." + e.name, Role::state, e.value);
  return c;
}

inline ExperimentConfig checkpoint_config(const Checkpoint& c) {
  if (!c.meta.contains("config") || !c.meta.contains("config_hash"))
    throw FormatError("checkpoint metadata lacks the run configuration");
  ExperimentConfig cfg = parse_config(c.meta["config"].get<std::string>(), "<checkpoint config>");
  if (config_hash(cfg) != c.meta["config_hash"].get<std::string>())
    throw FormatError("checkpoint config hash does not match its stored configuration");
  return cfg;
}

namespace detail {

inline void fill_from(ParamSet& dst, const ParamSet& records, const std::string& prefix) {
  for (auto& e : dst) {
    const NamedTensor* r = records.find(prefix + e.name);
    if (!r) throw FormatError("checkpoint is missing record '" + prefix + e.name + "'");
    if (r->value.shape() != e.value.shape())
      throw FormatError("record '" + prefix + e.name + "' has shape " + shape_str(r->value.shape()) +
                        ", expected " + shape_str(e.value.shape()));
    e.value = r->value;
  }
}

}  // namespace detail

inline TrainingRun restore_run(const Checkpoint& c) {
  TrainingRun run;
  run.config = checkpoint_config(c);
  const FrameworkConfig fcfg = run.config.framework_resolved();
  Rng unused(0, 0);
  run.state = build_siamese(fcfg, unused, c.meta.at("total_steps").get<std::size_t>());
  run.state.step = c.meta.at("step").get<std::size_t>();
  detail::fill_from(run.state.student.params, c.records, "student.");
  detail::fill_from(run.state.student.buffers, c.records, "student.");
  detail::fill_from(run.state.teacher.params, c.records, "teacher.");
  detail::fill_from(run.state.teacher.buffers, c.records, "teacher.");
  if (run.state.queue) {
    const NamedTensor* q = c.records.find("queue.storage");
    if (!q) throw FormatError("checkpoint of a contrastive run has no queue");
    run.state.queue = MemoryQueue::restore(q->value, c.meta.at("queue_fill").get<std::size_t>(),
                                           c.meta.at("queue_cursor").get<std::size_t>());
  }
  run.optimizer = run.config.optimizer.make();
  if (c.records.contains("optim." + run.state.student.params.begin()->name)) {
    run.optimizer.state.velocity = run.state.student.params.zeros_like();
    detail::fill_from(run.optimizer.state.velocity, c.records, "optim.");
  }
  return run;
}

// Student encoder of a checkpoint: network and parameters.
struct Encoder {
  Network net;
  EncoderParams params;
  std::size_t input_side = 16;
};

inline Encoder student_encoder(const Checkpoint& c) {
  TrainingRun run = restore_run(c);
  return {run.state.student_net, run.state.student, run.config.augment.out_side};
}

// ---------------------------------------------------------------- training

inline TrainingRun init_run(const ExperimentConfig& cfg) {
  cfg.validate();
  TrainingRun run;
  run.config = cfg;
  Rng init = run_stream(cfg, Stream::init);
  run.state = build_siamese(cfg.framework_resolved(), init, std::max<std::size_t>(1, cfg.total_steps()));
  run.optimizer = cfg.optimizer.make();
  return run;
}

struct PretrainOptions {
  std::optional<std::filesystem::path> out_dir;  // checkpoints and metrics.csv
  bool verbose = false;
};

// Runs cfg.run.epochs epochs of self-supervised training. Labels are never read.
inline TrainingRun pretrain(const ExperimentConfig& cfg, const PretrainOptions& opt = {}) {
  TrainingRun run = init_run(cfg);
  const FrameworkConfig fcfg = cfg.framework_resolved();
  const AugPipeline pipeline = cfg.augment.pipeline();
  const Dataset data = make_synthetic_dataset(cfg.data);
  const auto train_idx = data.indices(Split::train);
  const std::size_t n = train_idx.size(), B = cfg.run.batch;
  const std::size_t per_epoch = cfg.steps_per_epoch();
  const std::size_t total = cfg.total_steps();
  const LrSchedule schedule = cfg.lr_schedule();
  const Rng order_rng = run_stream(cfg, Stream::data_order);
  const Rng aug_rng = run_stream(cfg, Stream::augment);
  const Rng bn_rng = run_stream(cfg, Stream::bn_shuffle);

  std::optional<MetricsWriter> csv;
  if (opt.out_dir) csv.emplace(*opt.out_dir / "metrics.csv");
  auto save = [&](const std::string& file) {
    if (opt.out_dir) save_checkpoint(make_checkpoint(run), *opt.out_dir / file);
  };

  std::vector<Image> va(B), vb(B);
  for (std::size_t epoch = 0; epoch < cfg.run.epochs; ++epoch) {
    const auto perm = order_rng.substream(epoch).permutation(n);
    const Rng epoch_aug = aug_rng.substream(epoch);
    for (std::size_t s = 0; s < per_epoch; ++s) {
      for (std::size_t i = 0; i < B; ++i) {
        const std::size_t idx = train_idx[perm[s * B + i]];
        std::tie(va[i], vb[i]) = two_views(data.images[idx], pipeline, epoch_aug, idx);
      }
      const std::size_t step = run.state.step;
      const double lr = lr_at(static_cast<double>(step) / static_cast<double>(total), schedule);
      StepMetrics m;
      try {
        m = training_step(run.state, network_input(va), network_input(vb), fcfg, run.optimizer,
                          lr, bn_rng.substream(step));
      } catch (const NumericError& e) {
        save("diagnostic.airl");
        throw NumericError("step " + std::to_string(step) + ": " + e.what());
      }
      if (!std::isfinite(m.loss)) {
        save("diagnostic.airl");
        throw NumericError("step " + std::to_string(step) + ": non-finite loss");
      }
      const bool last = run.state.step == total;
      if (cfg.run.log_every && (step % cfg.run.log_every == 0 || last)) {
        const CollapseMetrics cm = collapse_metrics(m.keys);
        MetricRow row{step, m.loss, m.lr, m.momentum, m.queue_fill, cm.per_dim_std_mean,
                      cm.effective_rank};
        run.metrics.push_back(row);
        if (csv) csv->append(row);
        if (opt.verbose) std::cerr << format_row(row) << "\n";
      }
    }
    if (cfg.run.checkpoint_every && (epoch + 1) % cfg.run.checkpoint_every == 0)
      save("epoch_" + std::to_string(epoch + 1) + ".airl");
  }
  save("final.airl");
  return run;
}

// ---------------------------------------------------------------- evaluation

inline Dataset run_dataset(const ExperimentConfig& cfg) { return make_synthetic_dataset(cfg.data); }

// Linear probe on the student's backbone output.
inline ProbeResult probe_run(const TrainingRun& run, const Dataset& data) {
  return linear_probe(backbone_network(run.state.student_net), run.state.student, data,
                      run.config.probe, run.config.augment.out_side);
}

// Collapse statistics of the target branch's projector output on clean
// training images (eval-mode BN).
inline CollapseMetrics embedding_metrics(const TrainingRun& run, const Dataset& data) {
  const auto& cfg = run.config.framework;
  const Network net = run.state.teacher_net.prefix_while(
      [](const std::string& s) { return s != "predictor"; });
  const EncoderParams& p = cfg.stop_gradient ? run.state.teacher : run.state.student;
  const Tensor x = eval_batch(data.images_of(Split::train), run.config.augment.out_side);
  return collapse_metrics(extract_features(net, p, x));
}

}  // namespace airl
