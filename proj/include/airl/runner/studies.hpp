#pragma once

#include <airl/runner/experiment.hpp>
#include <airl/surgery/cka.hpp>
#include <airl/surgery/norm_rescale.hpp>

#include <chrono>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace airl {

// Plain result table, printable as aligned text or CSV.
struct Table {
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
      out += "\n";
    };
    line(columns);
    for (const auto& r : rows) line(r);
    return out;
  }

  std::string to_text() const {
    std::vector<std::size_t> w(columns.size());
    for (std::size_t i = 0; i < columns.size(); ++i) w[i] = columns[i].size();
    for (const auto& r : rows)
      for (std::size_t i = 0; i < r.size() && i < w.size(); ++i) w[i] = std::max(w[i], r[i].size());
    std::ostringstream os;
    os << title << "\n";
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i)
        os << (i ? "  " : "") << std::left << std::setw(static_cast<int>(w[i])) << cells[i];
      os << "\n";
    };
    line(columns);
    for (const auto& r : rows) line(r);
    return os.str();
  }
};

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

// ---------------------------------------------------------------- recipes

// Desk-scale recipe shared by the studies: 8-class synthetic shapes, 16x16
// views, a two-block MLP backbone, 10 epochs of 32 steps.
inline ExperimentConfig desk_config(FrameworkKind kind, OptimizerKind opt = OptimizerKind::sgd) {
  ExperimentConfig c;
  set_config_value(c, "framework.kind", std::string(kind_name(kind)));
  c.framework.dims = {16 * 16 * 3, {128, 64}, 64, 32};
  c.framework.queue_size = 256;
  c.data = {.classes = 8, .train_per_class = 256, .val_per_class = 256, .side = 16, .noise = 1.0};
  c.run.epochs = 10;
  c.augment.crop_scale_min = 0.5;  // smaller crops of a 16-pixel image lose the shape
  c.run.batch = 64;
  c.schedule = {LrKind::cosine, 0.1, {0.6, 0.8}, 0.1};
  c.optimizer.kind = opt;
  if (opt == OptimizerKind::sgd) {
    c.optimizer.lr = 0.06;
    c.optimizer.momentum = 0.9;
    c.optimizer.weight_decay = 1e-4;
  } else {
    c.optimizer.lr = 3.2;
    c.optimizer.momentum = 0.9;
    c.optimizer.weight_decay = 1.5e-6;
    c.optimizer.trust = 1e-3;
  }
  return c;
}

// Optimizer studies need many small steps: under LARS the excluded norm
// parameters grow a little on every step, and small batches add gradient noise.
inline ExperimentConfig optimizer_study_config(FrameworkKind kind, OptimizerKind opt) {
  ExperimentConfig c = desk_config(kind, opt);
  c.run.batch = 16;
  c.run.epochs = 40;
  return c;
}

struct RunSummary {
  TrainingRun run;
  double top1 = 0.0;
  CollapseMetrics embedding;
};

using Progress = std::function<void(const std::string&)>;

inline RunSummary train_and_probe(const ExperimentConfig& cfg, const Progress& progress = {}) {
  RunSummary s{pretrain(cfg)};
  const Dataset data = run_dataset(cfg);
  s.top1 = probe_run(s.run, data).top1;
  s.embedding = embedding_metrics(s.run, data);
  if (progress) progress(cfg.run.name + ": top1 " + fixed(s.top1));
  return s;
}

// ---------------------------------------------------------------- ladder

struct LadderRow {
  std::string label;
  std::string diff;  // config change relative to the previous row
  ExperimentConfig config;
};

// MoCo v2 grown one modification at a time into MoCo v2+ with solarization.
inline std::vector<LadderRow> ladder_rows() {
  std::vector<LadderRow> rows;
  ExperimentConfig c = desk_config(FrameworkKind::moco_v2);
  c.augment.steps.pop_back();  // no solarization before the last rung
  auto push = [&](std::string label, std::string diff) {
    c.run.name = "ladder-" + std::to_string(rows.size());
    rows.push_back({std::move(label), std::move(diff), c});
  };
  push("MoCo v2", "baseline (ShufflingBN, no predictor, m=0.999, asymmetric loss)");
  c.framework.bn_mode = BnMode::global;
  c.framework.projector_hidden_bn = true;
  push("+SyncBN", "framework.bn_mode=global, framework.projector_hidden_bn=true");
  c.framework.predictor = PredictorPlacement::student_only;
  push("+predictor", "framework.predictor=student_only");
  c.framework.momentum_base = 0.99;
  c.framework.momentum_schedule = MomentumSchedule::cosine_ascend;
  push("+momentum", "framework.momentum_base=0.99, framework.momentum_schedule=cosine_ascend");
  c.framework.symmetric_loss = true;
  push("+symmetric loss", "framework.symmetric_loss=true");
  c.augment.steps = AugmentSection{}.steps;
  push("+solarization", "augment.steps += solarize");
  return rows;
}

struct StudyOptions {
  std::size_t seeds = 3;
  double epochs_scale = 1.0;  // shortens every run (smoke tests)
  Progress progress;
};

inline ExperimentConfig scaled(ExperimentConfig c, const StudyOptions& o, std::uint64_t seed) {
  c.run.epochs = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(c.run.epochs * o.epochs_scale)));
  c.run.seed = seed;
  return c;
}

struct LadderResult {
  std::vector<LadderRow> rows;
  std::vector<std::vector<double>> top1;  // [row][seed]
  Table table;
};

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline LadderResult study_ladder(const StudyOptions& o) {
  LadderResult r{ladder_rows(), {}, {"ladder: configuration modifications (linear probe top-1)",
                                     {"rung", "config", "diff", "top1_mean", "top1_per_seed"}, {}}};
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    std::vector<double> acc;
    std::string per;
    for (std::size_t s = 0; s < o.seeds; ++s) {
      acc.push_back(train_and_probe(scaled(r.rows[i].config, o, s), o.progress).top1);
      per += (s ? " " : "") + fixed(acc.back());
    }
    r.table.rows.push_back({std::to_string(i), r.rows[i].label, r.rows[i].diff, fixed(mean(acc)), per});
    r.top1.push_back(std::move(acc));
  }
  return r;
}

// ---------------------------------------------------------------- crossover

struct CrossoverCell {
  FrameworkKind framework;
  OptimizerKind optimizer;
  double top1 = 0.0;
  double rescued_top1 = 0.0;  // LARS cells: after NormRescale to the SGD checkpoint
};

struct CrossoverResult {
  std::vector<CrossoverCell> cells;
  Table table;
};

// Rescales every student tensor of `lars` to the norms of `anchor`.
inline TrainingRun rescale_run(const TrainingRun& lars, const TrainingRun& anchor) {
  TrainingRun out = lars;
  norm_rescale(out.state.student.params, Anchor::from_params(anchor.state.student.params));
  return out;
}

inline CrossoverResult study_crossover(const StudyOptions& o) {
  CrossoverResult r;
  r.table = {"crossover: pre-training optimizer x framework (SGD-tuned linear probe, top-1)",
             {"framework", "optimizer", "top1", "normrescale_top1"}, {}};
  for (auto kind : {FrameworkKind::moco_v2_plus, FrameworkKind::byol}) {
    std::vector<double> sgd_acc, lars_acc, rescued;
    for (std::size_t s = 0; s < o.seeds; ++s) {
      ExperimentConfig cs = scaled(optimizer_study_config(kind, OptimizerKind::sgd), o, s);
      ExperimentConfig cl = scaled(optimizer_study_config(kind, OptimizerKind::lars), o, s);
      cs.run.name = std::string(kind_name(kind)) + "-sgd";
      cl.run.name = std::string(kind_name(kind)) + "-lars";
      RunSummary sgd = train_and_probe(cs, o.progress);
      RunSummary lars = train_and_probe(cl, o.progress);
      const Dataset data = run_dataset(cl);
      sgd_acc.push_back(sgd.top1);
      lars_acc.push_back(lars.top1);
      rescued.push_back(probe_run(rescale_run(lars.run, sgd.run), data).top1);
    }
    r.cells.push_back({kind, OptimizerKind::sgd, mean(sgd_acc), 0.0});
    r.cells.push_back({kind, OptimizerKind::lars, mean(lars_acc), mean(rescued)});
    r.table.rows.push_back({std::string(kind_name(kind)), "sgd", fixed(mean(sgd_acc)), "-"});
    r.table.rows.push_back({std::string(kind_name(kind)), "lars", fixed(mean(lars_acc)), fixed(mean(rescued))});
  }
  return r;
}

// ---------------------------------------------------------------- augmentation ablation

inline constexpr std::array<FrameworkKind, 3> kAlignedFrameworks{
    FrameworkKind::moco_v2_plus, FrameworkKind::s_moco_v2_plus, FrameworkKind::byol};

inline std::string rung_label(std::size_t rung) {
  if (rung == 0) return "full";
  std::string s;
  for (std::size_t i = 0; i < rung; ++i) s += "-" + std::string(aug_name(kRemovalOrder[i]));
  return s;
}

struct AblationResult {
  // top1[framework][rung][seed]
  std::vector<std::vector<std::vector<double>>> top1;
  Table table;
};

inline AblationResult study_aug_ablation(const StudyOptions& o, std::size_t rungs = kRemovalOrder.size() + 1) {
  AblationResult r;
  r.table = {"aug-ablation: colour augmentations removed cumulatively (mean top-1 over seeds)",
             {"rung", "removed"}, {}};
  for (auto k : kAlignedFrameworks) r.table.columns.push_back(std::string(kind_name(k)));
  r.top1.assign(kAlignedFrameworks.size(), std::vector<std::vector<double>>(rungs));
  for (std::size_t f = 0; f < kAlignedFrameworks.size(); ++f) {
    for (std::size_t rung = 0; rung < rungs; ++rung) {
      for (std::size_t s = 0; s < o.seeds; ++s) {
        ExperimentConfig c = scaled(desk_config(kAlignedFrameworks[f]), o, s);
        c.augment.rung = rung;
        c.run.name = std::string(kind_name(kAlignedFrameworks[f])) + "-rung" + std::to_string(rung);
        r.top1[f][rung].push_back(train_and_probe(c, o.progress).top1);
      }
    }
  }
  for (std::size_t rung = 0; rung < rungs; ++rung) {
    std::vector<std::string> row{std::to_string(rung), rung_label(rung)};
    for (std::size_t f = 0; f < kAlignedFrameworks.size(); ++f) row.push_back(fixed(mean(r.top1[f][rung])));
    r.table.rows.push_back(std::move(row));
  }
  return r;
}

// ---------------------------------------------------------------- collapse

struct CollapseRow {
  std::string label;
  CollapseMetrics metrics;
  double reference = 0.0;  // isotropic per-dimension std
  std::vector<MetricRow> trajectory;  // logged training metrics (key statistics)
  double train_seconds = 0.0;
};

struct CollapseResult {
  std::vector<CollapseRow> rows;
  Table table;
};

inline std::vector<std::pair<std::string, ExperimentConfig>> collapse_configs() {
  std::vector<std::pair<std::string, ExperimentConfig>> out;
  ExperimentConfig byol = desk_config(FrameworkKind::byol);
  out.emplace_back("byol (predictor, stop-gradient)", byol);
  ExperimentConfig ablated = byol;
  ablated.framework.predictor = PredictorPlacement::none;
  ablated.framework.stop_gradient = false;
  out.emplace_back("byol (no predictor, no stop-gradient)", ablated);
  ExperimentConfig mg = desk_config(FrameworkKind::moco_v2_plus);
  out.emplace_back("moco_v2_plus (global BN)", mg);
  ExperimentConfig ms = mg;
  ms.framework.bn_mode = BnMode::shuffled;
  out.emplace_back("moco_v2_plus (shuffled BN)", ms);
  return out;
}

inline CollapseResult study_collapse(const StudyOptions& o) {
  CollapseResult r;
  r.table = {"collapse: target-projector embedding statistics on clean training images",
             {"config", "per_dim_std_mean", "ratio_to_isotropic", "effective_rank", "top1"}, {}};
  for (auto& [label, cfg] : collapse_configs()) {
    ExperimentConfig c = scaled(cfg, o, 0);
    c.run.name = label;
    const auto t0 = std::chrono::steady_clock::now();
    RunSummary s{pretrain(c)};
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const Dataset data = run_dataset(c);
    s.embedding = embedding_metrics(s.run, data);
    std::string top1 = "collapsed";
    try {
      top1 = fixed(probe_run(s.run, data).top1);
    } catch (const DegenerateError&) {
    }
    const double ref = isotropic_std_reference(c.framework.dims.projector_out);
    r.rows.push_back({label, s.embedding, ref, s.run.metrics, secs});
    r.table.rows.push_back({label, fixed(s.embedding.per_dim_std_mean, 5),
                            fixed(s.embedding.per_dim_std_mean / ref, 4),
                            fixed(s.embedding.effective_rank, 3), top1});
    if (o.progress) o.progress(label + ": std ratio " + fixed(s.embedding.per_dim_std_mean / ref));
  }
  return r;
}

// ---------------------------------------------------------------- norm divergence

struct NormDivergenceResult {
  double sgd_gain_norm = 0.0;
  double lars_gain_norm = 0.0;
  std::vector<std::pair<std::string, double>> sgd_weight_norms, lars_weight_norms;
  std::vector<StageCka> cka_lars_sgd, cka_rescaled_lars;
  Table table;
};

// BYOL trained twice from the same initialisation and data order: SGD with
// weight decay on everything vs LARS without decay on norm parameters.
inline NormDivergenceResult study_norm_divergence(const StudyOptions& o) {
  NormDivergenceResult r;
  ExperimentConfig cs = scaled(optimizer_study_config(FrameworkKind::byol, OptimizerKind::sgd), o, 0);
  ExperimentConfig cl = scaled(optimizer_study_config(FrameworkKind::byol, OptimizerKind::lars), o, 0);
  cs.optimizer.weight_decay = 1e-4;
  cs.run.name = "byol-sgd";
  cl.run.name = "byol-lars";
  TrainingRun sgd = pretrain(cs);
  TrainingRun lars = pretrain(cl);
  r.sgd_gain_norm = summed_norm(sgd.state.student.params, Role::norm_gain);
  r.lars_gain_norm = summed_norm(lars.state.student.params, Role::norm_gain);
  r.sgd_weight_norms = weight_norm_report(sgd.state.student.params);
  r.lars_weight_norms = weight_norm_report(lars.state.student.params);

  const Dataset data = run_dataset(cs);
  EncoderParams sp = sgd.state.student, lp = lars.state.student;
  const Tensor probe = eval_batch(data.images_of(Split::val), cs.augment.out_side);
  const Network bb = backbone_network(sgd.state.student_net);
  recalibrate_bn(bb, sp, probe);
  recalibrate_bn(bb, lp, probe);
  r.cka_lars_sgd = stagewise_cka(bb, lp, bb, sp, probe);
  EncoderParams rp = lp;
  norm_rescale(rp.params, Anchor::from_params(sp.params));
  recalibrate_bn(bb, rp, probe);
  r.cka_rescaled_lars = stagewise_cka(bb, rp, bb, lp, probe);

  r.table = {"norm-divergence: BYOL student, SGD vs LARS from one initialisation",
             {"quantity", "sgd", "lars", "lars/sgd"}, {}};
  r.table.rows.push_back({"sum |norm_gain|", fixed(r.sgd_gain_norm), fixed(r.lars_gain_norm),
                          fixed(r.lars_gain_norm / r.sgd_gain_norm, 3)});
  const double sb = summed_norm(sgd.state.student.params, Role::norm_bias);
  const double lb = summed_norm(lars.state.student.params, Role::norm_bias);
  r.table.rows.push_back({"sum |norm_bias|", fixed(sb), fixed(lb), fixed(lb / sb, 3)});
  for (std::size_t i = 0; i < r.sgd_weight_norms.size(); ++i) {
    const double a = r.sgd_weight_norms[i].second, b = r.lars_weight_norms[i].second;
    r.table.rows.push_back({"|" + r.sgd_weight_norms[i].first + "|", fixed(a), fixed(b), fixed(b / a, 3)});
  }
  for (std::size_t i = 0; i < r.cka_lars_sgd.size(); ++i) {
    r.table.rows.push_back({"cka(lars, sgd) " + r.cka_lars_sgd[i].stage, "-", fixed(r.cka_lars_sgd[i].cka), "-"});
    r.table.rows.push_back({"cka(rescaled, lars) " + r.cka_rescaled_lars[i].stage, "-",
                            fixed(r.cka_rescaled_lars[i].cka), "-"});
  }
  return r;
}

// ---------------------------------------------------------------- registry

inline const std::vector<std::string>& study_names() {
  static const std::vector<std::string> names{"ladder", "crossover", "aug-ablation", "collapse",
                                              "norm-divergence"};
  return names;
}

inline Table run_study(const std::string& name, const StudyOptions& o) {
  if (name == "ladder") return study_ladder(o).table;
  if (name == "crossover") return study_crossover(o).table;
  if (name == "aug-ablation") return study_aug_ablation(o).table;
  if (name == "collapse") return study_collapse(o).table;
  if (name == "norm-divergence") return study_norm_divergence(o).table;
  std::string known;
  for (const auto& n : study_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown study '" + name + "' (available: " + known + ")");
}

}  // namespace airl
