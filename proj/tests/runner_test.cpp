#include <airl/runner/studies.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace airl {
namespace {

namespace fs = std::filesystem;

constexpr const char* kTinyConfig = R"(
# tiny run used across the runner tests
framework.kind = moco_v2_plus
framework.queue_size = 16
framework.backbone = 16,8
framework.projector_hidden = 8
framework.projector_out = 4
data.classes = 4
data.train_per_class = 8
data.val_per_class = 4
data.side = 8
augment.out_side = 8
run.batch = 8
run.epochs = 3
run.log_every = 1
probe.epochs = 5
)";

// Tiny config with `key = value` lines applied on top.
ExperimentConfig tiny(const std::string& overrides = "") {
  ExperimentConfig c = parse_config(kTinyConfig, "tiny");
  std::istringstream in(overrides);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) set_config_value(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  c.validate();
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("airl_runner_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- config

TEST(Config, OverridesApplyAfterPreset) {
  const ExperimentConfig c = tiny("framework.symmetric_loss = false\n");
  EXPECT_EQ(c.framework.kind, FrameworkKind::moco_v2_plus);
  EXPECT_FALSE(c.framework.symmetric_loss);
  EXPECT_EQ(c.framework.queue_size, 16u);
  EXPECT_EQ(c.framework.dims.backbone, (std::vector<std::size_t>{16, 8}));
  EXPECT_EQ(c.framework_resolved().dims.input_dim, 8u * 8 * 3);
  EXPECT_EQ(c.steps_per_epoch(), 4u);
  EXPECT_EQ(c.total_steps(), 12u);
}

TEST(Config, KindLineOrderDoesNotMatter) {
  const ExperimentConfig a = parse_config("framework.temperature = 0.5\nframework.kind = moco_v2\n");
  EXPECT_EQ(a.framework.kind, FrameworkKind::moco_v2);
  EXPECT_EQ(a.framework.temperature, 0.5);
  EXPECT_EQ(a.framework.bn_mode, BnMode::shuffled);
}

TEST(Config, ErrorsNameOriginAndLine) {
  try {
    parse_config("run.epochs = 2\nrun.epoch = 3\n", "cfg.txt");
    FAIL() << "unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("cfg.txt:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_config("run.epochs = 2\nrun.epochs = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("run.epochs 2\n"), ConfigError);
  EXPECT_THROW(parse_config("run.epochs = two\n"), ConfigError);
  EXPECT_THROW(parse_config("framework.temperature = -1\nframework.kind = moco_v2\n"), ConfigError);
  EXPECT_THROW(parse_config("optimizer.kind = adam\n"), ConfigError);
  EXPECT_THROW(parse_config("augment.steps = crop,sharpen\n"), ConfigError);
  EXPECT_THROW(parse_config("run.batch = 1\n"), ConfigError);
}

TEST(Config, CanonicalTextRoundTrips) {
  ExperimentConfig c = tiny("optimizer.kind = lars\noptimizer.lr = 0.1\nschedule.milestones = 0.3,0.7\n");
  const std::string text = to_text(c);
  const ExperimentConfig back = parse_config(text, "canonical");
  EXPECT_EQ(to_text(back), text);
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16u);
  c.optimizer.lr = 0.1000000000000001;
  EXPECT_NE(config_hash(c), config_hash(back));
}

TEST(Config, Fnv1aReferenceValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

// ---------------------------------------------------------------- checkpoint

Checkpoint sample_checkpoint() {
  Checkpoint c;
  c.meta = {{"step", 3}, {"note", "x"}};
  Rng rng(4, 0);
  Tensor w({3, 2}), g({2});
  for (double& v : w.values()) v = rng.normal();
  g[0] = 1.0 / 3.0;
  g[1] = -0.0;
  c.records.add("a.weight", Role::weight, w);
  c.records.add("a.gain", Role::norm_gain, g);
  c.records.add("scalar", Role::state, Tensor::vector({std::numeric_limits<double>::denorm_min()}));
  return c;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const Checkpoint c = sample_checkpoint();
  const std::string bytes = encode_checkpoint(c);
  const Checkpoint back = decode_checkpoint(bytes);
  EXPECT_EQ(back, c);
  EXPECT_EQ(encode_checkpoint(back), bytes);
  EXPECT_TRUE(std::signbit(back.records.at("a.gain")[1]));

  const fs::path dir = scratch("ckpt");
  save_checkpoint(c, dir / "c.airl");
  EXPECT_EQ(slurp(dir / "c.airl"), bytes);
  EXPECT_EQ(load_checkpoint(dir / "c.airl"), c);
}

TEST(Checkpoint, RejectsCorruptInput) {
  const std::string bytes = encode_checkpoint(sample_checkpoint());
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  bad = bytes;
  bad[4] = 9;
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, 6)), FormatError);
  EXPECT_THROW(load_checkpoint("/nonexistent/c.airl"), Error);
}

// ---------------------------------------------------------------- metrics

TEST(Metrics, CsvRoundTrip) {
  const fs::path dir = scratch("metrics");
  const MetricRow a{0, 5.25, 0.1 / 3.0, 0.99, 16, 0.125, 3.75};
  const MetricRow b{7, 1e-300, 0.0, 1.0, 0, 0.0, 1.0};
  {
    MetricsWriter w(dir / "m.csv");
    w.append(a);
  }
  {
    MetricsWriter w(dir / "m.csv");
    w.append(b);
  }
  const std::string text = slurp(dir / "m.csv");
  EXPECT_EQ(text.rfind(kMetricsHeader, 0), 0u);
  EXPECT_EQ(text.find(kMetricsHeader, 1), std::string::npos);
  EXPECT_EQ(read_metrics(dir / "m.csv"), (std::vector<MetricRow>{a, b}));
  EXPECT_EQ(parse_row(format_row(a)), a);
  EXPECT_THROW(parse_row("1,2,3"), FormatError);
}

// ---------------------------------------------------------------- training runs

TEST(Experiment, ZeroEpochCheckpointEqualsInitialisation) {
  const ExperimentConfig c = tiny("run.epochs = 0\n");
  const TrainingRun init = init_run(c);
  const TrainingRun run = pretrain(c);
  EXPECT_EQ(run.state.student.params, init.state.student.params);
  EXPECT_EQ(run.state.teacher.params, init.state.teacher.params);
  EXPECT_EQ(run.state.teacher.params.at("backbone.0.0.weight"),
            run.state.student.params.at("backbone.0.0.weight"));
  EXPECT_TRUE(run.metrics.empty());
}

TEST(Experiment, SameSeedIsBitIdentical) {
  const ExperimentConfig c = tiny();
  const std::string a = encode_checkpoint(make_checkpoint(pretrain(c)));
  const std::string b = encode_checkpoint(make_checkpoint(pretrain(c)));
  EXPECT_EQ(a, b);
  const std::string other = encode_checkpoint(make_checkpoint(pretrain(tiny("run.seed = 1\n"))));
  EXPECT_NE(a, other);
}

TEST(Experiment, CheckpointRestoresFullState) {
  const TrainingRun run = pretrain(tiny());
  const Checkpoint ckpt = decode_checkpoint(encode_checkpoint(make_checkpoint(run)));
  const TrainingRun back = restore_run(ckpt);
  EXPECT_EQ(to_text(back.config), to_text(run.config));
  EXPECT_EQ(back.state.student.params, run.state.student.params);
  EXPECT_EQ(back.state.student.buffers, run.state.student.buffers);
  EXPECT_EQ(back.state.teacher.params, run.state.teacher.params);
  EXPECT_EQ(back.state.teacher.buffers, run.state.teacher.buffers);
  ASSERT_TRUE(back.state.queue && run.state.queue);
  EXPECT_EQ(*back.state.queue, *run.state.queue);
  EXPECT_EQ(back.optimizer.state.velocity, run.optimizer.state.velocity);
  EXPECT_EQ(back.state.step, run.state.step);

  Checkpoint tampered = ckpt;
  tampered.meta["config_hash"] = "0000000000000000";
  EXPECT_THROW(restore_run(tampered), FormatError);
}

TEST(Experiment, QueueFillsToCapacityAndStays) {
  // Symmetric loss enqueues 2 x 8 keys per step into a 40-slot queue.
  const TrainingRun run = pretrain(tiny("framework.queue_size = 40\n"));
  ASSERT_EQ(run.metrics.size(), 12u);
  std::size_t prev = 0;
  for (const auto& m : run.metrics) {
    EXPECT_EQ(m.queue_fill, std::min<std::size_t>(40, 16 * (m.step + 1)));
    EXPECT_GE(m.queue_fill, prev);
    prev = m.queue_fill;
  }
  EXPECT_EQ(run.metrics.back().queue_fill, 40u);
}

TEST(Experiment, MomentumFollowsScheduleInMetrics) {
  const TrainingRun run = pretrain(tiny());
  const std::size_t T = run.config.total_steps();
  for (const auto& m : run.metrics)
    EXPECT_EQ(m.momentum_m, momentum_at(m.step, T, 0.99, MomentumSchedule::cosine_ascend));
  EXPECT_EQ(run.metrics.front().momentum_m, 0.99);
}

TEST(Experiment, WritesArtifacts) {
  const fs::path dir = scratch("artifacts");
  const ExperimentConfig c = tiny("run.checkpoint_every = 1\n");
  const TrainingRun run = pretrain(c, {dir, false});
  for (const char* f : {"final.airl", "epoch_1.airl", "epoch_3.airl", "metrics.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(read_metrics(dir / "metrics.csv"), run.metrics);
  EXPECT_EQ(load_checkpoint(dir / "final.airl"), make_checkpoint(run));
}

TEST(Experiment, ProbeOfRestoredCheckpointMatches) {
  const TrainingRun run = pretrain(tiny());
  const Dataset data = run_dataset(run.config);
  const Encoder enc = student_encoder(make_checkpoint(run));
  const double direct = probe_run(run, data).top1;
  const double via = linear_probe(backbone_network(enc.net), enc.params, data, run.config.probe,
                                  enc.input_side).top1;
  EXPECT_EQ(direct, via);
}

TEST(Experiment, OutputRootFollowsEnvironment) {
  const char* old = std::getenv("AIRL_OUTPUT_ROOT");
  const std::string saved = old ? old : "";
  setenv("AIRL_OUTPUT_ROOT", "/tmp/airl-root-test", 1);
  EXPECT_EQ(output_root(), fs::path("/tmp/airl-root-test"));
  unsetenv("AIRL_OUTPUT_ROOT");
  EXPECT_EQ(output_root(), fs::path("airl_runs"));
  if (old) setenv("AIRL_OUTPUT_ROOT", saved.c_str(), 1);
}

// ---------------------------------------------------------------- studies

TEST(Studies, UnknownStudyListsAvailable) {
  try {
    run_study("nope", {});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("norm-divergence"), std::string::npos);
  }
}

TEST(Studies, LadderRowsAddOneChangeEach) {
  const auto rows = ladder_rows();
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].config.framework.bn_mode, BnMode::shuffled);
  EXPECT_EQ(rows[1].config.framework.bn_mode, BnMode::global);
  EXPECT_EQ(rows[2].config.framework.predictor, PredictorPlacement::student_only);
  EXPECT_EQ(rows[3].config.framework.momentum_schedule, MomentumSchedule::cosine_ascend);
  EXPECT_TRUE(rows[4].config.framework.symmetric_loss);
  EXPECT_FALSE(rows[4].config.augment.pipeline().contains(AugKind::solarize));
  EXPECT_TRUE(rows[5].config.augment.pipeline().contains(AugKind::solarize));
}

TEST(Studies, TableCsv) {
  const Table t{"t", {"a", "b"}, {{"1", "2"}, {"3", "4"}}};
  EXPECT_EQ(t.to_csv(), "a,b\n1,2\n3,4\n");
}

// ---------------------------------------------------------------- CLI

int run_cli(const std::string& args, const fs::path& root, const fs::path& log) {
  const std::string cmd = "AIRL_OUTPUT_ROOT='" + root.string() + "' '" AIRL_CLI_PATH "' " + args + " > '" +
                          log.string() + "' 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

TEST(Cli, EndToEnd) {
  const fs::path root = scratch("cli");
  const fs::path log = root / "log.txt";
  {
    std::ofstream f(root / "tiny.cfg");
    f << kTinyConfig << "run.name = cli\n";
  }
  ASSERT_EQ(run_cli("pretrain -c '" + (root / "tiny.cfg").string() + "'", root, log), 0) << slurp(log);
  const fs::path ckpt = root / "cli" / "final.airl";
  ASSERT_TRUE(fs::exists(ckpt));
  EXPECT_TRUE(fs::exists(root / "cli" / "metrics.csv"));
  EXPECT_EQ(parse_config(slurp(root / "cli" / "config.txt")).run.name, "cli");

  // The CLI run is the library run.
  ExperimentConfig c = tiny("run.name = cli\n");
  EXPECT_EQ(load_checkpoint(ckpt), make_checkpoint(pretrain(c)));

  ASSERT_EQ(run_cli("eval linear --ckpt '" + ckpt.string() + "' --out '" + (root / "probe.csv").string() +
                        "'",
                    root, log),
            0)
      << slurp(log);
  EXPECT_EQ(slurp(root / "probe.csv").rfind("metric,value\ntop1,", 0), 0u);

  const fs::path half = root / "half.airl";
  ASSERT_EQ(run_cli("surgery rescale --input '" + ckpt.string() + "' --factor 0.5 --output '" +
                        half.string() + "'",
                    root, log),
            0)
      << slurp(log);
  const fs::path back = root / "back.airl";
  ASSERT_EQ(run_cli("surgery rescale --input '" + half.string() + "' --anchor '" + ckpt.string() +
                        "' --output '" + back.string() + "'",
                    root, log),
            0)
      << slurp(log);
  const Checkpoint orig = load_checkpoint(ckpt), halved = load_checkpoint(half), restored = load_checkpoint(back);
  for (const auto& e : orig.records) {
    if (e.role == Role::weight || e.role == Role::norm_gain) {
      EXPECT_NEAR(l2_norm(halved.records.at(e.name)), 0.5 * l2_norm(e.value), 1e-12 * l2_norm(e.value));
      EXPECT_NEAR(l2_norm(restored.records.at(e.name)), l2_norm(e.value), 1e-9 * l2_norm(e.value));
    } else if (e.role == Role::buffer || e.role == Role::state) {
      EXPECT_EQ(halved.records.at(e.name), e.value) << e.name;
    }
  }
  EXPECT_EQ(halved.meta["norm_rescale"]["factor"], 0.5);

  ASSERT_EQ(run_cli("analyze norms --input '" + ckpt.string() + "'", root, log), 0);
  EXPECT_NE(slurp(log).find("norm_gain"), std::string::npos);
  ASSERT_EQ(run_cli("analyze cka --a '" + ckpt.string() + "' --b '" + half.string() +
                        "' --probe classes=4,train=4,val=8,side=8",
                    root, log),
            0)
      << slurp(log);
  EXPECT_NE(slurp(log).find("backbone.1  1.000000"), std::string::npos) << slurp(log);
}

TEST(Cli, FailuresExitNonZero) {
  const fs::path root = scratch("cli_fail");
  const fs::path log = root / "log.txt";
  EXPECT_NE(run_cli("", root, log), 0);
  EXPECT_NE(run_cli("reproduce nope", root, log), 0);
  EXPECT_NE(slurp(log).find("available"), std::string::npos);
  EXPECT_NE(run_cli("analyze norms --input /nonexistent.airl", root, log), 0);
  {
    std::ofstream f(root / "bad.cfg");
    f << "run.epoch = 3\n";
  }
  EXPECT_NE(run_cli("pretrain -c '" + (root / "bad.cfg").string() + "'", root, log), 0);
  EXPECT_NE(slurp(log).find("bad.cfg:1"), std::string::npos);
  {
    std::ofstream f(root / "junk.airl");
    f << "not a checkpoint";
  }
  EXPECT_NE(run_cli("analyze norms --input '" + (root / "junk.airl").string() + "'", root, log), 0);
  EXPECT_NE(run_cli("surgery rescale --input '" + (root / "junk.airl").string() + "' --output x", root, log), 0);
}

}  // namespace
}  // namespace airl
