#include <airl/runner/studies.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace airl;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("write failed: " + path.string());
}

int cmd_pretrain(const std::string& cfg_path, const std::vector<std::string>& overrides,
                 const std::string& out, bool verbose) {
  ExperimentConfig cfg = load_config(cfg_path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }
  cfg.validate();
  const fs::path dir = out.empty() ? output_root() / cfg.run.name : fs::path(out);
  fs::create_directories(dir);
  fs::remove(dir / "metrics.csv");
  write_text(dir / "config.txt", to_text(cfg));
  std::cerr << "pretrain " << cfg.run.name << ": " << cfg.total_steps() << " steps -> " << dir.string()
            << "\n";
  const TrainingRun run = pretrain(cfg, {dir, verbose});
  if (!run.metrics.empty()) std::cout << "final: " << format_row(run.metrics.back()) << "\n";
  std::cout << "checkpoint: " << (dir / "final.airl").string() << "\n";
  return 0;
}

int cmd_eval_linear(const std::string& ckpt_path, const std::string& data_spec, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const ExperimentConfig cfg = checkpoint_config(ckpt);
  const SyntheticSpec spec = data_spec.empty() ? cfg.data : SyntheticSpec::parse(data_spec);
  const Encoder enc = student_encoder(ckpt);
  const Dataset data = make_synthetic_dataset(spec);
  const ProbeResult r = linear_probe(backbone_network(enc.net), enc.params, data, cfg.probe, enc.input_side);
  Table t{"linear probe", {"metric", "value"}, {}};
  t.rows.push_back({"top1", fixed(r.top1, 6)});
  t.rows.push_back({"train_top1", fixed(r.train_top1, 6)});
  t.rows.push_back({"feature_std", fixed(r.feature_std, 6)});
  std::cout << t.to_text();
  if (!out.empty()) write_text(out, t.to_csv());
  return 0;
}

int cmd_rescale(const std::string& in, const std::string& anchor_path, std::optional<double> factor,
                const std::string& out, bool include_buffers) {
  Checkpoint ckpt = load_checkpoint(in);
  Anchor anchor;
  nlohmann::json note = {{"include_buffers", include_buffers}};
  if (factor) {
    anchor = Anchor::constant(*factor);
    note["factor"] = *factor;
  } else {
    anchor = Anchor::from_params(load_checkpoint(anchor_path).records);
    note["anchor"] = anchor_path;
  }
  const RescaleReport rep = norm_rescale(ckpt.records, anchor, {.include_buffers = include_buffers});
  note["touched"] = rep.touched.size();
  ckpt.meta["norm_rescale"] = note;
  save_checkpoint(ckpt, out);
  std::cout << "rescaled " << rep.touched.size() << " tensors -> " << out << "\n";
  for (const auto& n : rep.unmatched) std::cout << "unmatched (unchanged): " << n << "\n";
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

int cmd_norms(const std::string& in) {
  const Checkpoint ckpt = load_checkpoint(in);
  const ParamSet student = records_with_prefix(ckpt.records, "student.");
  Table t{"parameter norms (student)", {"name", "role", "norm"}, {}};
  for (const auto& e : student) {
    if (e.role == Role::buffer || e.role == Role::state) continue;
    t.rows.push_back({e.name, std::string(role_name(e.role)), fixed(l2_norm(e.value), 6)});
  }
  for (Role r : {Role::weight, Role::norm_gain, Role::norm_bias, Role::bias})
    t.rows.push_back({"sum", std::string(role_name(r)), fixed(summed_norm(student, r), 6)});
  std::cout << t.to_text();
  return 0;
}

int cmd_cka(const std::string& a_path, const std::string& b_path, const std::string& probe_spec) {
  const Encoder a = student_encoder(load_checkpoint(a_path));
  const Encoder b = student_encoder(load_checkpoint(b_path));
  if (a.input_side != b.input_side) throw DimensionError("checkpoints use different input sizes");
  const Dataset data = make_synthetic_dataset(SyntheticSpec::parse(probe_spec));
  const Tensor probe = eval_batch(data.images_of(Split::val), a.input_side);
  const Network na = backbone_network(a.net), nb = backbone_network(b.net);
  EncoderParams pa = a.params, pb = b.params;
  recalibrate_bn(na, pa, probe);
  recalibrate_bn(nb, pb, probe);
  Table t{"linear CKA per stage", {"stage", "cka"}, {}};
  for (const auto& s : stagewise_cka(na, pa, nb, pb, probe)) t.rows.push_back({s.stage, fixed(s.cka, 6)});
  std::cout << t.to_text();
  return 0;
}

int cmd_reproduce(const std::string& study, std::size_t seeds, double epochs_scale) {
  StudyOptions o;
  o.seeds = seeds;
  o.epochs_scale = epochs_scale;
  o.progress = [](const std::string& msg) { std::cerr << msg << "\n"; };
  const Table t = run_study(study, o);
  const fs::path out = output_root() / "reproduce" / (study + ".csv");
  write_text(out, t.to_csv());
  std::cout << t.to_text() << "written: " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"airl: desk-scale self-supervised siamese training toolkit"};
  app.require_subcommand(1);

  std::string cfg_path, out, ckpt, data, input, anchor, output, a, b, probe, study;
  std::vector<std::string> overrides;
  bool verbose = false, include_buffers = false;
  double factor = 1.0;
  std::size_t seeds = 3;
  double epochs_scale = 1.0;
  std::function<int()> action;

  auto* pre = app.add_subcommand("pretrain", "self-supervised pre-training from a config file");
  pre->add_option("-c,--config", cfg_path, "config file")->required()->check(CLI::ExistingFile);
  pre->add_option("--set", overrides, "override a config key (key=value)");
  pre->add_option("--out", out, "output directory (default: $AIRL_OUTPUT_ROOT/<run.name>)");
  pre->add_flag("-v,--verbose", verbose, "print metric rows while training");
  pre->callback([&] { action = [&] { return cmd_pretrain(cfg_path, overrides, out, verbose); }; });

  auto* ev = app.add_subcommand("eval", "evaluation");
  ev->require_subcommand(1);
  auto* lin = ev->add_subcommand("linear", "linear probe on frozen backbone features");
  lin->add_option("--ckpt", ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  lin->add_option("--data", data, "dataset spec, e.g. classes=8,train=64,val=32,seed=0");
  lin->add_option("--out", out, "metrics CSV");
  lin->callback([&] { action = [&] { return cmd_eval_linear(ckpt, data, out); }; });

  auto* sur = app.add_subcommand("surgery", "checkpoint surgery");
  sur->require_subcommand(1);
  auto* res = sur->add_subcommand("rescale", "replace weight norms, keeping directions");
  res->add_option("--input", input, "checkpoint to rescale")->required()->check(CLI::ExistingFile);
  auto* anc = res->add_option("--anchor", anchor, "checkpoint supplying target norms")->check(CLI::ExistingFile);
  auto* fac = res->add_option("--factor", factor, "constant factor applied to every norm");
  anc->excludes(fac);
  res->add_option("--output", output, "rescaled checkpoint")->required();
  res->add_flag("--include-buffers", include_buffers, "also rescale BN running statistics");
  res->callback([&] {
    if (anc->count() == 0 && fac->count() == 0) throw CLI::RequiredError("--anchor or --factor");
    action = [&] {
      return cmd_rescale(input, anchor, fac->count() ? std::optional<double>(factor) : std::nullopt, output,
                         include_buffers);
    };
  });

  auto* an = app.add_subcommand("analyze", "checkpoint analysis");
  an->require_subcommand(1);
  auto* cka = an->add_subcommand("cka", "stage-wise linear CKA between two checkpoints");
  cka->add_option("--a", a, "first checkpoint")->required()->check(CLI::ExistingFile);
  cka->add_option("--b", b, "second checkpoint")->required()->check(CLI::ExistingFile);
  cka->add_option("--probe", probe, "dataset spec whose val split is the probe batch")->required();
  cka->callback([&] { action = [&] { return cmd_cka(a, b, probe); }; });
  auto* nrm = an->add_subcommand("norms", "per-tensor and per-role parameter norms");
  nrm->add_option("--input", input, "checkpoint")->required()->check(CLI::ExistingFile);
  nrm->callback([&] { action = [&] { return cmd_norms(input); }; });

  auto* rep = app.add_subcommand("reproduce", "run a desk-scale study");
  rep->add_option("study", study, "ladder | crossover | aug-ablation | collapse | norm-divergence")->required();
  rep->add_option("--seeds", seeds, "seeds per cell")->check(CLI::PositiveNumber);
  rep->add_option("--epochs-scale", epochs_scale, "multiplies every run's epoch count")
      ->check(CLI::PositiveNumber);
  rep->callback([&] { action = [&] { return cmd_reproduce(study, seeds, epochs_scale); }; });

  CLI11_PARSE(app, argc, argv);
  try {
    return action();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
