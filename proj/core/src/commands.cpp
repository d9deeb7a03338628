#include "sifr/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "json.hpp"
#include "sifr/data.hpp"
#include "sifr/errors.hpp"
#include "sifr/pipeline.hpp"

namespace sifr {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kGradTol = 1e-4;  // gradcheck pass threshold
constexpr double kGradEps = 1e-6;  // central-difference step

json config_echo(const RunConfig& cfg) { return json::parse(config_json(cfg)); }

json ap_json(const APResult& ap) {
  return {{"per_class_ap", ap.per_class_ap},
          {"num_gt", ap.num_gt},
          {"num_det", ap.num_det},
          {"map", ap.mean_ap}};
}

void emit(const json& j) { std::cout << j.dump() << "\n" << std::flush; }

std::string sample_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%05zu.frus", index);
  return buf;
}

}  // namespace

RunConfig resolve_config(const CliOptions& opt) {
  RunConfig cfg;
  if (!opt.config_path.empty()) cfg = load_config(opt.config_path);
  if (opt.has_seed) cfg.seed = opt.seed;
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  if (!opt.checkpoint.empty()) cfg.checkpoint = opt.checkpoint;
  if (!opt.split.empty()) cfg.split = opt.split;
  cfg.synth.seed = cfg.seed;  // one seed drives generation too
  return cfg;
}

int cmd_gen(const CliOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  const std::string dir = opt.out_dir.empty() ? cfg.data_dir : opt.out_dir;
  fs::create_directories(dir);

  const std::size_t total = cfg.train_count + cfg.eval_count;
  const std::size_t k = cfg.synth.classes.size();

  DatasetManifest m;
  m.seed = cfg.synth.seed;
  for (const SyntheticClassSpec& c : cfg.synth.classes)
    m.class_names.push_back(c.name);

  for (std::size_t i = 0; i < total; ++i) {
    std::mt19937_64 rng(cfg.synth.seed + i);  // per-sample stream
    const std::size_t cls = i % k;
    const FrustumSample s = generate_sample(cfg.synth, cls, rng);
    const std::string name = sample_name(i);
    write_sample((fs::path(dir) / name).string(), s);
    m.entries.push_back(
        {name, cls, i < cfg.train_count ? "train" : "eval"});
  }
  write_manifest(dir, m);  // last, so a visible manifest = complete dataset

  emit({{"command", "gen"},
        {"seed", cfg.seed},
        {"dir", dir},
        {"samples", total},
        {"train", cfg.train_count},
        {"eval", cfg.eval_count},
        {"classes", m.class_names},
        {"config", config_echo(cfg)}});
  return 0;
}

int cmd_train(const CliOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  const DatasetManifest manifest = read_manifest(cfg.data_dir);
  const std::vector<FrustumSample> train =
      load_split(cfg.data_dir, manifest, "train");

  Pipeline p(cfg);
  p.store.init_random(cfg.seed);
  if (!cfg.init_checkpoint.empty()) load_checkpoint(cfg.init_checkpoint, p.store);

  fs::create_directories(cfg.out_dir);
  const std::string log_path =
      (fs::path(cfg.out_dir) / "train_log.jsonl").string();
  std::ofstream log(log_path);
  if (!log) throw ConfigError("cannot open training log '" + log_path + "'");

  const json echo = {{"command", "train"},
                     {"seed", cfg.seed},
                     {"train_samples", train.size()},
                     {"config", config_echo(cfg)}};
  emit(echo);
  log << echo.dump() << "\n";

  LossBreakdown last;
  const std::size_t steps = train_pipeline(p, train, [&](const StepLog& sl) {
    last = sl.mean;
    log << json{{"step", sl.step},
                {"epoch", sl.epoch},
                {"seg", sl.mean.seg},
                {"tnet_center", sl.mean.tnet_center},
                {"center_reg", sl.mean.center_reg},
                {"angle_cls", sl.mean.angle_cls},
                {"angle_reg", sl.mean.angle_reg},
                {"size_cls", sl.mean.size_cls},
                {"size_reg", sl.mean.size_reg},
                {"corner", sl.mean.corner},
                {"total", sl.mean.total}}
               .dump()
        << "\n"
        << std::flush;
  });

  const std::string ckpt_path =
      cfg.checkpoint.empty()
          ? (fs::path(cfg.out_dir) / "model.ckpt").string()
          : cfg.checkpoint;
  save_checkpoint(ckpt_path, p.store);

  emit({{"command", "train"},
        {"steps", steps},
        {"final_total", last.total},
        {"checkpoint", ckpt_path},
        {"log", log_path}});
  return 0;
}

int cmd_eval(const CliOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  if (cfg.checkpoint.empty())
    throw ConfigError("eval needs a checkpoint (--checkpoint)");

  Pipeline p(cfg);
  p.store.init_random(cfg.seed);  // allocate, then overwrite from disk
  load_checkpoint(cfg.checkpoint, p.store);

  const DatasetManifest manifest = read_manifest(cfg.data_dir);
  const std::vector<FrustumSample> samples =
      load_split(cfg.data_dir, manifest, cfg.split);

  const EvalSummary sum = evaluate_pipeline(p, samples);
  const APResult& headline = opt.metric == "bev" ? sum.ap_bev : sum.ap3d;

  const json report = {
      {"command", "eval"},
      {"seed", cfg.seed},
      {"config", config_echo(cfg)},
      {"split", cfg.split},
      {"metric", opt.metric},
      {"num_samples", sum.num_samples},
      {"thresholds", resolve_thresholds(cfg, cfg.synth.classes.size())},
      {"preset", cfg.eval_preset},
      {"seg_accuracy", sum.seg_accuracy},
      {"mean_angle_error", sum.mean_angle_error},
      {"map", headline.mean_ap},
      {"ap_3d", ap_json(sum.ap3d)},
      {"ap_bev", ap_json(sum.ap_bev)}};
  emit(report);

  fs::create_directories(cfg.out_dir);
  const std::string report_path =
      (fs::path(cfg.out_dir) / ("eval_" + cfg.split + ".json")).string();
  std::ofstream out(report_path);
  if (out) out << report.dump(2) << "\n";
  return 0;
}

int cmd_gradcheck(const CliOptions& opt) {
  RunConfig cfg = resolve_config(opt);
  // A small probe cloud keeps the finite-difference sweep well under budget
  // without touching the configured widths.
  cfg.synth.points_per_sample = std::min<std::size_t>(
      std::max<std::size_t>(cfg.synth.points_per_sample, 8), 96);

  const GradCheckReport rep =
      gradcheck_pipeline(cfg, kGradEps, opt.inject_fault);

  json items = json::array();
  bool pass = true;
  for (const GradCheckItem& it : rep.items) {
    const bool ok = it.max_rel_err < kGradTol;
    pass = pass && ok;
    items.push_back({{"name", it.name},
                     {"max_rel_err", it.max_rel_err},
                     {"coords", it.coords},
                     {"pass", ok}});
  }
  emit({{"command", "gradcheck"},
        {"seed", cfg.seed},
        {"config", config_echo(cfg)},
        {"eps", kGradEps},
        {"tolerance", kGradTol},
        {"probe_points", cfg.synth.points_per_sample},
        {"items", items},
        {"worst", rep.worst},
        {"pass", pass}});
  return pass ? 0 : 3;
}

int cmd_bench(const CliOptions& opt) {
  const RunConfig cfg = resolve_config(opt);
  Pipeline p(cfg);
  p.store.init_random(cfg.seed);
  const std::vector<Parameter*> params = p.params();

  json results = json::array();
  for (const std::size_t n : {std::size_t{32}, std::size_t{512},
                              std::size_t{2048}}) {
    SyntheticConfig sc = cfg.synth;
    sc.points_per_sample = n;
    std::mt19937_64 rng(cfg.seed);
    const FrustumSample s = generate_sample(sc, 0, rng);

    auto rate = [&](auto&& body) {
      using clock = std::chrono::steady_clock;
      body();  // warm up
      std::size_t iters = 0;
      const auto start = clock::now();
      double elapsed = 0.0;
      while ((elapsed < 0.4 || iters < 3) && iters < 200) {
        body();
        ++iters;
        elapsed = std::chrono::duration<double>(clock::now() - start).count();
      }
      return static_cast<double>(iters) / elapsed;
    };

    const double fwd = rate([&] {
      const TapeBinding bind(nullptr, params);
      forward_sample(p, bind, s);
    });
    const double fwd_bwd = rate([&] {
      Tape tape;
      const TapeBinding bind(&tape, params);
      const ForwardResult f = forward_sample(p, bind, s);
      const TotalLossInputs parts =
          build_losses(p, f, s, cfg.fine_tune_angle);
      tape.backward(total_loss(parts, cfg.weights));
    });
    results.push_back({{"points", n},
                       {"forward_sps", fwd},
                       {"forward_backward_sps", fwd_bwd}});
  }

  emit({{"command", "bench"},
        {"seed", cfg.seed},
        {"config", config_echo(cfg)},
        {"results", results}});
  return 0;
}

}  // namespace sifr
