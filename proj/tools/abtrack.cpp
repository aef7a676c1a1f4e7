/*
 * Copyright 2026 The abtrack Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


// abtrack command line: train | prune | finetune | track | bench | flops | gradcheck.
// Exit codes: 0 success, 1 contract or configuration error, 2 failed check.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "abtrack/checkpoint.hpp"
#include "abtrack/errors.hpp"
#include "abtrack/gradreport.hpp"
#include "abtrack/harness.hpp"
#include "abtrack/pipeline.hpp"

namespace fs = std::filesystem;
using namespace abtrack;

namespace {

struct Globals {
  std::string config;
  std::string checkpoint;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
};

Config load(const Globals& g) {
  Config cfg = g.config.empty() ? Config{} : load_config(g.config);
  if (g.seed) cfg.train.seed = *g.seed;
  cfg.validate();
  return cfg;
}

Model need_checkpoint(const Globals& g, const Config& cfg) {
  if (g.checkpoint.empty()) throw ConfigError("--checkpoint is required for this command");
  return load_model(g.checkpoint, cfg.model);
}

std::string out_file(const Globals& g, const std::string& name) {
  fs::create_directories(g.out);
  return (fs::path(g.out) / name).string();
}

void progress(const EpochMetrics& m) {
  std::fprintf(stderr, "epoch %3d  lr %.2g  loss %.4f  cls %.4f  giou %.4f  l1 %.4f  spar %.4f  mean_p %.3f\n",
               m.epoch, m.lr, m.loss, m.cls, m.iou, m.l1, m.spar, m.mean_p);
}

void save(Model& model, const Globals& g) {
  const std::string path = out_file(g, "model.ckpt");
  save_model(model, path);
  std::cout << "wrote " << path << " (phase " << phase_name(model.phase) << ")\n";
}

int cmd_train(const Globals& g) {
  const Config cfg = load(g);
  if (!g.checkpoint.empty()) {
    Model model = need_checkpoint(g, cfg);
    if (model.phase != Phase::Compacted) {
      throw PipelineError(std::string("train: a checkpoint must be in phase compacted, got ") +
                          phase_name(model.phase));
    }
    std::ofstream metrics(out_file(g, "metrics.csv"));
    finetune_stage(model, cfg, &metrics, progress);
    save(model, g);
    return 0;
  }
  std::ofstream metrics(out_file(g, "metrics.csv"));
  Model model = train_stage(cfg, &metrics, progress);
  save(model, g);
  return 0;
}

int cmd_prune(const Globals& g) {
  const Config cfg = load(g);
  Model model = need_checkpoint(g, cfg);
  const PruneReport report = prune_stage(model, cfg);
  std::ofstream(out_file(g, "prune_report.txt")) << report.to_text();
  std::cout << report.to_text();
  save(model, g);
  return 0;
}

int cmd_finetune(const Globals& g) {
  const Config cfg = load(g);
  Model model = need_checkpoint(g, cfg);
  check_transition(model.phase, Phase::Final);
  std::ofstream metrics(out_file(g, "metrics.csv"));
  finetune_stage(model, cfg, &metrics, progress);
  save(model, g);
  return 0;
}

int cmd_track(const Globals& g) {
  Config cfg = load(g);
  Model model = need_checkpoint(g, cfg);
  if (model.phase != Phase::Final) {
    throw PipelineError(std::string("track: checkpoint must be in phase final, got ") + phase_name(model.phase));
  }
  const EvalReport report = evaluate(model, cfg, cfg.train.seed);
  fs::create_directories(g.out);
  write_eval_outputs(report, g.out);
  std::cout << report.to_json();
  return 0;
}

int cmd_flops(const Globals& g) {
  const Config cfg = load(g);
  Model model = g.checkpoint.empty() ? Model(cfg.model, init_seed(cfg, 0)) : need_checkpoint(g, cfg);
  const FlopsReport r = flops_report(model, cfg.bypass.n_enf);
  std::ofstream(out_file(g, "flops_report.txt")) << r.to_text();
  std::cout << r.to_text();
  return 0;
}

int cmd_bench(const Globals& g, const std::string& scenario) {
  const Config cfg = load(g);
  std::vector<BenchRecord> records;
  if (scenario == "all" || scenario == "block") records = bench_blocks(cfg, cfg.train.seed, &std::cerr);
  if (scenario == "all" || scenario == "e2e") {
    Model model = g.checkpoint.empty() ? Model(cfg.model, init_seed(cfg, 0)) : need_checkpoint(g, cfg);
    if (g.checkpoint.empty())
      for (auto& l : model.layers) l.mode = MaskMode::Dense;
    for (auto& r : bench_end_to_end(model, cfg, cfg.train.seed, &std::cerr)) records.push_back(r);
  }
  std::ofstream csv(out_file(g, "bench.csv"));
  write_bench_csv(csv, records);
  write_bench_csv(std::cout, records);
  bool ok = true;
  for (const auto& c : bench_checks(records)) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    ok = ok && c.passed;
  }
  return ok ? 0 : 2;
}

int cmd_gradcheck(const Globals& g) {
  bool ok = true;
  for (const auto& l : run_gradient_suite(g.seed.value_or(1))) {
    std::printf("%s %-24s max rel err %.3e (tol %.0e, %zu coords, worst %s)\n", l.passed ? "PASS" : "FAIL",
                l.name.c_str(), l.max_rel_error, l.tolerance, l.coordinates, l.worst_param.c_str());
    ok = ok && l.passed;
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"abtrack: adaptive-bypass tracker toolkit"};
  app.fallthrough();
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "config file (key = value)");
  app.add_option("--checkpoint", g.checkpoint, "input checkpoint");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "overrides train.seed (dataset seed for track)");

  std::string scenario = "all";
  auto* train = app.add_subcommand("train", "train with DR regularisation, or fine-tune a compacted checkpoint");
  auto* prune = app.add_subcommand("prune", "binarize and compact a reg-trained checkpoint");
  auto* finetune = app.add_subcommand("finetune", "attach decision modules and fine-tune");
  auto* track = app.add_subcommand("track", "evaluate on held-out synthetic sequences");
  auto* bench = app.add_subcommand("bench", "latency benchmark");
  bench->add_option("--scenario", scenario, "all | block | e2e")
      ->check(CLI::IsMember({"all", "block", "e2e"}))
      ->capture_default_str();
  auto* flops = app.add_subcommand("flops", "analytic FLOPs and parameter report");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite (float64)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(g);
    if (*prune) return cmd_prune(g);
    if (*finetune) return cmd_finetune(g);
    if (*track) return cmd_track(g);
    if (*bench) return cmd_bench(g, scenario);
    if (*flops) return cmd_flops(g);
    if (*gradcheck) return cmd_gradcheck(g);
  } catch (const AcceptanceError& e) {
    std::cerr << "check failed: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
