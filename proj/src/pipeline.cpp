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


#include "abtrack/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "abtrack/dataset.hpp"
#include "abtrack/errors.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

std::uint64_t init_seed(const Config& cfg, std::uint64_t index) { return namespaced_seed("init", cfg.train.seed, index); }

Model train_stage(const Config& cfg, std::ostream* metrics, const std::function<void(const EpochMetrics&)>& progress) {
  Model model(cfg.model, init_seed(cfg, 0));
  TrainOptions o = reg_options(cfg);
  if (metrics) write_metrics_header(*metrics, cfg, o);
  o.on_epoch = [&](const EpochMetrics& m) {
    if (metrics) write_metrics_row(*metrics, m);
    if (progress) progress(m);
  };
  train_model(model, cfg, o);
  check_transition(model.phase, Phase::RegTrained);
  model.phase = Phase::RegTrained;
  return model;
}

PruneReport prune_stage(Model& model, const Config& cfg) {
  check_transition(model.phase, Phase::Compacted);
  PruneReport r = prune_layers(model.layers, PruneConfig{cfg.prune.mu, cfg.prune.alpha}, cfg.model.n_tokens(),
                               model.has_bdms());
  model.phase = Phase::Compacted;
  return r;
}

std::vector<EpochMetrics> finetune_stage(Model& model, const Config& cfg, std::ostream* metrics,
                                         const std::function<void(const EpochMetrics&)>& progress) {
  check_transition(model.phase, Phase::Final);
  if (!model.has_bdms()) model.attach_bdms(cfg.bypass.n_enf, init_seed(cfg, 1));
  TrainOptions o = finetune_options(cfg);
  if (metrics) write_metrics_header(*metrics, cfg, o);
  o.on_epoch = [&](const EpochMetrics& m) {
    if (metrics) write_metrics_row(*metrics, m);
    if (progress) progress(m);
  };
  auto history = train_model(model, cfg, o);
  model.phase = Phase::Final;
  return history;
}

namespace {

nlohmann::ordered_json metrics_object(const TrackMetrics& m) { return nlohmann::ordered_json::parse(metrics_json(m)); }

}  // namespace

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["easy"] = metrics_object(easy.metrics);
  j["hard"] = metrics_object(hard.metrics);
  std::vector<TrackResult> all = easy.results;
  all.insert(all.end(), hard.results.begin(), hard.results.end());
  j["all"] = metrics_object(eval_metrics(all));
  j["executed_blocks_hard_minus_easy"] = executed_difference();
  return j.dump(2) + "\n";
}

EvalReport evaluate(Model& model, const Config& cfg, std::uint64_t seed, const TrackOptions& base) {
  EvalReport report;
  TrackOptions opts = base;
  opts.template_factor = cfg.track.template_factor;
  opts.search_factor = cfg.track.search_factor;
  const GatingPolicy policy{cfg.bypass.rho, model.has_bdms() ? model.n_enf() : cfg.bypass.n_enf};
  for (EvalSet* set : {&report.easy, &report.hard}) {
    set->difficulty = set == &report.easy ? Difficulty::Easy : Difficulty::Hard;
    for (int i = 0; i < cfg.data.eval_sequences; ++i) {
      const SequenceRecipe r = dataset_recipe(cfg.data, "eval", seed, static_cast<std::uint64_t>(i), set->difficulty);
      set->sequences.push_back(generate_sequence(r.spec, r.length, r.seed));
      set->results.push_back(track_sequence(model, set->sequences.back(), policy, opts));
    }
    set->metrics = eval_metrics(set->results);
  }
  return report;
}

void write_eval_outputs(const EvalReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "sequences");
  std::ofstream(fs::path(dir) / "report.json") << report.to_json();
  std::ofstream trace(fs::path(dir) / "trace.csv");
  bool header = false;
  int frame_id = 0;
  for (const EvalSet* set : {&report.easy, &report.hard}) {
    const char* tag = set->difficulty == Difficulty::Easy ? "easy" : "hard";
    for (std::size_t i = 0; i < set->results.size(); ++i) {
      std::ofstream csv(fs::path(dir) / "sequences" / (std::string(tag) + "_" + std::to_string(i) + ".csv"));
      write_track_csv(csv, set->sequences[i], set->results[i]);
      for (const FrameResult& f : set->results[i].frames) {
        if (!header) {
          write_trace_header(trace, static_cast<int>(f.trace.size()));
          header = true;
        }
        write_trace_row(trace, frame_id++, f.trace);
      }
    }
  }
}

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
