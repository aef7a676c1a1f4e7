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


#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "abtrack/config.hpp"
#include "abtrack/model.hpp"
#include "abtrack/pruning.hpp"
#include "abtrack/tracker.hpp"
#include "abtrack/train.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

std::uint64_t init_seed(const Config& cfg, std::uint64_t index);

// dense -> reg-trained: task loss plus DR regularisation on a fresh model.
Model train_stage(const Config& cfg, std::ostream* metrics, const std::function<void(const EpochMetrics&)>& progress = {});
// reg-trained -> compacted.
PruneReport prune_stage(Model& model, const Config& cfg);
// compacted -> final: attaches the decision modules, then trains the full
// objective including the sparsity term.
std::vector<EpochMetrics> finetune_stage(Model& model, const Config& cfg, std::ostream* metrics,
                                         const std::function<void(const EpochMetrics&)>& progress = {});

struct EvalSet {
  Difficulty difficulty = Difficulty::Easy;
  std::vector<Sequence> sequences;
  std::vector<TrackResult> results;
  TrackMetrics metrics;
};

struct EvalReport {
  EvalSet easy, hard;
  // mean executed blocks, hard minus easy
  double executed_difference() const { return hard.metrics.mean_executed_blocks - easy.metrics.mean_executed_blocks; }
  std::string to_json() const;
};

// Held-out evaluation: data.eval_sequences sequences of each difficulty from
// the "eval" seed namespace.
EvalReport evaluate(Model& model, const Config& cfg, std::uint64_t seed, const TrackOptions& base = {});
// report.json, trace.csv and one CSV per sequence under `dir`.
void write_eval_outputs(const EvalReport& report, const std::string& dir);

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
