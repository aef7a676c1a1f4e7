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
#include <string>
#include <vector>

#include "abtrack/backbone.hpp"
#include "abtrack/bypass.hpp"
#include "abtrack/config.hpp"
#include "abtrack/head.hpp"
#include "abtrack/image.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

// Build phases, in the only admissible order.
enum class Phase { Dense = 0, RegTrained = 1, Compacted = 2, Final = 3 };

const char* phase_name(Phase p);
Phase parse_phase(const std::string& s);
// Throws PipelineError unless `to` directly follows `from`.
void check_transition(Phase from, Phase to);

class Model {
 public:
  Model() = default;
  Model(const ModelConfig& cfg, std::uint64_t seed);

  ModelConfig cfg;
  Phase phase = Phase::Dense;
  PatchEmbedder embedder;
  std::vector<PrunedViTLayer> layers;
  std::vector<BypassDecisionModule> bdms;  // empty until attached
  PredictionHead head;

  bool has_bdms() const { return !bdms.empty(); }
  int n_enf() const { return cfg.depth - static_cast<int>(bdms.size()); }
  void attach_bdms(int n_enf, std::uint64_t seed);

  // Parameters touched by the forward pass in the current layer modes.
  std::vector<Parameter*> parameters();
  // Every stored tensor, including the relaxed DR vectors; names are unique.
  std::vector<Parameter*> all_parameters();
  std::int64_t parameter_count();
};

struct ForwardOut {
  HeadOutput head;
  BackboneOutput backbone;
};

// Without attached modules every layer executes.
ForwardOut model_forward(Tape& tape, Model& model, const Image& template_img, const Image& search_img,
                         const GatingPolicy& policy, const GatedOptions& options = {});

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
