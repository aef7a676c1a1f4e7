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

#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "abtrack/backbone.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

// Linear probe on the bypass token followed by a sigmoid.
struct BypassDecisionModule {
  Parameter weight;  // d x 1
  Parameter bias;    // 1

  BypassDecisionModule() = default;
  BypassDecisionModule(const std::string& name, int dim, std::mt19937_64& rng);

  int dim() const { return weight.value.rows(); }
  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
};

struct GatingPolicy {
  double rho = 0.5;
  int n_enf = 2;

  // Requires 0 <= rho <= 1 and 0 <= n_enf < depth.
  void validate(int depth) const;
};

enum class Decision { Execute, Skip };

// p = sigmoid(b . w + bias) as a 1 x 1 node.
Var bypass_probability(BypassDecisionModule& bdm, Var bypass_token);

// Skip iff p > rho.
Decision decide(double p, const GatingPolicy& policy);

struct GatedOptions {
  GateMode mode = GateMode::Infer;
  // When >= 0, overrides the modules: exactly this many gated layers are
  // skipped, taken from the end of the stack, and no module is evaluated.
  int forced_skip = -1;
};

// bdms[j] gates layer n_enf + j.
BackboneOutput gated_backbone(TokenSequence seq, std::vector<PrunedViTLayer>& layers,
                              std::vector<BypassDecisionModule>& bdms, const GatingPolicy& policy,
                              const GatedOptions& options = {});

struct TraceStats {
  double mean_p = 0.0;
  int executed = 0;
  int skipped = 0;
};

TraceStats trace_stats(const BypassTrace& trace);

// frame_id, p_1..p_N (blank for enforced layers), executed bitmask (layer 1
// first), executed_count.
void write_trace_header(std::ostream& os, int depth);
void write_trace_row(std::ostream& os, int frame_id, const BypassTrace& trace);

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
