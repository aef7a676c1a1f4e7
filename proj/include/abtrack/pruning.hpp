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

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

// Kept-dimension count d* = floor(d * mu / N_h) * N_h.
int d_star(int dim, double mu, int n_heads);

struct PruneConfig {
  double mu = 0.3;
  // One weight per layer, or a single weight shared by all layers.
  std::vector<double> alpha{1e-4};

  double alpha_for(std::size_t layer) const;
  void validate(int dim, int n_heads, int depth) const;
};

// sum_k alpha_k * (|d1_k|_1 + |d2_k|_1) over the relaxed DR vectors.
Var reg_loss(Tape& tape, std::vector<PrunedViTLayer>& layers, const PruneConfig& cfg);

// Ones at the d* largest values (signed, descending; ties to the lower index).
std::vector<std::uint8_t> binarize_local(const std::vector<double>& scores, double mu, int n_heads);

// One ranking across all layers with a total budget floor(L * d * mu). Each
// layer's count is rounded down to a multiple of N_h and raised to at least
// N_h; any overshoot is taken back from the largest layers.
std::vector<std::vector<std::uint8_t>> binarize_global(const std::vector<std::vector<double>>& scores, double mu,
                                                       int n_heads);

std::vector<double> scores_of(const Parameter& relaxed);
std::vector<int> kept_indices(const std::vector<std::uint8_t>& mask);

// Switches the layer to Binary mode with validated masks.
void set_binary_masks(PrunedViTLayer& layer, std::vector<std::uint8_t> mask1, std::vector<std::uint8_t> mask2);

// Physically removes masked dimensions. With K1 = |keep1|, K2 = |keep2|:
//   W^Q, W^K: K1 x d     (input rows kept; per-head query/key width unchanged)
//   W^V:      K1 x K1    (rows kept; output columns kept, so head widths vary)
//   W^O:      K1 x d
//   W^L_k:    K2 x K2 for k < N_l, K2 x d for the last layer
// LN parameters are untouched; the token dimension stays d.
PrunedViTLayer compact(const PrunedViTLayer& layer, const std::vector<std::uint8_t>& mask1,
                       const std::vector<std::uint8_t>& mask2);

// Max-abs difference between the Binary-mode and Compacted forward passes of
// `masked` and `compacted` over `samples` random token matrices of n rows.
double compaction_error(PrunedViTLayer& masked, PrunedViTLayer& compacted, int n, int samples, std::uint64_t seed);

struct PruneRecord {
  int layer = 0;
  std::vector<int> keep1, keep2;
  std::int64_t params_before = 0, params_after = 0;
  std::int64_t flops_before = 0, flops_after = 0;
  double equivalence_max_abs = 0.0;
};

struct PruneReport {
  double mu = 0.0;
  int d_star = 0;
  std::vector<PruneRecord> layers;

  std::string to_text() const;
};

// Binarizes every layer locally, compacts it, and checks masked vs compacted
// equivalence. Throws PipelineError if decision modules are already attached
// and PipelineError naming the layer if equivalence exceeds `tolerance`.
PruneReport prune_layers(std::vector<PrunedViTLayer>& layers, const PruneConfig& cfg, int n_tokens,
                         bool bdms_attached, double tolerance = 1e-5, int check_samples = 200);

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
