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

#include "abtrack/backbone.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

// Analytic counts. One FLOP per multiply and one per add of every matrix
// product (2 x multiply-accumulates); normalisation, softmax, activations and
// residual additions are not counted.
//
// Per block with n tokens, per-mask widths K1, K2 (K = d when unmasked) and
// per-head value widths v_h (sum v_h = K1):
//   Q, K projections   2 * 2 n K1 d
//   V projection       2 n K1 K1 (compacted) or 2 n d d (dense)
//   scores             2 n^2 (d/N_h) H  (H heads with v_h > 0; empty heads are skipped)
//   attention * V      2 n^2 K1
//   output projection  2 n K1 d
//   MLP                2 n (K2^2 (N_l - 1) + K2 d)
// Binary (masked dense) layers compute at full width and count as dense.
std::int64_t block_flops(const PrunedViTLayer& layer, int n_tokens);
std::int64_t block_params(const PrunedViTLayer& layer);

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
