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


#include "abtrack/flops.hpp"

#include <algorithm>
#include <vector>

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

std::int64_t block_flops(const PrunedViTLayer& layer, int n_tokens) {
  const std::int64_t n = n_tokens;
  const std::int64_t d = layer.dim();
  const bool packed = layer.mode == MaskMode::Compacted;
  const std::int64_t k1 = packed ? static_cast<std::int64_t>(layer.keep1.size()) : d;
  const std::int64_t k2 = packed ? static_cast<std::int64_t>(layer.keep2.size()) : d;
  const std::int64_t nl = layer.mlp_layers();
  std::int64_t macs = 2 * n * k1 * d;  // Q, K
  macs += n * k1 * k1;                 // V
  std::int64_t live_heads = layer.n_heads();
  if (packed) {
    std::vector<int> width(static_cast<std::size_t>(layer.n_heads()), 0);
    for (int k : layer.keep1) ++width[static_cast<std::size_t>(k / layer.head_dim())];
    live_heads = std::count_if(width.begin(), width.end(), [](int w) { return w > 0; });
  }
  macs += n * n * layer.head_dim() * live_heads;  // scores
  macs += n * n * k1;                  // attention * V
  macs += n * k1 * d;                  // output
  macs += n * (k2 * k2 * (nl - 1) + k2 * d);
  return 2 * macs;
}

std::int64_t block_params(const PrunedViTLayer& layer) { return static_cast<std::int64_t>(layer.parameter_count()); }

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
