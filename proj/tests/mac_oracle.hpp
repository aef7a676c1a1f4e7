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

// Multiply-accumulate counter: runs a block with naive loops over the layer's
// actual weight shapes and counts every multiply-add of a matrix product.

#include <cstdint>
#include <vector>

#include "abtrack/backbone.hpp"

namespace abtrack::testing {

struct MacCounter {
  std::int64_t macs = 0;

  // c[n x m] = a[n x k] * b[k x m], b row-major with m columns.
  std::vector<double> mm(const std::vector<double>& a, int n, int k, const std::vector<double>& b, int m) {
    std::vector<double> c(static_cast<std::size_t>(n * m), 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        for (int p = 0; p < k; ++p) {
          c[static_cast<std::size_t>(i * m + j)] += a[static_cast<std::size_t>(i * k + p)] * b[static_cast<std::size_t>(p * m + j)];
          ++macs;
        }
    return c;
  }
};

inline std::vector<double> as_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

// Counts the block's matrix-product MACs for n tokens of width d.
inline std::int64_t count_block_macs(const PrunedViTLayer& layer, int n) {
  MacCounter mc;
  const int d = layer.dim();
  const bool packed = layer.mode == MaskMode::Compacted;
  const int in1 = packed ? static_cast<int>(layer.keep1.size()) : d;
  const int in2 = packed ? static_cast<int>(layer.keep2.size()) : d;
  std::vector<double> x(static_cast<std::size_t>(n * in1), 0.5);
  const auto q = mc.mm(x, n, in1, as_vec(layer.wq.value), layer.wq.value.cols());
  const auto k = mc.mm(x, n, in1, as_vec(layer.wk.value), layer.wk.value.cols());
  const int vcols = layer.wv.value.cols();
  const auto v = mc.mm(x, n, in1, as_vec(layer.wv.value), vcols);
  const int dh = d / layer.n_heads();
  // Per-head value widths from the kept set (contiguous head blocks).
  std::vector<int> vw(static_cast<std::size_t>(layer.n_heads()), dh);
  if (packed) {
    std::fill(vw.begin(), vw.end(), 0);
    for (int idx : layer.keep1) ++vw[static_cast<std::size_t>(idx / dh)];
  }
  for (int h = 0; h < layer.n_heads(); ++h) {
    if (vw[static_cast<std::size_t>(h)] == 0) continue;
    std::vector<double> qh(static_cast<std::size_t>(n * dh), 0.1), kt(static_cast<std::size_t>(dh * n), 0.1);
    const auto s = mc.mm(qh, n, dh, kt, n);
    std::vector<double> vh(static_cast<std::size_t>(n * vw[static_cast<std::size_t>(h)]), 0.1);
    mc.mm(s, n, n, vh, vw[static_cast<std::size_t>(h)]);
  }
  std::vector<double> cat(static_cast<std::size_t>(n * vcols), 0.1);
  mc.mm(cat, n, vcols, as_vec(layer.wo.value), layer.wo.value.cols());
  std::vector<double> hdn(static_cast<std::size_t>(n * in2), 0.1);
  int width = in2;
  for (const Parameter& w : layer.mlp) {
    hdn = mc.mm(hdn, n, width, as_vec(w.value), w.value.cols());
    width = w.value.cols();
  }
  (void)q;
  (void)k;
  (void)v;
  return mc.macs;
}

}  // namespace abtrack::testing
