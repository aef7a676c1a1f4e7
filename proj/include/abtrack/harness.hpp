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
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "abtrack/config.hpp"
#include "abtrack/model.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

// Model-level analytic counts (see flops.hpp for the per-block formula):
//   embedder  2 (n_template + n_search) C P^2 d
//   head      2 G^2 9 C_in C_out per stage + 2 G^2 C 5 for the branches
//   module    2 d per decision module evaluation
struct FlopsReport {
  std::int64_t embedder = 0;
  std::int64_t head = 0;
  std::vector<std::int64_t> blocks;
  std::int64_t bdm_each = 0;
  int bdm_count = 0;
  int n_enf = 0;
  bool gated = false;
  std::int64_t params = 0;

  // Every gated layer bypassed / none bypassed. Decision-module FLOPs are
  // listed separately and not folded into either bound.
  std::int64_t min_flops() const;
  std::int64_t max_flops() const;
  std::string to_text() const;
};

FlopsReport flops_report(Model& model, int n_enf_if_ungated);

struct TimingStats {
  double median_ms = 0, p10_ms = 0, p90_ms = 0;
  int runs = 0;
  int inner = 1;  // calls per timed sample
};

// Nanoseconds between distinct steady_clock readings (smallest observed).
double clock_resolution_ns();
// Times `fn` after warm-up. If the clock is coarser than 100 ns a warning is
// written to `warn` and each sample covers several calls.
TimingStats time_calls(const std::function<void()>& fn, int warmup, int iterations, std::ostream* warn = nullptr);
// Same, for several functions timed round-robin: each iteration samples every
// function once, starting from a rotating position, so machine drift is
// shared across them.
std::vector<TimingStats> time_interleaved(const std::vector<std::function<void()>>& fns, int warmup, int iterations,
                                          std::ostream* warn = nullptr);

struct BenchRecord {
  std::string scenario;
  TimingStats timing;
  std::int64_t flops = 0;
  std::int64_t params = 0;
  double mean_executed_blocks = 0;
};

// Single-block scenarios at the configured geometry: block/dense,
// block/bdm, block/+bdm (= dense + bdm), block/+bdm-direct (measured
// together), block/vtp (compacted at prune.mu) and block/+bdm+vtp
// (= vtp + bdm).
std::vector<BenchRecord> bench_blocks(const Config& cfg, std::uint64_t seed, std::ostream* warn = nullptr);
// End-to-end e2e/forced-skip-k for k = 0 .. N - n_enf, then e2e/gated.
// Decision modules are attached to a copy when the model has none.
std::vector<BenchRecord> bench_end_to_end(const Model& model, const Config& cfg, std::uint64_t seed,
                                          std::ostream* warn = nullptr);

struct BenchCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Ordering +bdm > dense > +bdm+vtp, latency non-increasing in k, and each
// bypassed block saving at least half of its measured time.
std::vector<BenchCheck> bench_checks(const std::vector<BenchRecord>& records);

void write_bench_csv(std::ostream& os, const std::vector<BenchRecord>& records);

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
