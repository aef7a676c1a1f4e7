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


#include "abtrack/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "abtrack/dataset.hpp"
#include "abtrack/flops.hpp"
#include "abtrack/pruning.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

std::int64_t FlopsReport::min_flops() const {
  std::int64_t f = embedder + head;
  for (int i = 0; i < n_enf && i < static_cast<int>(blocks.size()); ++i) f += blocks[static_cast<std::size_t>(i)];
  return f;
}

std::int64_t FlopsReport::max_flops() const {
  std::int64_t f = embedder + head;
  for (auto b : blocks) f += b;
  return f;
}

std::string FlopsReport::to_text() const {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "FLOPs(G) %.4f-%.4f  Params(M) %.4f\n", min_flops() / 1e9, max_flops() / 1e9,
                params / 1e6);
  os << buf;
  os << "range: min = embedder + first " << n_enf << " layers + head (every gated layer bypassed); "
     << "max = every layer executed" << (gated ? "" : " (decision modules not attached)") << '\n';
  os << "embedder " << embedder << '\n';
  for (std::size_t i = 0; i < blocks.size(); ++i)
    os << "layer" << i << (static_cast<int>(i) < n_enf ? " (enforced) " : " ") << blocks[i] << '\n';
  os << "head " << head << '\n';
  os << "decision modules " << bdm_count << " x " << bdm_each << " = " << bdm_count * bdm_each
     << " (not included in the range)\n";
  return os.str();
}

FlopsReport flops_report(Model& model, int n_enf_if_ungated) {
  const ModelConfig& c = model.cfg;
  FlopsReport r;
  const std::int64_t img_tokens = c.n_tokens() - 1;
  r.embedder = 2 * img_tokens * c.channels * c.patch * c.patch * c.dim;
  const std::int64_t g2 = static_cast<std::int64_t>(c.grid()) * c.grid();
  std::int64_t cin = c.dim;
  for (int s = 0; s < model.head.stages(); ++s) {
    r.head += 2 * g2 * 9 * cin * model.head.channels();
    cin = model.head.channels();
  }
  r.head += 2 * g2 * cin * 5;
  for (const auto& l : model.layers) r.blocks.push_back(block_flops(l, c.n_tokens()));
  r.gated = model.has_bdms();
  r.n_enf = r.gated ? model.n_enf() : n_enf_if_ungated;
  r.bdm_each = 2LL * c.dim;
  r.bdm_count = static_cast<int>(model.bdms.size());
  r.params = model.parameter_count();
  return r;
}

double clock_resolution_ns() {
  using clock = std::chrono::steady_clock;
  double best = 1e18;
  for (int i = 0; i < 200; ++i) {
    const auto a = clock::now();
    auto b = clock::now();
    while (b == a) b = clock::now();
    best = std::min(best, std::chrono::duration<double, std::nano>(b - a).count());
  }
  return best;
}

std::vector<TimingStats> time_interleaved(const std::vector<std::function<void()>>& fns, int warmup, int iterations,
                                          std::ostream* warn) {
  using clock = std::chrono::steady_clock;
  int inner = 1;
  const double res = clock_resolution_ns();
  if (res > 100.0) {
    inner = static_cast<int>(std::ceil(res / 100.0));
    if (warn) *warn << "warning: clock resolution " << res << " ns exceeds 100 ns; timing " << inner
                    << " calls per sample\n";
  }
  const std::size_t nf = fns.size();
  for (int i = 0; i < warmup; ++i)
    for (const auto& fn : fns) fn();
  std::vector<std::vector<double>> ms(nf);
  for (auto& v : ms) v.reserve(static_cast<std::size_t>(iterations));
  for (int i = 0; i < iterations; ++i) {
    for (std::size_t j = 0; j < nf; ++j) {
      const std::size_t f = (j + static_cast<std::size_t>(i)) % nf;
      const auto a = clock::now();
      for (int k = 0; k < inner; ++k) fns[f]();
      const auto b = clock::now();
      ms[f].push_back(std::chrono::duration<double, std::milli>(b - a).count() / inner);
    }
  }
  std::vector<TimingStats> out(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    std::vector<double>& v = ms[f];
    std::sort(v.begin(), v.end());
    auto q = [&](double p) { return v[static_cast<std::size_t>(p * (v.size() - 1) + 0.5)]; };
    TimingStats& st = out[f];
    st.median_ms = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    st.p10_ms = q(0.1);
    st.p90_ms = q(0.9);
    st.runs = iterations;
    st.inner = inner;
  }
  return out;
}

TimingStats time_calls(const std::function<void()>& fn, int warmup, int iterations, std::ostream* warn) {
  return time_interleaved({fn}, warmup, iterations, warn).front();
}

namespace {

TimingStats sum(const TimingStats& a, const TimingStats& b) {
  TimingStats s = a;
  s.median_ms += b.median_ms;
  s.p10_ms += b.p10_ms;
  s.p90_ms += b.p90_ms;
  return s;
}

Tensor random_tokens(int n, int d, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Tensor t(Shape{n, d});
  for (auto& v : t.storage()) v = static_cast<real>(nd(rng));
  return t;
}

}  // namespace

std::vector<BenchRecord> bench_blocks(const Config& cfg, std::uint64_t seed, std::ostream* warn) {
  const ModelConfig& c = cfg.model;
  const int n = c.n_tokens();
  std::mt19937_64 rng(seed);
  PrunedViTLayer dense("bench", c.dim, c.heads, c.mlp_layers, rng);
  dense.mode = MaskMode::Dense;
  BypassDecisionModule bdm("bench.bdm", c.dim, rng);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> s1(static_cast<std::size_t>(c.dim)), s2(s1.size());
  for (auto& v : s1) v = u(rng);
  for (auto& v : s2) v = u(rng);
  const auto m1 = binarize_local(s1, cfg.prune.mu, c.heads), m2 = binarize_local(s2, cfg.prune.mu, c.heads);
  PrunedViTLayer masked = dense;
  set_binary_masks(masked, m1, m2);
  PrunedViTLayer vtp = compact(masked, m1, m2);
  const Tensor x = random_tokens(n, c.dim, rng);
  const Tensor tok = random_tokens(1, c.dim, rng);

  const int w = cfg.bench.warmup, it = cfg.bench.iterations;
  auto block_fn = [&](PrunedViTLayer& l) {
    return [&] {
      Tape t(false);
      layer_forward(t.constant(x), l);
    };
  };
  const std::vector<TimingStats> t = time_interleaved(
      {block_fn(dense), block_fn(vtp),
       [&] {
         Tape tp(false);
         bypass_probability(bdm, tp.constant(tok));
       },
       [&] {
         Tape tp(false);
         Var y = layer_forward(tp.constant(x), dense);
         bypass_probability(bdm, slice_rows(y, n - 1, n));
       }},
      w, it, warn);
  const TimingStats &t_block = t[0], &t_vtp = t[1], &t_bdm = t[2], &t_direct = t[3];

  const std::int64_t fd = block_flops(dense, n), fv = block_flops(vtp, n), fb = 2LL * c.dim;
  const std::int64_t pd = block_params(dense), pv = block_params(vtp), pb = c.dim + 1;
  return {
      {"block/dense", t_block, fd, pd, 1},
      {"block/bdm", t_bdm, fb, pb, 0},
      {"block/+bdm", sum(t_block, t_bdm), fd + fb, pd + pb, 1},
      {"block/+bdm-direct", t_direct, fd + fb, pd + pb, 1},
      {"block/vtp", t_vtp, fv, pv, 1},
      {"block/+bdm+vtp", sum(t_vtp, t_bdm), fv + fb, pv + pb, 1},
  };
}

std::vector<BenchRecord> bench_end_to_end(const Model& source, const Config& cfg, std::uint64_t seed,
                                          std::ostream* warn) {
  Model model = source;
  if (!model.has_bdms()) model.attach_bdms(cfg.bypass.n_enf, seed);
  const int n_enf = model.n_enf(), depth = model.cfg.depth;
  const TrainingPair pair = make_training_pair(cfg, namespaced_seed("bench", seed, 0));
  const GatingPolicy policy{cfg.bypass.rho, n_enf};
  const FlopsReport fr = flops_report(model, n_enf);
  Tape probe(false);
  const ForwardOut o = model_forward(probe, model, pair.template_img, pair.search_img, policy);
  const int executed = o.backbone.trace.executed_count();

  std::vector<std::function<void()>> fns;
  for (int k = 0; k <= depth - n_enf + 1; ++k) {
    GatedOptions go;
    if (k <= depth - n_enf) go.forced_skip = k;  // the last slot runs the learned gates
    fns.push_back([&, go] {
      Tape tape(false);
      model_forward(tape, model, pair.template_img, pair.search_img, policy, go);
    });
  }
  const std::vector<TimingStats> t = time_interleaved(fns, cfg.bench.warmup, cfg.bench.iterations, warn);

  std::vector<BenchRecord> out;
  for (int k = 0; k <= depth - n_enf; ++k) {
    std::int64_t flops = fr.embedder + fr.head;
    for (int i = 0; i < depth - k; ++i) flops += fr.blocks[static_cast<std::size_t>(i)];
    out.push_back({"e2e/forced-skip-" + std::to_string(k), t[static_cast<std::size_t>(k)], flops, fr.params,
                   static_cast<double>(depth - k)});
  }
  std::int64_t flops = fr.embedder + fr.head + fr.bdm_each * fr.bdm_count;
  for (const auto& e : o.backbone.trace.entries)
    if (e.executed) flops += fr.blocks[static_cast<std::size_t>(e.layer)];
  out.push_back({"e2e/gated", t.back(), flops, fr.params, static_cast<double>(executed)});
  return out;
}

std::vector<BenchCheck> bench_checks(const std::vector<BenchRecord>& records) {
  std::map<std::string, double> med;
  for (const auto& r : records) med[r.scenario] = r.timing.median_ms;
  std::vector<BenchCheck> out;
  char buf[256];
  if (med.count("block/dense") && med.count("block/+bdm") && med.count("block/+bdm+vtp")) {
    const double a = med["block/+bdm"], b = med["block/dense"], c = med["block/+bdm+vtp"];
    std::snprintf(buf, sizeof buf, "+bdm %.4f ms > dense %.4f ms > +bdm+vtp %.4f ms", a, b, c);
    out.push_back({"block ordering", a > b && b > c, buf});
  }
  std::vector<double> ks;
  for (int k = 0; med.count("e2e/forced-skip-" + std::to_string(k)); ++k)
    ks.push_back(med["e2e/forced-skip-" + std::to_string(k)]);
  if (ks.size() >= 2) {
    bool mono = true;
    std::string d;
    for (std::size_t k = 0; k < ks.size(); ++k) {
      if (k && ks[k] > ks[k - 1]) mono = false;
      std::snprintf(buf, sizeof buf, "%sk=%zu %.3f", k ? ", " : "", k, ks[k]);
      d += buf;
    }
    out.push_back({"skip monotone", mono, d + " ms"});
    if (med.count("block/dense")) {
      double worst = 1e9;
      for (std::size_t k = 1; k < ks.size(); ++k)
        worst = std::min(worst, (ks[0] - ks[k]) / (static_cast<double>(k) * med["block/dense"]));
      std::snprintf(buf, sizeof buf, "smallest saved fraction of block time %.3f (need >= 0.5)", worst);
      out.push_back({"bypass saving", worst >= 0.5, buf});
    }
  }
  return out;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRecord>& records) {
  os << "scenario,median_ms,p10_ms,p90_ms,runs,flops,params,mean_executed_blocks\n";
  char buf[512];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%d,%lld,%lld,%.3f\n", r.scenario.c_str(), r.timing.median_ms,
                  r.timing.p10_ms, r.timing.p90_ms, r.timing.runs, static_cast<long long>(r.flops),
                  static_cast<long long>(r.params), r.mean_executed_blocks);
    os << buf;
  }
}

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
