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


#include "abtrack/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "abtrack/errors.hpp"
#include "abtrack/flops.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

int d_star(int dim, double mu, int n_heads) {
  if (n_heads <= 0) throw ConfigError("n_heads must be positive");
  // The epsilon keeps exact products such as 64 * 0.5 / 4 from flooring down.
  return static_cast<int>(std::floor(dim * mu / n_heads + 1e-9)) * n_heads;
}

double PruneConfig::alpha_for(std::size_t layer) const {
  if (alpha.empty()) throw ConfigError("prune.alpha must not be empty");
  return alpha.size() == 1 ? alpha.front() : alpha.at(layer);
}

void PruneConfig::validate(int dim, int n_heads, int depth) const {
  if (!(mu > 0.0 && mu <= 1.0)) throw ConfigError("prune.mu must lie in (0, 1], got " + std::to_string(mu));
  if (d_star(dim, mu, n_heads) <= 0) {
    throw ConfigError("prune.mu = " + std::to_string(mu) + " leaves no dimensions (d* = 0)");
  }
  if (alpha.size() != 1 && static_cast<int>(alpha.size()) != depth) {
    throw ConfigError("prune.alpha needs 1 or " + std::to_string(depth) + " values");
  }
  for (double a : alpha)
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("prune.alpha values must be positive");
}

Var reg_loss(Tape& tape, std::vector<PrunedViTLayer>& layers, const PruneConfig& cfg) {
  if (layers.empty()) throw ContractError("reg_loss: no layers");
  std::vector<Var> terms;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Var l1 = add(sum(abs(tape.param(layers[k].dr1))), sum(abs(tape.param(layers[k].dr2))));
    terms.push_back(scale(l1, static_cast<real>(cfg.alpha_for(k))));
  }
  return sum(stack(terms));
}

namespace {

// Indices ordered by descending score, ties to the lower index.
std::vector<int> ranking(const std::vector<double>& scores) {
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)]; });
  return idx;
}

std::vector<std::uint8_t> top_k(const std::vector<double>& scores, int k) {
  std::vector<std::uint8_t> mask(scores.size(), 0);
  std::vector<int> order = ranking(scores);
  for (int i = 0; i < k; ++i) mask[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
  return mask;
}

void check_scores(const std::vector<double>& scores, int n_heads) {
  for (double v : scores)
    if (!std::isfinite(v)) throw ContractError("binarize: non-finite importance score");
  if (n_heads <= 0 || scores.size() % static_cast<std::size_t>(n_heads) != 0) {
    throw ConfigError("binarize: N_h must divide d");
  }
}

}  // namespace

std::vector<std::uint8_t> binarize_local(const std::vector<double>& scores, double mu, int n_heads) {
  check_scores(scores, n_heads);
  const int k = d_star(static_cast<int>(scores.size()), mu, n_heads);
  if (k <= 0) throw ConfigError("binarize: d* = 0 would delete the layer (mu = " + std::to_string(mu) + ")");
  return top_k(scores, std::min(k, static_cast<int>(scores.size())));
}

std::vector<std::vector<std::uint8_t>> binarize_global(const std::vector<std::vector<double>>& scores, double mu,
                                                       int n_heads) {
  if (scores.empty()) throw ContractError("binarize_global: no layers");
  const std::size_t layers = scores.size();
  const int dim = static_cast<int>(scores.front().size());
  struct Entry {
    double v;
    std::size_t layer;
    int index;
  };
  std::vector<Entry> all;
  for (std::size_t l = 0; l < layers; ++l) {
    check_scores(scores[l], n_heads);
    if (static_cast<int>(scores[l].size()) != dim) throw ContractError("binarize_global: layers differ in d");
    for (int i = 0; i < dim; ++i) all.push_back({scores[l][static_cast<std::size_t>(i)], l, i});
  }
  std::stable_sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.v > b.v; });
  const int budget = static_cast<int>(std::floor(static_cast<double>(layers) * dim * mu + 1e-9));
  if (budget < static_cast<int>(layers) * n_heads) {
    throw ConfigError("binarize_global: budget " + std::to_string(budget) + " cannot keep N_h dims in every layer");
  }
  std::vector<int> count(layers, 0);
  for (int i = 0; i < budget; ++i) ++count[all[static_cast<std::size_t>(i)].layer];
  int total = 0;
  for (int& c : count) {
    c = std::max(n_heads, c / n_heads * n_heads);
    total += c;
  }
  while (total > budget) {
    auto largest = std::max_element(count.begin(), count.end());
    *largest -= n_heads;
    total -= n_heads;
  }
  std::vector<std::vector<std::uint8_t>> masks;
  for (std::size_t l = 0; l < layers; ++l) {
    if (count[l] <= 0) throw ConfigError("binarize_global: layer " + std::to_string(l) + " keeps no dimensions");
    masks.push_back(top_k(scores[l], count[l]));
  }
  return masks;
}

std::vector<double> scores_of(const Parameter& relaxed) {
  return {relaxed.value.values().begin(), relaxed.value.values().end()};
}

std::vector<int> kept_indices(const std::vector<std::uint8_t>& mask) {
  std::vector<int> keep;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) keep.push_back(static_cast<int>(i));
  return keep;
}

void set_binary_masks(PrunedViTLayer& layer, std::vector<std::uint8_t> mask1, std::vector<std::uint8_t> mask2) {
  check_dr_mask(mask1, layer.dim(), layer.n_heads(), "D1");
  check_dr_mask(mask2, layer.dim(), layer.n_heads(), "D2");
  layer.mask1 = std::move(mask1);
  layer.mask2 = std::move(mask2);
  layer.mode = MaskMode::Binary;
}

namespace {

Tensor select(const Tensor& w, const std::vector<int>& rows, const std::vector<int>* cols) {
  const int nc = cols ? static_cast<int>(cols->size()) : w.cols();
  Tensor out(Shape{static_cast<int>(rows.size()), nc});
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < nc; ++c) out.at(static_cast<int>(r), c) = w.at(rows[r], cols ? (*cols)[static_cast<std::size_t>(c)] : c);
  return out;
}

}  // namespace

PrunedViTLayer compact(const PrunedViTLayer& layer, const std::vector<std::uint8_t>& mask1,
                       const std::vector<std::uint8_t>& mask2) {
  if (layer.mode == MaskMode::Compacted) throw ContractError("compact: layer is already compacted");
  check_dr_mask(mask1, layer.dim(), layer.n_heads(), "D1");
  check_dr_mask(mask2, layer.dim(), layer.n_heads(), "D2");
  PrunedViTLayer out = layer;
  out.keep1 = kept_indices(mask1);
  out.keep2 = kept_indices(mask2);
  out.mask1 = mask1;
  out.mask2 = mask2;
  out.wq.value = select(layer.wq.value, out.keep1, nullptr);
  out.wk.value = select(layer.wk.value, out.keep1, nullptr);
  out.wv.value = select(layer.wv.value, out.keep1, &out.keep1);
  out.wo.value = select(layer.wo.value, out.keep1, nullptr);
  const std::size_t nl = layer.mlp.size();
  for (std::size_t k = 0; k < nl; ++k) {
    out.mlp[k].value = select(layer.mlp[k].value, out.keep2, k + 1 < nl ? &out.keep2 : nullptr);
  }
  for (Parameter* p : out.parameters()) p->grad = Tensor();
  out.dr1.grad = Tensor();
  out.dr2.grad = Tensor();
  out.mode = MaskMode::Compacted;
  return out;
}

double compaction_error(PrunedViTLayer& masked, PrunedViTLayer& compacted, int n, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0;
  for (int s = 0; s < samples; ++s) {
    Tensor x(Shape{n, masked.dim()});
    for (real& v : x.values()) v = static_cast<real>(g(rng));
    Tape tape(false);
    Var a = layer_forward(tape.constant(x), masked);
    Var b = layer_forward(tape.constant(x), compacted);
    worst = std::max(worst, static_cast<double>(max_abs_diff(a.value(), b.value())));
  }
  return worst;
}

namespace {

void write_indices(std::ostream& os, const std::vector<int>& v) {
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ']';
}

}  // namespace

std::string PruneReport::to_text() const {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", mu);
  os << "# mu = " << buf << ", d* = " << d_star << "\n";
  os << "# layer keep_d1 keep_d2 params_before params_after flops_before flops_after equivalence_max_abs\n";
  for (const PruneRecord& r : layers) {
    os << r.layer << ' ';
    write_indices(os, r.keep1);
    os << ' ';
    write_indices(os, r.keep2);
    std::snprintf(buf, sizeof buf, "%.3e", r.equivalence_max_abs);
    os << ' ' << r.params_before << ' ' << r.params_after << ' ' << r.flops_before << ' ' << r.flops_after << ' '
       << buf << '\n';
  }
  return os.str();
}

PruneReport prune_layers(std::vector<PrunedViTLayer>& layers, const PruneConfig& cfg, int n_tokens,
                         bool bdms_attached, double tolerance, int check_samples) {
  if (bdms_attached) throw PipelineError("prune: decision modules must be attached after pruning, not before");
  if (layers.empty()) throw ContractError("prune: no layers");
  cfg.validate(layers.front().dim(), layers.front().n_heads(), static_cast<int>(layers.size()));
  PruneReport report;
  report.mu = cfg.mu;
  report.d_star = d_star(layers.front().dim(), cfg.mu, layers.front().n_heads());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    PrunedViTLayer& layer = layers[i];
    if (layer.mode == MaskMode::Compacted) throw PipelineError("prune: layer " + std::to_string(i) + " already compacted");
    PruneRecord rec;
    rec.layer = static_cast<int>(i);
    PrunedViTLayer dense = layer;
    dense.mode = MaskMode::Dense;
    rec.params_before = block_params(dense);
    rec.flops_before = block_flops(dense, n_tokens);
    PrunedViTLayer masked = layer;
    set_binary_masks(masked, binarize_local(scores_of(layer.dr1), cfg.mu, layer.n_heads()),
                     binarize_local(scores_of(layer.dr2), cfg.mu, layer.n_heads()));
    PrunedViTLayer packed = compact(masked, masked.mask1, masked.mask2);
    rec.equivalence_max_abs = compaction_error(masked, packed, n_tokens, check_samples, 0x5eed0000u + i);
    if (!(rec.equivalence_max_abs <= tolerance)) {
      throw AcceptanceError("prune: layer " + std::to_string(i) + " compacted forward differs from masked forward by " +
                          std::to_string(rec.equivalence_max_abs));
    }
    rec.keep1 = packed.keep1;
    rec.keep2 = packed.keep2;
    rec.params_after = block_params(packed);
    rec.flops_after = block_flops(packed, n_tokens);
    layer = std::move(packed);
    report.layers.push_back(std::move(rec));
  }
  return report;
}

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
