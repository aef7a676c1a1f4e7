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

#include "abtrack/backbone.hpp"

#include <cmath>

#include "abtrack/errors.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

namespace {

Tensor uniform(Shape shape, real bound, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (real& v : t.values()) v = static_cast<real>(u(rng));
  return t;
}

Tensor mask_tensor(const std::vector<std::uint8_t>& mask) {
  Tensor t(Shape{static_cast<int>(mask.size())});
  for (std::size_t i = 0; i < mask.size(); ++i) t[i] = mask[i] ? real(1) : real(0);
  return t;
}

// X * diag(D) for the non-compacted modes.
Var apply_dr(Var x, MaskMode mode, Parameter& relaxed, const std::vector<std::uint8_t>& mask) {
  switch (mode) {
    case MaskMode::Dense:
    case MaskMode::Compacted:
      return x;
    case MaskMode::Relaxed:
      return mul_row(x, x.tape()->param(relaxed));
    case MaskMode::Binary:
      return mul_row(x, x.tape()->constant(mask_tensor(mask)));
  }
  return x;
}

Var attention(Var q, Var k, Var v, real inv_scale) {
  return matmul(softmax_rows(scale(matmul_nt(q, k), inv_scale)), v);
}

}  // namespace

Tensor patchify(const Image& img, int patch) {
  if (patch <= 0 || img.height % patch != 0 || img.width % patch != 0) {
    throw ConfigError("image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                      " is not divisible by patch size " + std::to_string(patch));
  }
  const int gh = img.height / patch;
  const int gw = img.width / patch;
  const int cols = img.channels * patch * patch;
  Tensor out(Shape{gh * gw, cols});
  for (int r = 0; r < gh; ++r)
    for (int q = 0; q < gw; ++q) {
      real* row = out.data() + static_cast<std::size_t>(r * gw + q) * cols;
      int k = 0;
      for (int c = 0; c < img.channels; ++c)
        for (int py = 0; py < patch; ++py)
          for (int px = 0; px < patch; ++px) row[k++] = img.at(c, r * patch + py, q * patch + px);
    }
  return out;
}

PatchEmbedder::PatchEmbedder(int patch, int channels, int dim, int template_size, int search_size,
                             std::mt19937_64& rng)
    : patch_(patch), channels_(channels), dim_(dim), template_size_(template_size), search_size_(search_size) {
  if (patch <= 0 || template_size % patch != 0 || search_size % patch != 0) {
    throw ConfigError("template/search sizes must be divisible by the patch size");
  }
  const int fan_in = channels * patch * patch;
  proj = Parameter("embed.proj", uniform({fan_in, dim}, static_cast<real>(1.0 / std::sqrt(fan_in)), rng));
  bias = Parameter("embed.bias", Tensor(Shape{dim}, 0.0f));
  pos = Parameter("embed.pos", Tensor(Shape{n_tokens(), dim}, 0.0f));
  bypass = Parameter("embed.bypass", uniform({1, dim}, static_cast<real>(0.02), rng));
}

std::vector<Parameter*> PatchEmbedder::parameters() { return {&proj, &bias, &pos, &bypass}; }

TokenSequence embed(Tape& tape, const Image& template_img, const Image& search_img, PatchEmbedder& emb) {
  if (template_img.height != emb.template_size() || template_img.width != emb.template_size() ||
      search_img.height != emb.search_size() || search_img.width != emb.search_size()) {
    throw ConfigError("embed: template/search images do not match the configured sizes");
  }
  if (template_img.channels != emb.channels() || search_img.channels != emb.channels()) {
    throw ConfigError("embed: channel count mismatch");
  }
  Var proj = tape.param(emb.proj);
  Var bias = tape.param(emb.bias);
  Var z = add_row(matmul(tape.constant(patchify(template_img, emb.patch())), proj), bias);
  Var x = add_row(matmul(tape.constant(patchify(search_img, emb.patch())), proj), bias);
  Var tokens = add(concat_rows({z, x, tape.param(emb.bypass)}), tape.param(emb.pos));
  return TokenSequence{tokens, emb.n_template(), emb.n_search()};
}

const char* mask_mode_name(MaskMode m) {
  switch (m) {
    case MaskMode::Dense:
      return "dense";
    case MaskMode::Relaxed:
      return "relaxed";
    case MaskMode::Binary:
      return "binary";
    case MaskMode::Compacted:
      return "compacted";
  }
  return "?";
}

PrunedViTLayer::PrunedViTLayer(std::string prefix, int dim, int n_heads, int mlp_layers, std::mt19937_64& rng)
    : prefix_(std::move(prefix)), dim_(dim), n_heads_(n_heads), mlp_layers_(mlp_layers) {
  if (n_heads <= 0 || dim % n_heads != 0) {
    throw ConfigError("number of heads " + std::to_string(n_heads) + " must divide d = " + std::to_string(dim));
  }
  if (mlp_layers < 1) throw ConfigError("mlp_layers must be at least 1");
  const real bound = static_cast<real>(1.0 / std::sqrt(dim));
  auto name = [this](const char* s) { return prefix_ + "." + s; };
  ln1_scale = Parameter(name("ln1.scale"), Tensor(Shape{dim}, 1.0f));
  ln1_shift = Parameter(name("ln1.shift"), Tensor(Shape{dim}, 0.0f));
  ln2_scale = Parameter(name("ln2.scale"), Tensor(Shape{dim}, 1.0f));
  ln2_shift = Parameter(name("ln2.shift"), Tensor(Shape{dim}, 0.0f));
  wq = Parameter(name("wq"), uniform({dim, dim}, bound, rng));
  wk = Parameter(name("wk"), uniform({dim, dim}, bound, rng));
  wv = Parameter(name("wv"), uniform({dim, dim}, bound, rng));
  wo = Parameter(name("wo"), uniform({dim, dim}, bound, rng));
  for (int k = 0; k < mlp_layers; ++k) {
    mlp.emplace_back(name(("mlp." + std::to_string(k)).c_str()), uniform({dim, dim}, bound, rng));
  }
  dr1 = Parameter(name("dr1"), Tensor(Shape{dim}, 1.0f));
  dr2 = Parameter(name("dr2"), Tensor(Shape{dim}, 1.0f));
}

std::vector<Parameter*> PrunedViTLayer::parameters() {
  std::vector<Parameter*> ps{&ln1_scale, &ln1_shift, &ln2_scale, &ln2_shift, &wq, &wk, &wv, &wo};
  for (Parameter& p : mlp) ps.push_back(&p);
  if (mode == MaskMode::Relaxed) {
    ps.push_back(&dr1);
    ps.push_back(&dr2);
  }
  return ps;
}

std::size_t PrunedViTLayer::parameter_count() const {
  std::size_t n = ln1_scale.numel() + ln1_shift.numel() + ln2_scale.numel() + ln2_shift.numel();
  n += wq.numel() + wk.numel() + wv.numel() + wo.numel();
  for (const Parameter& p : mlp) n += p.numel();
  return n;
}

namespace {
int popcount(const std::vector<std::uint8_t>& m) {
  int n = 0;
  for (auto v : m) n += v ? 1 : 0;
  return n;
}
}  // namespace

int PrunedViTLayer::kept1() const {
  if (mode == MaskMode::Binary) return popcount(mask1);
  if (mode == MaskMode::Compacted) return static_cast<int>(keep1.size());
  return dim_;
}

int PrunedViTLayer::kept2() const {
  if (mode == MaskMode::Binary) return popcount(mask2);
  if (mode == MaskMode::Compacted) return static_cast<int>(keep2.size());
  return dim_;
}

Unary mlp_activation(int k, int mlp_layers) { return k + 1 < mlp_layers ? Unary::gelu() : Unary::identity(); }

void check_dr_mask(const std::vector<std::uint8_t>& mask, int dim, int n_heads, const char* which) {
  if (static_cast<int>(mask.size()) != dim) {
    throw ContractError(std::string(which) + ": mask length " + std::to_string(mask.size()) + " != d = " +
                        std::to_string(dim));
  }
  const int ones = popcount(mask);
  if (ones == 0 || ones % n_heads != 0) {
    throw ContractError(std::string(which) + ": mask popcount " + std::to_string(ones) +
                        " is not a positive multiple of N_h = " + std::to_string(n_heads));
  }
}

Var checked_msa(Var x, PrunedViTLayer& layer) {
  Tape& tape = *x.tape();
  const int d = layer.dim();
  if (x.value().cols() != d) {
    throw DimensionError("checked_msa: token dim " + std::to_string(x.value().cols()) + " != d = " + std::to_string(d));
  }
  const int nh = layer.n_heads();
  const int dh = layer.head_dim();
  const real inv_scale = static_cast<real>(1.0 / std::sqrt(static_cast<double>(dh)));

  if (layer.mode == MaskMode::Compacted) {
    // x[:, keep1] feeds W^Q/W^K (d* x d) and W^V (d* x d*); only the kept
    // output dims of each head reach W^O (d* x d).
    Var xk = gather_cols(x, layer.keep1);
    Var q = matmul(xk, tape.param(layer.wq));
    Var k = matmul(xk, tape.param(layer.wk));
    Var v = matmul(xk, tape.param(layer.wv));
    std::vector<Var> heads;
    int col = 0;
    for (int h = 0; h < nh; ++h) {
      int count = 0;
      while (col + count < static_cast<int>(layer.keep1.size()) && layer.keep1[static_cast<std::size_t>(col + count)] < (h + 1) * dh) {
        ++count;
      }
      if (count == 0) continue;
      Var qh = slice_cols(q, h * dh, (h + 1) * dh);
      Var kh = slice_cols(k, h * dh, (h + 1) * dh);
      heads.push_back(attention(qh, kh, slice_cols(v, col, col + count), inv_scale));
      col += count;
    }
    return matmul(heads.size() == 1 ? heads.front() : concat_cols(heads), tape.param(layer.wo));
  }

  if (layer.mode == MaskMode::Binary) check_dr_mask(layer.mask1, d, nh, "D1");
  Var xm = apply_dr(x, layer.mode, layer.dr1, layer.mask1);
  Var q = matmul(xm, tape.param(layer.wq));
  Var k = matmul(xm, tape.param(layer.wk));
  Var v = matmul(xm, tape.param(layer.wv));
  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(nh));
  for (int h = 0; h < nh; ++h) {
    const int b = h * dh;
    heads.push_back(attention(slice_cols(q, b, b + dh), slice_cols(k, b, b + dh), slice_cols(v, b, b + dh), inv_scale));
  }
  Var cat = nh == 1 ? heads.front() : concat_cols(heads);
  return matmul(apply_dr(cat, layer.mode, layer.dr1, layer.mask1), tape.param(layer.wo));
}

Var checked_mlp(Var y, PrunedViTLayer& layer) {
  Tape& tape = *y.tape();
  const int d = layer.dim();
  if (y.value().cols() != d) {
    throw DimensionError("checked_mlp: token dim " + std::to_string(y.value().cols()) + " != d = " + std::to_string(d));
  }
  const int nl = layer.mlp_layers();
  if (layer.mode == MaskMode::Compacted) {
    Var h = gather_cols(y, layer.keep2);
    for (int k = 0; k < nl; ++k) {
      h = apply_unary(matmul(h, tape.param(layer.mlp[static_cast<std::size_t>(k)])), mlp_activation(k, nl));
    }
    return h;
  }
  if (layer.mode == MaskMode::Binary) check_dr_mask(layer.mask2, d, layer.n_heads(), "D2");
  Var h = y;
  for (int k = 0; k < nl; ++k) {
    h = apply_dr(h, layer.mode, layer.dr2, layer.mask2);
    h = apply_unary(matmul(h, tape.param(layer.mlp[static_cast<std::size_t>(k)])), mlp_activation(k, nl));
  }
  return h;
}

Var layer_forward(Var x, PrunedViTLayer& layer) {
  Tape& tape = *x.tape();
  Var y = add(checked_msa(layer_norm(x, tape.param(layer.ln1_scale), tape.param(layer.ln1_shift)), layer), x);
  return add(checked_mlp(layer_norm(y, tape.param(layer.ln2_scale), tape.param(layer.ln2_shift)), layer), y);
}

BackboneOutput backbone_forward(TokenSequence seq, std::vector<PrunedViTLayer>& layers, int n_enf, const GateFn& gate,
                                GateMode mode) {
  BackboneOutput out;
  const int n = static_cast<int>(layers.size());
  if (n_enf < 0 || n_enf > n) throw ConfigError("n_enf out of range [0, N]");
  Var x = seq.tokens;
  const int b = seq.bypass_index();
  for (int i = 0; i < n; ++i) {
    BypassTrace::Entry entry;
    entry.layer = i;
    bool execute = true;
    if (i >= n_enf && gate) {
      GateDecision dec = gate(i, slice_rows(x, b, b + 1));
      execute = dec.execute;
      if (dec.probability) {
        entry.p = static_cast<double>(dec.probability->item());
        out.probabilities.push_back(*dec.probability);
      }
    }
    entry.executed = execute;
    if (execute) {
      x = layer_forward(x, layers[static_cast<std::size_t>(i)]);
    } else if (mode == GateMode::Train) {
      // Computed for the batch, discarded for this sample.
      (void)layer_forward(x, layers[static_cast<std::size_t>(i)]);
    }
    out.trace.entries.push_back(entry);
  }
  seq.tokens = x;
  out.seq = seq;
  return out;
}

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
