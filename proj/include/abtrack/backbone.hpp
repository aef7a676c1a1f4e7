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
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "abtrack/image.hpp"
#include "abtrack/tape.hpp"
#include "abtrack/trace.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

// Row-major patch matrix: one row per P x P patch, columns ordered (c, py, px).
Tensor patchify(const Image& img, int patch);

// Linear patch projection plus learnable positional embeddings for the
// template slots, the search slots and the trailing bypass token.
class PatchEmbedder {
 public:
  PatchEmbedder() = default;
  PatchEmbedder(int patch, int channels, int dim, int template_size, int search_size, std::mt19937_64& rng);

  int patch() const { return patch_; }
  int channels() const { return channels_; }
  int dim() const { return dim_; }
  int template_size() const { return template_size_; }
  int search_size() const { return search_size_; }
  int n_template() const { return (template_size_ / patch_) * (template_size_ / patch_); }
  int n_search() const { return (search_size_ / patch_) * (search_size_ / patch_); }
  int n_tokens() const { return n_template() + n_search() + 1; }

  std::vector<Parameter*> parameters();

  Parameter proj;    // (C*P*P) x d
  Parameter bias;    // d
  Parameter pos;     // n_tokens x d
  Parameter bypass;  // 1 x d

 private:
  int patch_ = 16;
  int channels_ = 3;
  int dim_ = 64;
  int template_size_ = 64;
  int search_size_ = 128;
};

// Layout: template slots, then search slots, bypass token last.
struct TokenSequence {
  Var tokens;
  int n_template = 0;
  int n_search = 0;

  int n_tokens() const { return n_template + n_search + 1; }
  int bypass_index() const { return n_template + n_search; }
};

TokenSequence embed(Tape& tape, const Image& template_img, const Image& search_img, PatchEmbedder& emb);

// How the dimension-reduction (DR) matrices act on a block.
enum class MaskMode {
  Dense,      // no masking; the traditional block
  Relaxed,    // real-valued DR vectors, trainable, L1-regularised
  Binary,     // {0,1} DR masks applied to dense weights
  Compacted,  // masked dimensions physically removed
};

const char* mask_mode_name(MaskMode m);

class PrunedViTLayer {
 public:
  PrunedViTLayer() = default;
  PrunedViTLayer(std::string prefix, int dim, int n_heads, int mlp_layers, std::mt19937_64& rng);

  int dim() const { return dim_; }
  int n_heads() const { return n_heads_; }
  int head_dim() const { return dim_ / n_heads_; }
  int mlp_layers() const { return mlp_layers_; }
  const std::string& prefix() const { return prefix_; }

  MaskMode mode = MaskMode::Relaxed;

  Parameter ln1_scale, ln1_shift, ln2_scale, ln2_shift;
  // Dense: every projection is d x d; the head-i slice of W^Q/W^K/W^V is the
  // column block [i*d_h, (i+1)*d_h). Compacted shapes are documented on
  // compact().
  Parameter wq, wk, wv, wo;
  std::vector<Parameter> mlp;
  // Relaxed DR vectors d1, d2 (diagonals of the relaxed DR matrices).
  Parameter dr1, dr2;
  // Binary DR masks (Binary mode).
  std::vector<std::uint8_t> mask1, mask2;
  // Kept dimension indices, ascending (Compacted mode).
  std::vector<int> keep1, keep2;

  // Parameters that take part in the forward pass for the current mode.
  std::vector<Parameter*> parameters();
  std::size_t parameter_count() const;
  int kept1() const;
  int kept2() const;

 private:
  std::string prefix_;
  int dim_ = 0;
  int n_heads_ = 1;
  int mlp_layers_ = 2;
};

// Activation after MLP layer k (0-based): gelu for all but the last, which is
// the identity.
Unary mlp_activation(int k, int mlp_layers);

// Validates a binary DR mask: length d, popcount > 0 and divisible by N_h.
void check_dr_mask(const std::vector<std::uint8_t>& mask, int dim, int n_heads, const char* which);

// Generalised multi-head self-attention over already-normalised tokens.
Var checked_msa(Var x, PrunedViTLayer& layer);
// Generalised MLP over already-normalised tokens.
Var checked_mlp(Var y, PrunedViTLayer& layer);
// Pre-norm residual block: Y = MSA(LN(X)) + X, Z = MLP(LN(Y)) + Y.
Var layer_forward(Var x, PrunedViTLayer& layer);

enum class GateMode { Train, Infer };

struct GateDecision {
  bool execute = true;
  std::optional<Var> probability;
};

// Invoked for every layer with index >= n_enf with the layer index and the
// current bypass token (1 x d).
using GateFn = std::function<GateDecision(int layer, Var bypass_token)>;

struct BackboneOutput {
  TokenSequence seq;
  BypassTrace trace;
  std::vector<Var> probabilities;  // one per gated layer that produced one
};

// Sequential application. In Infer mode skipped layers are not computed; in
// Train mode every block is computed and the hard decision selects between
// the block output and its input, with identical results.
BackboneOutput backbone_forward(TokenSequence seq, std::vector<PrunedViTLayer>& layers, int n_enf, const GateFn& gate,
                                GateMode mode = GateMode::Infer);

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
