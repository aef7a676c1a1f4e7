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


#include "abtrack/model.hpp"

#include <random>
#include <set>

#include "abtrack/errors.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Dense:
      return "dense";
    case Phase::RegTrained:
      return "reg-trained";
    case Phase::Compacted:
      return "compacted";
    case Phase::Final:
      return "final";
  }
  return "?";
}

Phase parse_phase(const std::string& s) {
  for (Phase p : {Phase::Dense, Phase::RegTrained, Phase::Compacted, Phase::Final})
    if (s == phase_name(p)) return p;
  throw CheckpointError("unknown phase '" + s + "'");
}

void check_transition(Phase from, Phase to) {
  if (static_cast<int>(to) != static_cast<int>(from) + 1) {
    throw PipelineError(std::string("phase transition ") + phase_name(from) + " -> " + phase_name(to) +
                        " is not allowed (order: dense -> reg-trained -> compacted -> final)");
  }
}

Model::Model(const ModelConfig& c, std::uint64_t seed) : cfg(c) {
  std::mt19937_64 rng(seed);
  embedder = PatchEmbedder(c.patch, c.channels, c.dim, c.template_size, c.search_size, rng);
  for (int i = 0; i < c.depth; ++i) layers.emplace_back("layer" + std::to_string(i), c.dim, c.heads, c.mlp_layers, rng);
  head = PredictionHead(c.dim, c.head_channels, c.head_stages, rng);
}

void Model::attach_bdms(int n_enf, std::uint64_t seed) {
  if (has_bdms()) throw PipelineError("decision modules already attached");
  if (n_enf < 0 || n_enf >= cfg.depth) throw ConfigError("n_enf must lie in [0, depth)");
  std::mt19937_64 rng(seed);
  for (int i = n_enf; i < cfg.depth; ++i) bdms.emplace_back("bdm" + std::to_string(i), cfg.dim, rng);
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> ps = embedder.parameters();
  for (auto& l : layers)
    for (Parameter* p : l.parameters()) ps.push_back(p);
  for (auto& b : bdms)
    for (Parameter* p : b.parameters()) ps.push_back(p);
  for (Parameter* p : head.parameters()) ps.push_back(p);
  return ps;
}

std::vector<Parameter*> Model::all_parameters() {
  std::vector<Parameter*> ps = embedder.parameters();
  for (auto& l : layers) {
    const MaskMode saved = l.mode;
    l.mode = MaskMode::Relaxed;
    for (Parameter* p : l.parameters()) ps.push_back(p);
    l.mode = saved;
  }
  for (auto& b : bdms)
    for (Parameter* p : b.parameters()) ps.push_back(p);
  for (Parameter* p : head.parameters()) ps.push_back(p);
  std::set<std::string> names;
  for (Parameter* p : ps)
    if (!names.insert(p->name).second) throw ContractError("duplicate parameter name " + p->name);
  return ps;
}

std::int64_t Model::parameter_count() {
  std::int64_t n = 0;
  for (Parameter* p : embedder.parameters()) n += static_cast<std::int64_t>(p->numel());
  for (auto& l : layers) n += static_cast<std::int64_t>(l.parameter_count());
  for (auto& b : bdms) n += static_cast<std::int64_t>(b.weight.numel() + b.bias.numel());
  for (Parameter* p : head.parameters()) n += static_cast<std::int64_t>(p->numel());
  return n;
}

ForwardOut model_forward(Tape& tape, Model& model, const Image& template_img, const Image& search_img,
                         const GatingPolicy& policy, const GatedOptions& options) {
  TokenSequence seq = embed(tape, template_img, search_img, model.embedder);
  ForwardOut out;
  if (model.has_bdms()) {
    out.backbone = gated_backbone(seq, model.layers, model.bdms, policy, options);
  } else {
    out.backbone = backbone_forward(seq, model.layers, 0, GateFn{}, options.mode);
  }
  const TokenSequence& s = out.backbone.seq;
  out.head = head_forward(slice_rows(s.tokens, s.n_template, s.n_template + s.n_search), model.head);
  return out;
}

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
