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


#include "abtrack/checkpoint.hpp"

#include <map>

#include "abtrack/errors.hpp"
#include "abtrack/pruning.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

namespace {

std::vector<std::int32_t> to_i32(const std::vector<int>& v) { return {v.begin(), v.end()}; }

std::vector<std::uint8_t> mask_from(const std::vector<std::int32_t>& keep, int dim, const std::string& name) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(dim), 0);
  for (auto k : keep) {
    if (k < 0 || k >= dim) throw CheckpointError(name + ": kept index " + std::to_string(k) + " out of range");
    mask[static_cast<std::size_t>(k)] = 1;
  }
  return mask;
}

std::int32_t scalar_i32(const std::map<std::string, const RawTensor*>& by_name, const std::string& name) {
  auto it = by_name.find(name);
  if (it == by_name.end()) throw CheckpointError("missing metadata tensor " + name);
  const auto v = it->second->as_i32();
  if (v.empty()) throw CheckpointError(name + " is empty");
  return v[0];
}

}  // namespace

std::uint64_t model_config_hash(const ModelConfig& cfg) {
  Config c;
  c.model = cfg;
  return c.model_hash();
}

std::vector<RawTensor> model_tensors(Model& model) {
  std::vector<RawTensor> out;
  const std::uint64_t h = model_config_hash(model.cfg);
  out.push_back(RawTensor::i32("meta.phase", {static_cast<std::int32_t>(model.phase)}));
  out.push_back(RawTensor::i32("meta.config_hash", {static_cast<std::int32_t>(h & 0xffffffffu),
                                                    static_cast<std::int32_t>(h >> 32)}));
  out.push_back(RawTensor::i32("meta.n_enf", {model.has_bdms() ? model.n_enf() : -1}));
  for (auto& l : model.layers) {
    if (l.mode != MaskMode::Compacted) continue;
    out.push_back(RawTensor::i32("meta." + l.prefix() + ".keep1", to_i32(l.keep1)));
    out.push_back(RawTensor::i32("meta." + l.prefix() + ".keep2", to_i32(l.keep2)));
  }
  for (Parameter* p : model.all_parameters()) {
    std::vector<std::uint32_t> dims(p->value.shape().begin(), p->value.shape().end());
    std::vector<float> vals(p->value.values().begin(), p->value.values().end());
    out.push_back(RawTensor::f32(p->name, std::move(dims), vals));
  }
  return out;
}

Model model_from_tensors(const std::vector<RawTensor>& tensors, const ModelConfig& cfg) {
  std::map<std::string, const RawTensor*> by_name;
  for (const RawTensor& t : tensors)
    if (!by_name.emplace(t.name, &t).second) throw CheckpointError("duplicate tensor " + t.name);

  const auto hash_it = by_name.find("meta.config_hash");
  if (hash_it == by_name.end()) throw CheckpointError("missing metadata tensor meta.config_hash");
  const auto halves = hash_it->second->as_i32();
  if (halves.size() != 2) throw CheckpointError("meta.config_hash must hold 2 values");
  const std::uint64_t stored =
      static_cast<std::uint32_t>(halves[0]) | (static_cast<std::uint64_t>(static_cast<std::uint32_t>(halves[1])) << 32);
  if (stored != model_config_hash(cfg)) {
    throw CheckpointError("config hash mismatch: checkpoint was written for a different model.* configuration");
  }

  const int phase = scalar_i32(by_name, "meta.phase");
  if (phase < 0 || phase > 3) throw CheckpointError("meta.phase out of range: " + std::to_string(phase));
  const int n_enf = scalar_i32(by_name, "meta.n_enf");

  Model model(cfg, 0);
  model.phase = static_cast<Phase>(phase);
  const bool compacted = model.phase == Phase::Compacted || model.phase == Phase::Final;
  for (auto& l : model.layers) {
    const std::string k1 = "meta." + l.prefix() + ".keep1";
    const std::string k2 = "meta." + l.prefix() + ".keep2";
    const bool has_keep = by_name.count(k1) && by_name.count(k2);
    if (compacted != has_keep) {
      throw CheckpointError(l.prefix() + ": kept-dimension metadata does not match phase " +
                           phase_name(model.phase));
    }
    if (!has_keep) continue;
    auto m1 = mask_from(by_name[k1]->as_i32(), l.dim(), k1);
    auto m2 = mask_from(by_name[k2]->as_i32(), l.dim(), k2);
    try {
      check_dr_mask(m1, l.dim(), l.n_heads(), "keep1");
      check_dr_mask(m2, l.dim(), l.n_heads(), "keep2");
    } catch (const ContractError& e) {
      throw CheckpointError(l.prefix() + ": " + e.what());
    }
    l = compact(l, m1, m2);
  }
  if (n_enf >= 0) model.attach_bdms(n_enf, 0);

  std::size_t used = 0;
  for (Parameter* p : model.all_parameters()) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw CheckpointError("missing tensor " + p->name);
    const RawTensor& t = *it->second;
    const Shape& want = p->value.shape();
    if (t.dims.size() != want.size() || !std::equal(want.begin(), want.end(), t.dims.begin(),
                                                    [](int a, std::uint32_t b) { return static_cast<std::uint32_t>(a) == b; })) {
      throw CheckpointError("tensor " + p->name + " has a stored shape that differs from the rebuilt " +
                           shape_str(want));
    }
    const auto vals = t.as_f32();
    for (std::size_t i = 0; i < vals.size(); ++i) p->value[i] = static_cast<real>(vals[i]);
    p->grad = Tensor(want);
    ++used;
  }
  std::size_t meta = 0;
  for (const auto& [name, t] : by_name)
    if (name.rfind("meta.", 0) == 0) ++meta;
  if (used + meta != tensors.size()) throw CheckpointError("checkpoint holds unrecognised tensors");
  return model;
}

void save_model(Model& model, const std::string& path) { write_bytes(path, encode_tensors(model_tensors(model))); }

Model load_model(const std::string& path, const ModelConfig& cfg) {
  return model_from_tensors(decode_tensors(read_bytes(path)), cfg);
}

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
