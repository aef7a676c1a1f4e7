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
#include <string>
#include <vector>

#include "abtrack/model.hpp"
#include "abtrack/tensor_file.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

// Hash of the model.* section that a checkpoint must agree with.
std::uint64_t model_config_hash(const ModelConfig& cfg);

// Every stored tensor plus metadata: meta.phase, meta.config_hash (two i32
// halves, low first), meta.n_enf (-1 without decision modules) and, once
// compacted, meta.<layer>.keep1 / keep2.
std::vector<RawTensor> model_tensors(Model& model);
Model model_from_tensors(const std::vector<RawTensor>& tensors, const ModelConfig& cfg);

void save_model(Model& model, const std::string& path);
// Rejects version, checksum or config-hash mismatches and any tensor whose
// shape differs from the one rebuilt from the metadata.
Model load_model(const std::string& path, const ModelConfig& cfg);

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
