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
#include <optional>
#include <string>

#include "abtrack/config.hpp"
#include "abtrack/tracker.hpp"

namespace abtrack {

// Sequence `index` of the dataset living in seed namespace `space`
// ("train" or "eval"). Difficulty is drawn from data.easy_fraction unless
// forced.
SequenceRecipe dataset_recipe(const DataConfig& data, const std::string& space, std::uint64_t seed,
                              std::uint64_t index, std::optional<Difficulty> force = std::nullopt);

struct TrainingPair {
  Image template_img;
  Image search_img;
  BBox target;  // search-crop normalised
  int row = 0, col = 0;
  Difficulty difficulty = Difficulty::Easy;
};

// Template: frame 0 around its ground truth. Search: a later frame cropped
// around a jittered copy of its ground truth (center +-center_jitter * size,
// log-scale +-scale_jitter).
TrainingPair make_training_pair(const Config& cfg, std::uint64_t sample_seed,
                                std::optional<Difficulty> force = std::nullopt);

}  // namespace abtrack
