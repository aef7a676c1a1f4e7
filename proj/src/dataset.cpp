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


#include "abtrack/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace abtrack {

SequenceRecipe dataset_recipe(const DataConfig& data, const std::string& space, std::uint64_t seed,
                              std::uint64_t index, std::optional<Difficulty> force) {
  std::mt19937_64 rng(namespaced_seed(space + ".difficulty", seed, index));
  const Difficulty d =
      force ? *force
            : (std::uniform_real_distribution<double>(0, 1)(rng) < data.easy_fraction ? Difficulty::Easy
                                                                                       : Difficulty::Hard);
  SequenceRecipe r;
  r.spec = sample_scene(d, namespaced_seed(space + ".scene", seed, index));
  r.spec.frame_size = data.frame_size;
  r.spec.size_min = data.target_min;
  r.spec.size_max = data.target_max;
  r.spec.motion_std = data.motion_std;
  r.seed = namespaced_seed(space + ".sequence", seed, index);
  r.length = data.sequence_length;
  return r;
}

TrainingPair make_training_pair(const Config& cfg, std::uint64_t sample_seed, std::optional<Difficulty> force) {
  std::mt19937_64 rng(sample_seed);
  const auto seq = std::uniform_int_distribution<int>(0, cfg.data.sequences - 1)(rng);
  const int frame = std::uniform_int_distribution<int>(1, cfg.data.sequence_length - 1)(rng);
  const SequenceRecipe recipe = dataset_recipe(cfg.data, "train", cfg.train.seed, static_cast<std::uint64_t>(seq), force);
  const Trajectory traj = plan_trajectory(recipe);

  TrainingPair p;
  p.difficulty = recipe.spec.difficulty;
  p.template_img = crop_resize(render_frame(recipe, traj, 0), ground_truth(recipe, traj, 0),
                               cfg.track.template_factor, cfg.model.template_size, nullptr);

  const BBox gt = ground_truth(recipe, traj, frame);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double cj = cfg.data.center_jitter, sj = cfg.data.scale_jitter;
  BBox centre = gt;
  centre.x += cj * gt.w * u(rng);
  centre.y += cj * gt.h * u(rng);
  const double s = std::exp(sj * u(rng));
  centre.w *= s;
  centre.h *= s;
  CropTransform tf;
  p.search_img = crop_resize(render_frame(recipe, traj, frame), centre, cfg.track.search_factor,
                             cfg.model.search_size, &tf);
  p.target = tf.to_crop(gt);
  const int g = cfg.model.grid();
  p.col = std::clamp(static_cast<int>(std::floor(p.target.x * g)), 0, g - 1);
  p.row = std::clamp(static_cast<int>(std::floor(p.target.y * g)), 0, g - 1);
  return p;
}

}  // namespace abtrack
