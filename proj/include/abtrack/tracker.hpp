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

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "abtrack/bbox.hpp"
#include "abtrack/image.hpp"
#include "abtrack/model.hpp"
#include "abtrack/trace.hpp"

namespace abtrack {

enum class Difficulty { Easy, Hard };
enum class TargetShape { Square, Circle };
enum class Background { Flat, Textured };

struct SceneSpec {
  int frame_size = 160;
  TargetShape shape = TargetShape::Square;
  std::array<float, 3> color{0.9f, 0.2f, 0.2f};
  std::array<float, 3> background_color{0.3f, 0.35f, 0.4f};
  double size_min = 16;  // pixels
  double size_max = 32;
  int distractor_count = 0;
  Background background = Background::Flat;
  double noise_std = 0.02;
  double motion_std = 2.0;  // pixels per frame and axis
  Difficulty difficulty = Difficulty::Easy;

  void validate() const;
};

// Draws a scene of the given difficulty: easy scenes use a flat background
// and no distractors; hard scenes a textured background and at least four
// distractors of the other shape in the target's color.
SceneSpec sample_scene(Difficulty difficulty, std::uint64_t seed);

// Sequence frames are rendered on demand from the recipe so large datasets
// never have to be held in memory.
struct SequenceRecipe {
  SceneSpec spec;
  std::uint64_t seed = 0;
  int length = 2;
};

struct Sequence {
  std::vector<Image> frames;
  std::vector<BBox> ground_truth;  // normalised to the full frame
};

// Object trajectories for every frame (target first, then distractors),
// as pixel centers and sizes.
struct Trajectory {
  double size = 0;
  std::vector<std::vector<std::array<double, 2>>> centers;  // [object][frame]
  std::vector<double> object_sizes;
};

Trajectory plan_trajectory(const SequenceRecipe& recipe);
Image render_frame(const SequenceRecipe& recipe, const Trajectory& traj, int frame);
BBox ground_truth(const SequenceRecipe& recipe, const Trajectory& traj, int frame);
Sequence generate_sequence(const SceneSpec& spec, int length, std::uint64_t seed);

// Seed derived from a namespace label so training and evaluation draws
// never coincide.
std::uint64_t namespaced_seed(const std::string& space, std::uint64_t seed, std::uint64_t index);

// Square crop of side `side` pixels with top-left (x0, y0) in frame pixels.
struct CropTransform {
  double x0 = 0, y0 = 0, side = 1;
  int frame_width = 1, frame_height = 1;

  // Crop-normalised box -> frame-normalised box, and back.
  BBox to_frame(const BBox& crop_box) const;
  BBox to_crop(const BBox& frame_box) const;
};

struct CropResult {
  Image template_img;
  Image search_img;
  CropTransform template_tf;
  CropTransform search_tf;
};

// Square crop centred on `box_center`, side factor * sqrt(w h) (frame
// pixels), bilinearly resized to out_size; samples outside the frame take the
// frame's per-channel mean.
Image crop_resize(const Image& frame, const BBox& box, double factor, int out_size, CropTransform* tf);

CropResult crop_regions(const Image& frame, const BBox& prev_box, double template_factor, double search_factor,
                        int template_size, int search_size);

struct FrameResult {
  BBox predicted;
  double iou = 0;
  BypassTrace trace;
};

struct TrackResult {
  std::vector<FrameResult> frames;
};

struct TrackOptions {
  double template_factor = 2.0;
  double search_factor = 4.0;
  // Centre each search crop on the ground truth instead of the previous
  // prediction.
  bool ground_truth_fed = false;
  int forced_skip = -1;
};

struct TrackMetrics {
  double ao = 0, sr50 = 0, sr75 = 0, auc = 0, mean_executed_blocks = 0;
  std::size_t frames = 0;
};

// AO, SR_t (IoU > t, strict), AUC over t = 0, 0.05, ..., 1 and mean executed
// blocks, pooled over every frame except each sequence's first.
TrackMetrics eval_metrics(const std::vector<TrackResult>& results);
TrackMetrics metrics_from_ious(const std::vector<double>& ious, const std::vector<int>& executed);

void write_track_csv(std::ostream& os, const Sequence& seq, const TrackResult& result);
std::string metrics_json(const TrackMetrics& m);

inline namespace ABTRACK_PRECISION_NS {

// Frame 0 initialises the template from the ground truth and is run once for
// its trace; later frames search around the previous prediction.
TrackResult track_sequence(Model& model, const Sequence& seq, const GatingPolicy& policy,
                           const TrackOptions& options = {});

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
