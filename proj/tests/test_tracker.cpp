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


#include <cmath>
#include <numbers>
#include <sstream>

#include "abtrack/dataset.hpp"
#include "abtrack/errors.hpp"
#include "abtrack/pipeline.hpp"
#include "abtrack/tracker.hpp"
#include "doctest.h"
#include "tiny.hpp"

using namespace abtrack;

namespace {

bool same_image(const Image& a, const Image& b) {
  return a.channels == b.channels && a.height == b.height && a.width == b.width && a.data == b.data;
}

SceneSpec quiet_scene(Difficulty d, std::uint64_t seed) {
  SceneSpec s = sample_scene(d, seed);
  s.noise_std = 0;
  return s;
}

}  // namespace

TEST_CASE("scene sampling respects difficulty") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SceneSpec e = sample_scene(Difficulty::Easy, seed);
    CHECK(e.background == Background::Flat);
    CHECK(e.distractor_count == 0);
    const SceneSpec h = sample_scene(Difficulty::Hard, seed);
    CHECK(h.background == Background::Textured);
    CHECK(h.distractor_count >= 4);
  }
}

TEST_CASE("generation is deterministic per seed") {
  const SceneSpec s = sample_scene(Difficulty::Hard, 3);
  const Sequence a = generate_sequence(s, 5, 11), b = generate_sequence(s, 5, 11), c = generate_sequence(s, 5, 12);
  for (int f = 0; f < 5; ++f) {
    CHECK(same_image(a.frames[f], b.frames[f]));
    CHECK(a.ground_truth[f].x == b.ground_truth[f].x);
  }
  CHECK_FALSE(same_image(a.frames[1], c.frames[1]));
}

TEST_CASE("flat noiseless scene paints exact colours") {
  const SceneSpec s = quiet_scene(Difficulty::Easy, 5);
  const SequenceRecipe r{s, 9, 3};
  const Trajectory t = plan_trajectory(r);
  const Image img = render_frame(r, t, 0);
  const double cx = t.centers[0][0][0], cy = t.centers[0][0][1];
  const int x = static_cast<int>(cx), y = static_cast<int>(cy);
  for (int c = 0; c < 3; ++c) {
    CHECK(img.at(c, y, x) == doctest::Approx(s.color[c]));
    CHECK(img.at(c, 0, 0) == doctest::Approx(s.background_color[c]));
  }
  std::size_t target_pixels = 0;
  for (int yy = 0; yy < img.height; ++yy)
    for (int xx = 0; xx < img.width; ++xx) target_pixels += img.at(0, yy, xx) == img.at(0, y, x) ? 1 : 0;
  const double area = s.shape == TargetShape::Square ? t.size * t.size : std::numbers::pi * t.size * t.size / 4;
  CHECK(std::abs(static_cast<double>(target_pixels) - area) < 0.15 * area);
}

TEST_CASE("zero motion keeps the target still and targets stay inside") {
  SceneSpec s = sample_scene(Difficulty::Easy, 2);
  s.motion_std = 0;
  const Sequence seq = generate_sequence(s, 6, 4);
  for (const BBox& b : seq.ground_truth) {
    CHECK(b.x == seq.ground_truth[0].x);
    CHECK(b.y == seq.ground_truth[0].y);
  }
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    SceneSpec m = sample_scene(seed % 2 ? Difficulty::Hard : Difficulty::Easy, seed);
    m.motion_std = 6;
    const SequenceRecipe r{m, seed, 30};
    const Trajectory t = plan_trajectory(r);
    for (int f = 0; f < r.length; ++f) {
      const BBox b = ground_truth(r, t, f);
      CHECK(b.x1() >= 0);
      CHECK(b.y1() >= 0);
      CHECK(b.x2() <= 1);
      CHECK(b.y2() <= 1);
    }
  }
}

TEST_CASE("crop covering the whole frame reproduces it") {
  const Sequence seq = generate_sequence(sample_scene(Difficulty::Hard, 1), 2, 1);
  const Image& frame = seq.frames[0];
  // side = factor * sqrt(w W h H) = W
  const BBox box{0.5, 0.5, 0.25, 0.25};
  CropTransform tf;
  const Image crop = crop_resize(frame, box, 4.0, frame.width, &tf);
  CHECK(tf.side == doctest::Approx(frame.width));
  double worst = 0;
  for (std::size_t i = 0; i < crop.data.size(); ++i) worst = std::max(worst, std::abs(double(crop.data[i]) - frame.data[i]));
  CHECK(worst < 1e-6);
}

TEST_CASE("crop round trip within one pixel") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 200; ++i) {
    const double w = 0.05 + 0.2 * u(rng), h = 0.05 + 0.2 * u(rng);
    const BBox b{w / 2 + (1 - w) * u(rng), h / 2 + (1 - h) * u(rng), w, h};
    const BBox prev{b.x + 0.05 * (u(rng) - 0.5), b.y + 0.05 * (u(rng) - 0.5), w, h};
    CropTransform tf;
    Image frame(3, 160, 160, 0.5f);
    crop_resize(frame, prev, 4.0, 128, &tf);
    const BBox back = tf.to_frame(tf.to_crop(b));
    CHECK(std::abs(back.x1() - b.x1()) * 160 <= 1.0);
    CHECK(std::abs(back.y2() - b.y2()) * 160 <= 1.0);
  }

  // Image-level check: the centroid of a bright square located in the crop
  // maps back onto the square's centre.
  for (int i = 0; i < 20; ++i) {
    const int W = 160, side = 20;
    const int x0 = 20 + static_cast<int>(100 * u(rng)), y0 = 20 + static_cast<int>(100 * u(rng));
    Image frame(1, W, W, 0.0f);
    for (int y = y0; y < y0 + side; ++y)
      for (int x = x0; x < x0 + side; ++x) frame.at(0, y, x) = 1.0f;
    const BBox truth{(x0 + side / 2.0) / W, (y0 + side / 2.0) / W, double(side) / W, double(side) / W};
    const BBox prev{truth.x + 0.04 * (u(rng) - 0.5), truth.y + 0.04 * (u(rng) - 0.5), truth.w, truth.h};
    CropTransform tf;
    const Image crop = crop_resize(frame, prev, 4.0, 128, &tf);
    double sx = 0, sy = 0, m = 0;
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) {
        const double v = crop.at(0, y, x);
        sx += v * (x + 0.5);
        sy += v * (y + 0.5);
        m += v;
      }
    const BBox found = tf.to_frame(BBox{sx / m / 128, sy / m / 128, truth.w, truth.h});
    CHECK(std::abs(found.x - truth.x) * W <= 1.0);
    CHECK(std::abs(found.y - truth.y) * W <= 1.0);
  }
}

TEST_CASE("out-of-frame area is padded with the mean colour") {
  // Left half 1, right half 0: mean 0.5, and a crop confined to the left
  // half sees only 1 inside the frame.
  const int W = 160;
  Image frame(1, W, W, 0.0f);
  for (int y = 0; y < W; ++y)
    for (int x = 0; x < W / 2; ++x) frame.at(0, y, x) = 1.0f;
  const double cx = 0.1, cy = 0.2, w = 0.1;  // side = 4 * 16 = 64 px
  CropTransform tf;
  const int out = 128;
  const Image crop = crop_resize(frame, BBox{cx, cy, w, w}, 4.0, out, &tf);
  const double side = tf.side;
  const double inside_x = std::min(tf.x0 + side, double(W)) - std::max(tf.x0, 0.0);
  const double inside_y = std::min(tf.y0 + side, double(W)) - std::max(tf.y0, 0.0);
  const double expected = 1.0 - inside_x * inside_y / (side * side);
  std::size_t padded = 0;
  for (float v : crop.data) padded += v == 0.5f ? 1 : 0;
  const double fraction = double(padded) / crop.data.size();
  CHECK(std::abs(fraction - expected) < 2.0 / out);
  CHECK(expected == doctest::Approx(0.25));
}

TEST_CASE("degenerate crop box is a tracking error") {
  Image frame(3, 32, 32, 0.1f);
  CHECK_THROWS_AS(crop_resize(frame, BBox{0.5, 0.5, 0, 0.1}, 2.0, 16, nullptr), TrackingError);
}

TEST_CASE("metric definitions") {
  const std::vector<int> ex(3, 6);
  TrackMetrics m = metrics_from_ious({1, 1, 1}, ex);
  CHECK(m.ao == doctest::Approx(1));
  CHECK(m.sr50 == 1);
  CHECK(m.sr75 == 1);
  CHECK(m.auc == doctest::Approx(20.0 / 21.0));
  m = metrics_from_ious({0.6, 0.6, 0.6}, ex);
  CHECK(m.sr50 == 1);
  CHECK(m.sr75 == 0);
  m = metrics_from_ious({0.2, 0.6, 0.9}, {4, 5, 6});
  CHECK(m.ao == doctest::Approx(0.5667).epsilon(1e-4));
  CHECK(m.sr50 == doctest::Approx(2.0 / 3.0));
  CHECK(m.mean_executed_blocks == doctest::Approx(5));
  // threshold sweep oracle
  double auc = 0;
  for (int k = 0; k <= 20; ++k) {
    int hits = 0;
    for (double v : {0.2, 0.6, 0.9}) hits += v > k * 0.05 + 1e-12 ? 1 : 0;
    auc += hits / 3.0 / 21.0;
  }
  CHECK(m.auc == doctest::Approx(auc));
  CHECK_THROWS_AS(metrics_from_ious({}, {}), ContractError);
}

TEST_CASE("eval_metrics skips the initial frame") {
  TrackResult r;
  for (double v : {1.0, 0.2, 0.4}) {
    FrameResult f;
    f.iou = v;
    r.frames.push_back(f);
  }
  const TrackMetrics m = eval_metrics({r});
  CHECK(m.frames == 2);
  CHECK(m.ao == doctest::Approx(0.3));
}

TEST_CASE("tracking traces, determinism and exports") {
  Config cfg = testing::tiny_config();
  Model model(cfg.model, 5);
  model.attach_bdms(cfg.bypass.n_enf, 6);
  const SequenceRecipe r = dataset_recipe(cfg.data, "eval", 1, 0);
  const Sequence seq = generate_sequence(r.spec, r.length, r.seed);
  const GatingPolicy policy{0.5, cfg.bypass.n_enf};
  const TrackResult a = track_sequence(model, seq, policy), b = track_sequence(model, seq, policy);
  REQUIRE(a.frames.size() == seq.frames.size());
  for (std::size_t f = 0; f < a.frames.size(); ++f) {
    CHECK(a.frames[f].trace.size() == static_cast<std::size_t>(cfg.model.depth));
    CHECK(a.frames[f].predicted.x == b.frames[f].predicted.x);
    CHECK(a.frames[f].predicted.w == b.frames[f].predicted.w);
    CHECK(a.frames[f].predicted.w > 0);
    CHECK(a.frames[f].trace.executed_count() == b.frames[f].trace.executed_count());
  }
  CHECK(a.frames[0].iou == doctest::Approx(1.0));

  std::ostringstream csv;
  write_track_csv(csv, seq, a);
  std::istringstream lines(csv.str());
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) ++n;
  CHECK(n == static_cast<int>(seq.frames.size()) + 1);
  const std::string json = metrics_json(eval_metrics({a}));
  for (const char* key : {"\"ao\"", "\"sr_0.5\"", "\"sr_0.75\"", "\"auc\"", "\"mean_executed_blocks\""})
    CHECK(json.find(key) != std::string::npos);
}

TEST_CASE("evaluation and training seeds are disjoint") {
  const DataConfig d;
  for (std::uint64_t i = 0; i < 50; ++i) {
    CHECK(dataset_recipe(d, "eval", 1, i).seed != dataset_recipe(d, "train", 1, i).seed);
    CHECK(namespaced_seed("eval", 1, i) != namespaced_seed("train", 1, i));
  }
}

TEST_CASE("training pairs place the target at the labelled cell") {
  const Config cfg = testing::tiny_config();
  for (std::uint64_t s = 0; s < 30; ++s) {
    const TrainingPair p = make_training_pair(cfg, s);
    const int g = cfg.model.grid();
    CHECK(p.template_img.height == cfg.model.template_size);
    CHECK(p.search_img.height == cfg.model.search_size);
    CHECK(p.col == std::clamp(static_cast<int>(p.target.x * g), 0, g - 1));
    CHECK(p.row == std::clamp(static_cast<int>(p.target.y * g), 0, g - 1));
    // centre jitter of half the target size at search factor 4
    CHECK(std::abs(p.target.x - 0.5) < 0.2);
    CHECK(std::abs(p.target.y - 0.5) < 0.2);
  }
  const TrainingPair e = make_training_pair(cfg, 3, Difficulty::Hard);
  CHECK(e.difficulty == Difficulty::Hard);
}

TEST_CASE("ground-truth-fed search is at least as accurate as free running") {
  Config cfg = testing::tiny_config();
  Model model = train_stage(cfg, nullptr);
  const GatingPolicy policy{0.5, cfg.bypass.n_enf};
  double fed = 0, free = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SequenceRecipe r = dataset_recipe(cfg.data, "eval", seed, 0);
    const Sequence seq = generate_sequence(r.spec, r.length, r.seed);
    TrackOptions o;
    free += eval_metrics({track_sequence(model, seq, policy, o)}).ao;
    o.ground_truth_fed = true;
    fed += eval_metrics({track_sequence(model, seq, policy, o)}).ao;
  }
  MESSAGE("mean AO over 20 seeds: gt-fed " << fed / 20 << ", free-running " << free / 20);
  CHECK(fed >= free);
}
