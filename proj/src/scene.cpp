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


#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <random>

#include "abtrack/errors.hpp"
#include "abtrack/tracker.hpp"
#include "json.hpp"

namespace abtrack {

void SceneSpec::validate() const {
  if (frame_size < 8) throw ConfigError("scene: frame size must be at least 8 pixels");
  if (!(size_min > 0) || size_max < size_min) throw ConfigError("scene: invalid target size range");
  if (size_max + 2 > frame_size) {
    throw ConfigError("scene: target size " + std::to_string(size_max) + " does not fit a " +
                      std::to_string(frame_size) + " pixel frame");
  }
  if (distractor_count < 0) throw ConfigError("scene: negative distractor count");
  if (noise_std < 0 || motion_std < 0) throw ConfigError("scene: negative noise or motion");
}

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  // splitmix64 finaliser over the running hash.
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

std::array<float, 3> random_color(std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.05f, 0.95f);
  return {u(rng), u(rng), u(rng)};
}

float color_distance(const std::array<float, 3>& a, const std::array<float, 3>& b) {
  return std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
}

bool inside(TargetShape shape, double px, double py, double cx, double cy, double size) {
  const double h = size / 2;
  if (shape == TargetShape::Square) return std::abs(px - cx) <= h && std::abs(py - cy) <= h;
  return (px - cx) * (px - cx) + (py - cy) * (py - cy) <= h * h;
}

double reflect(double c, double lo, double hi) {
  if (hi <= lo) return lo;
  for (int i = 0; i < 4 && (c < lo || c > hi); ++i) c = c < lo ? 2 * lo - c : 2 * hi - c;
  return std::clamp(c, lo, hi);
}

}  // namespace

std::uint64_t namespaced_seed(const std::string& space, std::uint64_t seed, std::uint64_t index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : space) h = mix(h, c);
  return mix(mix(h, seed), index);
}

SceneSpec sample_scene(Difficulty difficulty, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SceneSpec s;
  s.difficulty = difficulty;
  s.shape = std::uniform_int_distribution<int>(0, 1)(rng) ? TargetShape::Circle : TargetShape::Square;
  s.background_color = random_color(rng);
  do {
    s.color = random_color(rng);
  } while (color_distance(s.color, s.background_color) < 0.9f);
  if (difficulty == Difficulty::Hard) {
    s.background = Background::Textured;
    s.distractor_count = std::uniform_int_distribution<int>(4, 6)(rng);
    s.noise_std = 0.04;
  } else {
    s.background = Background::Flat;
    s.distractor_count = 0;
    s.noise_std = 0.02;
  }
  return s;
}

Trajectory plan_trajectory(const SequenceRecipe& recipe) {
  const SceneSpec& s = recipe.spec;
  s.validate();
  if (recipe.length < 2) throw ConfigError("sequence length must be at least 2");
  std::mt19937_64 rng(mix(recipe.seed, 0x7a11));
  std::uniform_real_distribution<double> size_d(s.size_min, s.size_max);
  std::normal_distribution<double> step(0.0, 1.0);
  Trajectory t;
  const int objects = 1 + s.distractor_count;
  t.centers.resize(static_cast<std::size_t>(objects));
  for (int o = 0; o < objects; ++o) {
    const double size = size_d(rng);
    t.object_sizes.push_back(size);
    const double lo = size / 2 + 1, hi = s.frame_size - size / 2 - 1;
    std::uniform_real_distribution<double> pos(lo, hi);
    std::array<double, 2> c{pos(rng), pos(rng)};
    auto& path = t.centers[static_cast<std::size_t>(o)];
    for (int f = 0; f < recipe.length; ++f) {
      if (f > 0) {
        c[0] = reflect(c[0] + s.motion_std * step(rng), lo, hi);
        c[1] = reflect(c[1] + s.motion_std * step(rng), lo, hi);
      }
      path.push_back(c);
    }
  }
  t.size = t.object_sizes.front();
  return t;
}

Image render_frame(const SequenceRecipe& recipe, const Trajectory& traj, int frame) {
  const SceneSpec& s = recipe.spec;
  const int n = s.frame_size;
  Image img(3, n, n);
  std::mt19937_64 tex_rng(mix(recipe.seed, 0x7e47));
  std::uniform_real_distribution<double> period(6.0, 24.0), phase(0.0, 2 * std::numbers::pi);
  double px[3], py[3], ph[3], amp = s.background == Background::Textured ? 0.25 : 0.0;
  for (int c = 0; c < 3; ++c) {
    px[c] = 2 * std::numbers::pi / period(tex_rng);
    py[c] = 2 * std::numbers::pi / period(tex_rng);
    ph[c] = phase(tex_rng);
  }
  const TargetShape other = s.shape == TargetShape::Square ? TargetShape::Circle : TargetShape::Square;
  std::mt19937_64 noise_rng(mix(recipe.seed, 0x4015e000ULL + static_cast<std::uint64_t>(frame)));
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto f = static_cast<std::size_t>(frame);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double cx = x + 0.5, cy = y + 0.5;
      std::array<float, 3> col = s.background_color;
      bool painted = false;
      if (inside(s.shape, cx, cy, traj.centers[0][f][0], traj.centers[0][f][1], traj.object_sizes[0])) {
        col = s.color;
        painted = true;
      }
      for (std::size_t o = 1; !painted && o < traj.centers.size(); ++o) {
        if (inside(other, cx, cy, traj.centers[o][f][0], traj.centers[o][f][1], traj.object_sizes[o])) {
          col = s.color;
          painted = true;
        }
      }
      for (int c = 0; c < 3; ++c) {
        double v = col[static_cast<std::size_t>(c)];
        if (!painted && amp > 0) v += amp * std::sin(px[c] * cx + ph[c]) * std::sin(py[c] * cy);
        if (s.noise_std > 0) v += s.noise_std * noise(noise_rng);
        img.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  return img;
}

BBox ground_truth(const SequenceRecipe& recipe, const Trajectory& traj, int frame) {
  const double n = recipe.spec.frame_size;
  const auto& c = traj.centers[0][static_cast<std::size_t>(frame)];
  return BBox{c[0] / n, c[1] / n, traj.size / n, traj.size / n};
}

Sequence generate_sequence(const SceneSpec& spec, int length, std::uint64_t seed) {
  SequenceRecipe r{spec, seed, length};
  Trajectory t = plan_trajectory(r);
  Sequence s;
  for (int f = 0; f < length; ++f) {
    s.frames.push_back(render_frame(r, t, f));
    s.ground_truth.push_back(ground_truth(r, t, f));
  }
  return s;
}

BBox CropTransform::to_frame(const BBox& b) const {
  return BBox{(x0 + b.x * side) / frame_width, (y0 + b.y * side) / frame_height, b.w * side / frame_width,
              b.h * side / frame_height};
}

BBox CropTransform::to_crop(const BBox& b) const {
  return BBox{(b.x * frame_width - x0) / side, (b.y * frame_height - y0) / side, b.w * frame_width / side,
              b.h * frame_height / side};
}

Image crop_resize(const Image& frame, const BBox& box, double factor, int out_size, CropTransform* tf) {
  if (!(box.w > 0) || !(box.h > 0)) throw TrackingError("crop: degenerate box (zero size)");
  if (factor < 1.0) throw ContractError("crop: factor must be at least 1");
  const int W = frame.width, H = frame.height;
  const double side = factor * std::sqrt(box.w * W * box.h * H);
  const double x0 = box.x * W - side / 2, y0 = box.y * H - side / 2;
  if (tf) *tf = CropTransform{x0, y0, side, W, H};
  std::array<double, 3> mean{};
  const std::size_t plane = static_cast<std::size_t>(W) * H;
  for (int c = 0; c < frame.channels && c < 3; ++c) {
    double s = 0;
    for (std::size_t i = 0; i < plane; ++i) s += frame.data[static_cast<std::size_t>(c) * plane + i];
    mean[static_cast<std::size_t>(c)] = s / static_cast<double>(plane);
  }
  Image out(frame.channels, out_size, out_size);
  const double scale = side / out_size;
  for (int i = 0; i < out_size; ++i) {
    const double sy = y0 + (i + 0.5) * scale - 0.5;
    const int yl = static_cast<int>(std::floor(sy));
    const double fy = sy - yl;
    for (int j = 0; j < out_size; ++j) {
      const double sx = x0 + (j + 0.5) * scale - 0.5;
      const int xl = static_cast<int>(std::floor(sx));
      const double fx = sx - xl;
      for (int c = 0; c < frame.channels; ++c) {
        auto px = [&](int y, int x) -> double {
          if (x < 0 || y < 0 || x >= W || y >= H) return mean[static_cast<std::size_t>(std::min(c, 2))];
          return frame.at(c, y, x);
        };
        const double v = (1 - fy) * ((1 - fx) * px(yl, xl) + fx * px(yl, xl + 1)) +
                         fy * ((1 - fx) * px(yl + 1, xl) + fx * px(yl + 1, xl + 1));
        out.at(c, i, j) = static_cast<float>(v);
      }
    }
  }
  return out;
}

CropResult crop_regions(const Image& frame, const BBox& prev_box, double template_factor, double search_factor,
                        int template_size, int search_size) {
  CropResult r;
  r.template_img = crop_resize(frame, prev_box, template_factor, template_size, &r.template_tf);
  r.search_img = crop_resize(frame, prev_box, search_factor, search_size, &r.search_tf);
  return r;
}

TrackMetrics metrics_from_ious(const std::vector<double>& ious, const std::vector<int>& executed) {
  if (ious.empty()) throw ContractError("eval_metrics: no frames");
  TrackMetrics m;
  m.frames = ious.size();
  const double n = static_cast<double>(ious.size());
  for (double v : ious) m.ao += v;
  m.ao /= n;
  auto sr = [&](double t) {
    std::size_t k = 0;
    for (double v : ious) k += v > t ? 1 : 0;
    return static_cast<double>(k) / n;
  };
  m.sr50 = sr(0.5);
  m.sr75 = sr(0.75);
  for (int i = 0; i <= 20; ++i) m.auc += sr(i * 0.05);
  m.auc /= 21.0;
  if (!executed.empty()) {
    double s = 0;
    for (int e : executed) s += e;
    m.mean_executed_blocks = s / static_cast<double>(executed.size());
  }
  return m;
}

TrackMetrics eval_metrics(const std::vector<TrackResult>& results) {
  std::vector<double> ious;
  std::vector<int> executed;
  for (const auto& r : results)
    for (std::size_t f = 1; f < r.frames.size(); ++f) {
      ious.push_back(r.frames[f].iou);
      executed.push_back(r.frames[f].trace.executed_count());
    }
  return metrics_from_ious(ious, executed);
}

void write_track_csv(std::ostream& os, const Sequence& seq, const TrackResult& result) {
  os << "frame,gt_x,gt_y,gt_w,gt_h,pred_x,pred_y,pred_w,pred_h,iou,executed_count\n";
  char buf[256];
  for (std::size_t f = 0; f < result.frames.size(); ++f) {
    const BBox& g = seq.ground_truth[f];
    const FrameResult& r = result.frames[f];
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n", f, g.x, g.y, g.w, g.h,
                  r.predicted.x, r.predicted.y, r.predicted.w, r.predicted.h, r.iou, r.trace.executed_count());
    os << buf;
  }
}

std::string metrics_json(const TrackMetrics& m) {
  nlohmann::ordered_json j;
  j["ao"] = m.ao;
  j["sr_0.5"] = m.sr50;
  j["sr_0.75"] = m.sr75;
  j["auc"] = m.auc;
  j["mean_executed_blocks"] = m.mean_executed_blocks;
  j["frames"] = m.frames;
  return j.dump(2);
}

}  // namespace abtrack
