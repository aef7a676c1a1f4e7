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

#include "abtrack/tracker.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

namespace {

// Keeps a prediction usable as the next crop centre: at least two pixels wide
// and centred inside the frame.
BBox sanitize(BBox b, const Image& frame) {
  const double min_w = 2.0 / frame.width, min_h = 2.0 / frame.height;
  if (!std::isfinite(b.x) || !std::isfinite(b.y)) b.x = b.y = 0.5;
  if (!std::isfinite(b.w) || b.w < min_w) b.w = min_w;
  if (!std::isfinite(b.h) || b.h < min_h) b.h = min_h;
  b.w = std::min(b.w, 1.0);
  b.h = std::min(b.h, 1.0);
  b.x = std::clamp(b.x, 0.0, 1.0);
  b.y = std::clamp(b.y, 0.0, 1.0);
  return b;
}

}  // namespace

TrackResult track_sequence(Model& model, const Sequence& seq, const GatingPolicy& policy, const TrackOptions& options) {
  const ModelConfig& mc = model.cfg;
  TrackResult result;
  const Image tmpl = crop_resize(seq.frames.front(), seq.ground_truth.front(), options.template_factor, mc.template_size, nullptr);
  BBox prev = seq.ground_truth.front();
  GatedOptions go;
  go.mode = GateMode::Infer;
  go.forced_skip = options.forced_skip;
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    const BBox& centre = (f == 0 || options.ground_truth_fed) ? seq.ground_truth[f] : prev;
    CropTransform tf;
    const Image search = crop_resize(seq.frames[f], centre, options.search_factor, mc.search_size, &tf);
    Tape tape(false);
    ForwardOut out = model_forward(tape, model, tmpl, search, policy, go);
    FrameResult fr;
    fr.trace = out.backbone.trace;
    fr.predicted = f == 0 ? seq.ground_truth[0] : sanitize(tf.to_frame(decode_bbox(out.head)), seq.frames[f]);
    fr.iou = iou(fr.predicted, seq.ground_truth[f]);
    prev = fr.predicted;
    result.frames.push_back(std::move(fr));
  }
  return result;
}

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
