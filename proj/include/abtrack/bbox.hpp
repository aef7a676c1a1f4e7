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

#include <algorithm>

namespace abtrack {

// Axis-aligned box as center and size, in whatever normalised frame the
// caller uses (search-crop fraction or full-frame pixels).
struct BBox {
  double x = 0, y = 0, w = 0, h = 0;

  double x1() const { return x - w / 2; }
  double y1() const { return y - h / 2; }
  double x2() const { return x + w / 2; }
  double y2() const { return y + h / 2; }
  double area() const { return std::max(0.0, w) * std::max(0.0, h); }
};

inline double intersection(const BBox& a, const BBox& b) {
  const double iw = std::max(0.0, std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1()));
  const double ih = std::max(0.0, std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1()));
  return iw * ih;
}

inline double iou(const BBox& a, const BBox& b) {
  const double i = intersection(a, b);
  const double u = a.area() + b.area() - i;
  return u > 0 ? i / u : 0.0;
}

// 1 - GIoU, in [0, 2]. Defined as 1 when the enclosing box has zero area.
inline double giou_loss(const BBox& a, const BBox& b) {
  const double i = intersection(a, b);
  const double u = a.area() + b.area() - i;
  const double c = (std::max(a.x2(), b.x2()) - std::min(a.x1(), b.x1())) *
                   (std::max(a.y2(), b.y2()) - std::min(a.y1(), b.y1()));
  if (c <= 0) return 1.0;
  const double iou_v = u > 0 ? i / u : 0.0;
  return 1.0 - (iou_v - (c - u) / c);
}

}  // namespace abtrack
