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

#include <vector>

#include "abtrack/tape.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

// Peak-normalised Gaussian on a G x G grid (row-major), sigma = max(1, G/16).
Tensor gaussian_target(int grid, int row, int col);

// Penalty-reduced focal loss (alpha = 2, beta = 4) normalised by the number
// of cells with target exactly 1. Predictions are clamped to
// [1e-6, 1 - 1e-6]; the clamped range has zero gradient.
Var focal_loss(Var score, const Tensor& target);

// 1 - GIoU of two (x, y, w, h) 4-vectors with a hand-derived backward.
Var giou_loss(Var a, Var b);

// Mean absolute difference over the four coordinates.
Var l1_loss(Var a, Var b);

struct SparsityContext {
  double tau0 = 0.4;
  double zeta = 0.1;
  double batch_mean_iou_loss = 0.0;
};

// clip(tau0 + zeta * (iou_loss - batch mean), 0, 1); a constant.
double sparsity_target(double iou_loss, const SparsityContext& ctx);

// |mean(p) - tau| over the gated layers' probabilities.
Var sparsity_loss(const std::vector<Var>& probabilities, double tau, int n_enf, int depth);

struct LossWeights {
  double lambda_iou = 2.0;
  double lambda_l1 = 5.0;
  double gamma = 5.0;
};

// L_cls + lambda_iou L_iou + lambda_l1 L_l1 + gamma L_spar. A non-finite term
// raises TrainingError naming it. `spar` may be left invalid when no
// decision modules are attached.
Var overall_loss(Var cls, Var iou, Var l1, Var spar, const LossWeights& w);

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
