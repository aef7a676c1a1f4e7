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

#include <random>
#include <string>
#include <vector>

#include "abtrack/bbox.hpp"
#include "abtrack/tape.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

// Conv3x3 -> per-channel normalisation -> ReLU stages over the search token
// grid, then 1x1 sigmoid branches for score (1), offset (2) and size (2).
class PredictionHead {
 public:
  PredictionHead() = default;
  PredictionHead(int in_channels, int channels, int stages, std::mt19937_64& rng);

  int in_channels() const { return in_channels_; }
  int channels() const { return channels_; }
  int stages() const { return static_cast<int>(conv.size()); }

  std::vector<Parameter*> parameters();

  std::vector<Parameter> conv;   // (9 * C_in) x C_out, columns of im2col ordered (ky, kx, c)
  std::vector<Parameter> gamma;  // C_out
  std::vector<Parameter> beta;   // C_out
  Parameter score_w, score_b;    // C x 1, 1
  Parameter offset_w, offset_b;  // C x 2, 2
  Parameter size_w, size_b;      // C x 2, 2

 private:
  int in_channels_ = 0;
  int channels_ = 0;
};

// Maps flattened row-major over the G x G grid: cell (row, col) is row
// row * G + col of each matrix.
struct HeadOutput {
  Var score;   // G^2 x 1
  Var offset;  // G^2 x 2, (o_x, o_y)
  Var size;    // G^2 x 2, (w, h)
  int grid = 0;
};

HeadOutput head_forward(Var search_tokens, PredictionHead& head);

// Cell with the highest score; ties go to the lowest row, then lowest column.
int argmax_cell(const Tensor& score);

// Box in search-crop fraction: center ((col + o_x) / G, (row + o_y) / G),
// size s at the argmax cell.
BBox decode_bbox(const HeadOutput& out);
// Same box as a differentiable 4-vector (x, y, w, h); the cell choice itself
// is not differentiable.
Var decode_bbox_var(const HeadOutput& out);
// Box read at a given cell (row * G + col) instead of the argmax.
Var decode_bbox_at(const HeadOutput& out, int cell);

// Convolution and normalisation building blocks, exposed for tests.
Var conv3x3(Var x, int grid, Var weight);
Var channel_norm(Var x, Var gamma, Var beta);

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
