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


#include "abtrack/head.hpp"

#include <cmath>

#include "abtrack/errors.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

namespace {

Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (real& v : t.values()) v = static_cast<real>(u(rng));
  return t;
}

}  // namespace

PredictionHead::PredictionHead(int in_channels, int channels, int stages, std::mt19937_64& rng)
    : in_channels_(in_channels), channels_(channels) {
  if (stages < 0 || channels <= 0 || in_channels <= 0) throw ConfigError("head: invalid channel configuration");
  int cin = in_channels;
  for (int i = 0; i < stages; ++i) {
    const std::string p = "head.stage" + std::to_string(i);
    conv.emplace_back(p + ".conv", uniform({9 * cin, channels}, 1.0 / std::sqrt(9.0 * cin), rng));
    gamma.emplace_back(p + ".gamma", Tensor(Shape{channels}, 1.0f));
    beta.emplace_back(p + ".beta", Tensor(Shape{channels}, 0.0f));
    cin = channels;
  }
  const double b = 1.0 / std::sqrt(static_cast<double>(cin));
  score_w = Parameter("head.score.w", uniform({cin, 1}, b, rng));
  // Starts the score map near 0.1 so the many negative cells do not dominate.
  score_b = Parameter("head.score.b", Tensor(Shape{1}, -2.19f));
  offset_w = Parameter("head.offset.w", uniform({cin, 2}, b, rng));
  offset_b = Parameter("head.offset.b", Tensor(Shape{2}, 0.0f));
  size_w = Parameter("head.size.w", uniform({cin, 2}, b, rng));
  size_b = Parameter("head.size.b", Tensor(Shape{2}, 0.0f));
}

std::vector<Parameter*> PredictionHead::parameters() {
  std::vector<Parameter*> ps;
  for (std::size_t i = 0; i < conv.size(); ++i) {
    ps.push_back(&conv[i]);
    ps.push_back(&gamma[i]);
    ps.push_back(&beta[i]);
  }
  for (Parameter* p : {&score_w, &score_b, &offset_w, &offset_b, &size_w, &size_b}) ps.push_back(p);
  return ps;
}

Var conv3x3(Var x, int grid, Var weight) { return matmul(im2col3x3(x, grid, grid), weight); }

Var channel_norm(Var x, Var gamma, Var beta) {
  Tape& tape = *x.tape();
  const int cells = x.value().rows();
  Var t = transpose(x);
  Var n = layer_norm(t, tape.constant(Tensor(Shape{cells}, 1.0f)), tape.constant(Tensor(Shape{cells}, 0.0f)));
  return add_row(mul_row(transpose(n), gamma), beta);
}

HeadOutput head_forward(Var search_tokens, PredictionHead& head) {
  Tape& tape = *search_tokens.tape();
  const int n = search_tokens.value().rows();
  const int g = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (g * g != n) throw ContractError("head_forward: " + std::to_string(n) + " search tokens do not form a square grid");
  if (search_tokens.value().cols() != head.in_channels()) {
    throw DimensionError("head_forward: token dim " + std::to_string(search_tokens.value().cols()) +
                         " != head input channels " + std::to_string(head.in_channels()));
  }
  Var x = search_tokens;
  for (int i = 0; i < head.stages(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    x = relu(channel_norm(conv3x3(x, g, tape.param(head.conv[k])), tape.param(head.gamma[k]), tape.param(head.beta[k])));
  }
  HeadOutput out;
  out.grid = g;
  out.score = sigmoid(add_row(matmul(x, tape.param(head.score_w)), tape.param(head.score_b)));
  out.offset = sigmoid(add_row(matmul(x, tape.param(head.offset_w)), tape.param(head.offset_b)));
  out.size = sigmoid(add_row(matmul(x, tape.param(head.size_w)), tape.param(head.size_b)));
  return out;
}

int argmax_cell(const Tensor& score) {
  int best = 0;
  for (std::size_t i = 1; i < score.size(); ++i)
    if (score[i] > score[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

BBox decode_bbox(const HeadOutput& out) {
  const int cell = argmax_cell(out.score.value());
  const int g = out.grid;
  const Tensor& o = out.offset.value();
  const Tensor& s = out.size.value();
  return BBox{(cell % g + static_cast<double>(o.at(cell, 0))) / g, (cell / g + static_cast<double>(o.at(cell, 1))) / g,
              static_cast<double>(s.at(cell, 0)), static_cast<double>(s.at(cell, 1))};
}

Var decode_bbox_var(const HeadOutput& out) { return decode_bbox_at(out, argmax_cell(out.score.value())); }

Var decode_bbox_at(const HeadOutput& out, int cell) {
  if (cell < 0 || cell >= out.grid * out.grid) throw ContractError("decode_bbox_at: cell out of range");
  const int g = out.grid;
  const auto c = static_cast<std::size_t>(cell);
  const real inv = static_cast<real>(1.0 / g);
  Var x = scale(add_scalar(element(out.offset, 2 * c), static_cast<real>(cell % g)), inv);
  Var y = scale(add_scalar(element(out.offset, 2 * c + 1), static_cast<real>(cell / g)), inv);
  return stack({x, y, element(out.size, 2 * c), element(out.size, 2 * c + 1)});
}

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
