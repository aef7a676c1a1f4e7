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


#include "abtrack/losses.hpp"

#include <algorithm>
#include <cmath>

#include "abtrack/errors.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

Tensor gaussian_target(int grid, int row, int col) {
  if (grid <= 0 || row < 0 || col < 0 || row >= grid || col >= grid) {
    throw ContractError("gaussian_target: cell outside the grid");
  }
  const double sigma = std::max(1.0, grid / 16.0);
  Tensor t(Shape{grid * grid, 1});
  for (int r = 0; r < grid; ++r)
    for (int c = 0; c < grid; ++c) {
      const double d2 = (r - row) * (r - row) + (c - col) * (c - col);
      t.at(r * grid + c, 0) = d2 == 0 ? real(1) : static_cast<real>(std::exp(-d2 / (2 * sigma * sigma)));
    }
  return t;
}

Var focal_loss(Var score, const Tensor& target) {
  const Tensor& p = score.value();
  if (p.size() != target.size()) {
    throw DimensionError("focal_loss: score " + shape_str(p.shape()) + " vs target " + shape_str(target.shape()));
  }
  constexpr double lo = 1e-6, hi = 1.0 - 1e-6;
  double total = 0;
  int positives = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(static_cast<double>(p[i]), lo, hi);
    const double t = target[i];
    if (t == 1.0) {
      ++positives;
      total += (1 - q) * (1 - q) * std::log(q);
    } else {
      total += std::pow(1 - t, 4) * q * q * std::log(1 - q);
    }
  }
  const double norm = std::max(1, positives);
  const int ip = score.id();
  Tensor tgt = target;
  return score.tape()->push(Tensor::scalar(static_cast<real>(-total / norm)), {ip}, [ip, tgt, norm](Tape& tape, int self) {
    if (!tape.needs_grad(ip)) return;
    const Tensor& pv = tape.value(ip);
    Tensor& g = tape.grad_buffer(ip);
    const double up = tape.grad(self)[0];
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double q = pv[i];
      if (q < lo || q > hi) continue;
      const double t = tgt[i];
      double d;
      if (t == 1.0) d = -2 * (1 - q) * std::log(q) + (1 - q) * (1 - q) / q;
      else d = std::pow(1 - t, 4) * (2 * q * std::log(1 - q) - q * q / (1 - q));
      g[i] += static_cast<real>(-up * d / norm);
    }
  });
}

namespace {

struct GiouParts {
  double loss;
  double grad_a[4];
  double grad_b[4];
};

// Forward value and gradient of 1 - GIoU for boxes a, b given as (x, y, w, h).
GiouParts giou_with_grad(const double* a, const double* b) {
  GiouParts r{};
  double ga[4] = {}, gb[4] = {};
  // Corner coordinates per axis: lo = c - s/2, hi = c + s/2.
  double a_lo[2], a_hi[2], b_lo[2], b_hi[2], inter[2], encl[2];
  for (int k = 0; k < 2; ++k) {
    a_lo[k] = a[k] - a[k + 2] / 2;
    a_hi[k] = a[k] + a[k + 2] / 2;
    b_lo[k] = b[k] - b[k + 2] / 2;
    b_hi[k] = b[k] + b[k + 2] / 2;
    inter[k] = std::min(a_hi[k], b_hi[k]) - std::max(a_lo[k], b_lo[k]);
    encl[k] = std::max(a_hi[k], b_hi[k]) - std::min(a_lo[k], b_lo[k]);
  }
  const double iw = std::max(0.0, inter[0]), ih = std::max(0.0, inter[1]);
  const double i_area = iw * ih;
  const double area_a = a[2] * a[3], area_b = b[2] * b[3];
  const double u = area_a + area_b - i_area;
  const double c = encl[0] * encl[1];
  if (c <= 0) {
    r.loss = 1.0;
    return r;
  }
  const double iou_v = u > 0 ? i_area / u : 0.0;
  r.loss = 2.0 - iou_v - u / c;

  // Partials of the loss with respect to I, the two areas and C.
  const double g_i = (u > 0 ? -(u + i_area) / (u * u) : 0.0) + 1.0 / c;
  const double g_area = (u > 0 ? i_area / (u * u) : 0.0) - 1.0 / c;
  const double g_c = u / (c * c);

  ga[2] += g_area * a[3];
  ga[3] += g_area * a[2];
  gb[2] += g_area * b[3];
  gb[3] += g_area * b[2];

  // Gradients on corner coordinates, [lo, hi] per axis.
  double da_lo[2] = {}, da_hi[2] = {}, db_lo[2] = {}, db_hi[2] = {};
  const double other_inter[2] = {ih, iw};
  const double other_encl[2] = {encl[1], encl[0]};
  for (int k = 0; k < 2; ++k) {
    if (inter[k] > 0) {
      const double g = g_i * other_inter[k];
      (a_hi[k] <= b_hi[k] ? da_hi[k] : db_hi[k]) += g;
      (a_lo[k] >= b_lo[k] ? da_lo[k] : db_lo[k]) -= g;
    }
    const double g = g_c * other_encl[k];
    (a_hi[k] >= b_hi[k] ? da_hi[k] : db_hi[k]) += g;
    (a_lo[k] <= b_lo[k] ? da_lo[k] : db_lo[k]) -= g;
  }
  for (int k = 0; k < 2; ++k) {
    ga[k] += da_lo[k] + da_hi[k];
    ga[k + 2] += (da_hi[k] - da_lo[k]) / 2;
    gb[k] += db_lo[k] + db_hi[k];
    gb[k + 2] += (db_hi[k] - db_lo[k]) / 2;
  }
  std::copy(ga, ga + 4, r.grad_a);
  std::copy(gb, gb + 4, r.grad_b);
  return r;
}

void check_box(const Var& v, const char* which) {
  if (v.value().size() != 4) throw DimensionError(std::string("giou_loss: ") + which + " is not a 4-vector");
}

}  // namespace

Var giou_loss(Var a, Var b) {
  check_box(a, "first box");
  check_box(b, "second box");
  double av[4], bv[4];
  for (int k = 0; k < 4; ++k) {
    av[k] = a.value()[static_cast<std::size_t>(k)];
    bv[k] = b.value()[static_cast<std::size_t>(k)];
  }
  if (av[2] < 0 || av[3] < 0 || bv[2] < 0 || bv[3] < 0) throw ContractError("giou_loss: negative box size");
  const GiouParts parts = giou_with_grad(av, bv);
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(Tensor::scalar(static_cast<real>(parts.loss)), {ia, ib}, [ia, ib, parts](Tape& t, int self) {
    const double up = t.grad(self)[0];
    if (t.needs_grad(ia)) {
      Tensor& g = t.grad_buffer(ia);
      for (int k = 0; k < 4; ++k) g[static_cast<std::size_t>(k)] += static_cast<real>(up * parts.grad_a[k]);
    }
    if (t.needs_grad(ib)) {
      Tensor& g = t.grad_buffer(ib);
      for (int k = 0; k < 4; ++k) g[static_cast<std::size_t>(k)] += static_cast<real>(up * parts.grad_b[k]);
    }
  });
}

Var l1_loss(Var a, Var b) { return mean(abs(sub(a, b))); }

double sparsity_target(double iou_loss, const SparsityContext& ctx) {
  return std::clamp(ctx.tau0 + ctx.zeta * (iou_loss - ctx.batch_mean_iou_loss), 0.0, 1.0);
}

Var sparsity_loss(const std::vector<Var>& probabilities, double tau, int n_enf, int depth) {
  if (probabilities.empty()) throw ContractError("sparsity_loss: no gated layers");
  if (static_cast<int>(probabilities.size()) != depth - n_enf) {
    throw ContractError("sparsity_loss: " + std::to_string(probabilities.size()) + " probabilities for " +
                        std::to_string(depth - n_enf) + " gated layers");
  }
  return abs(add_scalar(mean(stack(probabilities)), static_cast<real>(-tau)));
}

Var overall_loss(Var cls, Var iou, Var l1, Var spar, const LossWeights& w) {
  auto check = [](const Var& v, const char* name) {
    if (!v.value().all_finite()) throw TrainingError(std::string("non-finite loss term: ") + name);
  };
  check(cls, "focal");
  check(iou, "giou");
  check(l1, "l1");
  Var total = add(add(cls, scale(iou, static_cast<real>(w.lambda_iou))), scale(l1, static_cast<real>(w.lambda_l1)));
  if (spar.valid()) {
    check(spar, "sparsity");
    total = add(total, scale(spar, static_cast<real>(w.gamma)));
  }
  return total;
}

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
