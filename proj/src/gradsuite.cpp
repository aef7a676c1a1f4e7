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


#include "abtrack/gradsuite.hpp"

#include <random>

#include "abtrack/bypass.hpp"
#include "abtrack/head.hpp"
#include "abtrack/losses.hpp"
#include "abtrack/model.hpp"
#include "abtrack/pruning.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

namespace {

constexpr real kStep = static_cast<real>(1e-5);

Tensor uniform(Shape s, std::mt19937_64& rng, double lo, double hi) {
  Tensor t(std::move(s));
  std::uniform_real_distribution<double> u(lo, hi);
  for (real& v : t.values()) v = static_cast<real>(u(rng));
  return t;
}

Var probe(Var x, const Tensor& r) { return sum(mul(x, x.tape()->constant(r))); }

Image random_image(int c, int h, int w, std::mt19937_64& rng) {
  Image img(c, h, w);
  std::uniform_real_distribution<float> u(0, 1);
  for (float& v : img.data) v = u(rng);
  return img;
}

}  // namespace

std::vector<GradSuiteEntry> gradient_suite(std::uint64_t seed) {
  std::vector<GradSuiteEntry> out;
  std::mt19937_64 rng(seed);

  {
    BypassDecisionModule bdm("bdm", 8, rng);
    bdm.weight.value = uniform({8, 1}, rng, -1, 1);
    bdm.bias.value = uniform({1}, rng, -0.5, 0.5);
    Parameter token("token", uniform({1, 8}, rng, -1, 1));
    auto f = [&](Tape& t) { return bypass_probability(bdm, t.param(token)); };
    out.push_back({"bypass_probability", 1e-4, grad_check(f, {&bdm.weight, &bdm.bias, &token}, kStep)});
  }
  {
    PrunedViTLayer layer("layer", 8, 2, 2, rng);
    layer.mode = MaskMode::Relaxed;
    layer.dr1.value = uniform({8}, rng, 0.5, 1.5);
    layer.dr2.value = uniform({8}, rng, 0.5, 1.5);
    layer.ln1_scale.value = uniform({8}, rng, 0.5, 1.5);
    layer.ln2_shift.value = uniform({8}, rng, -0.3, 0.3);
    Parameter x("x", uniform({5, 8}, rng, -1, 1));
    auto f = [&](Tape& t) { return sum(layer_forward(t.param(x), layer)); };
    std::vector<Parameter*> ps = layer.parameters();
    ps.push_back(&x);
    out.push_back({"layer_forward", 1e-3, grad_check(f, ps, kStep)});
  }
  {
    PredictionHead head(6, 4, 2, rng);
    Parameter x("tokens", uniform({16, 6}, rng, -1, 1));
    const Tensor r1 = uniform({16, 1}, rng, -1, 1), r2 = uniform({16, 2}, rng, -1, 1), r3 = uniform({16, 2}, rng, -1, 1);
    auto f = [&](Tape& t) {
      HeadOutput h = head_forward(t.param(x), head);
      return add(add(probe(h.score, r1), probe(h.offset, r2)), probe(h.size, r3));
    };
    std::vector<Parameter*> ps = head.parameters();
    ps.push_back(&x);
    out.push_back({"head_forward", 1e-3, grad_check(f, ps, kStep)});
  }
  {
    Parameter logits("logits", uniform({36, 1}, rng, -3, 1));
    const Tensor target = gaussian_target(6, 2, 3);
    auto f = [&](Tape& t) { return focal_loss(sigmoid(t.param(logits)), target); };
    out.push_back({"focal_loss", 1e-4, grad_check(f, {&logits}, kStep)});
  }
  {
    Parameter a("a", Tensor::from({0.45f, 0.52f, 0.30f, 0.22f}));
    Parameter b("b", Tensor::from({0.50f, 0.47f, 0.26f, 0.31f}));
    auto f = [&](Tape& t) { return giou_loss(t.param(a), t.param(b)); };
    GradCheckResult overlap = grad_check(f, {&a, &b}, kStep);
    a.value = Tensor::from({0.2f, 0.25f, 0.2f, 0.1f});
    b.value = Tensor::from({0.7f, 0.6f, 0.3f, 0.2f});
    GradCheckResult apart = grad_check(f, {&a, &b}, kStep);
    out.push_back({"giou_loss", 1e-4, overlap.max_rel_error >= apart.max_rel_error ? overlap : apart});
  }
  {
    Parameter a("a", uniform({4}, rng, 0, 1));
    Parameter b("b", uniform({4}, rng, 0, 1));
    auto f = [&](Tape& t) { return l1_loss(t.param(a), t.param(b)); };
    out.push_back({"l1_loss", 1e-4, grad_check(f, {&a, &b}, kStep)});
  }
  {
    Parameter logits("logits", uniform({4}, rng, -1, 1));
    auto f = [&](Tape& t) {
      Var p = sigmoid(t.param(logits));
      std::vector<Var> ps;
      for (std::size_t i = 0; i < 4; ++i) ps.push_back(element(p, i));
      return sparsity_loss(ps, 0.2, 2, 6);
    };
    out.push_back({"sparsity_loss", 1e-4, grad_check(f, {&logits}, kStep)});
  }
  {
    std::vector<PrunedViTLayer> layers;
    for (int i = 0; i < 2; ++i) {
      layers.emplace_back("layer" + std::to_string(i), 4, 2, 2, rng);
      layers.back().dr1.value = uniform({4}, rng, -1, 1);
      layers.back().dr2.value = uniform({4}, rng, -1, 1);
    }
    PruneConfig cfg;
    cfg.alpha = {1e-4, 3e-4};
    auto f = [&](Tape& t) { return reg_loss(t, layers, cfg); };
    std::vector<Parameter*> ps;
    for (auto& l : layers) {
      ps.push_back(&l.dr1);
      ps.push_back(&l.dr2);
    }
    out.push_back({"reg_loss", 1e-4, grad_check(f, ps, kStep)});
  }
  {
    // Two-layer toy tracker: template 8, search 16, patch 4 (4 x 4 grid),
    // one gated layer held below the threshold.
    ModelConfig mc;
    mc.dim = 8;
    mc.depth = 2;
    mc.heads = 2;
    mc.patch = 4;
    mc.template_size = 8;
    mc.search_size = 16;
    mc.head_channels = 4;
    mc.head_stages = 1;
    Model model(mc, seed + 17);
    model.attach_bdms(1, seed + 18);
    model.bdms[0].bias.value.fill(-1);
    for (auto& l : model.layers) {
      l.dr1.value = uniform({8}, rng, 0.5, 1.5);
      l.dr2.value = uniform({8}, rng, 0.5, 1.5);
    }
    GatingPolicy policy;
    policy.rho = 0.5;
    policy.n_enf = 1;
    const Image z = random_image(3, 8, 8, rng), x = random_image(3, 16, 16, rng);
    const Tensor target = gaussian_target(4, 1, 2);
    Tensor gt = Tensor::from({0.55f, 0.4f, 0.3f, 0.35f});
    PruneConfig pc;
    auto f = [&](Tape& t) {
      ForwardOut o = model_forward(t, model, z, x, policy);
      Var box = decode_bbox_var(o.head);
      Var g = t.constant(gt);
      Var spar = sparsity_loss(o.backbone.probabilities, 0.4, 1, 2);
      Var total = overall_loss(focal_loss(o.head.score, target), giou_loss(box, g), l1_loss(box, g), spar, LossWeights{});
      return add(total, reg_loss(t, model.layers, pc));
    };
    out.push_back({"overall_loss_toy_model", 1e-3, grad_check(f, model.parameters(), kStep)});
  }
  return out;
}

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
