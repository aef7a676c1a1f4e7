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


#include "abtrack/train.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>

#include "abtrack/errors.hpp"
#include "abtrack/losses.hpp"
#include "abtrack/pruning.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

void AdamW::step(const std::vector<Parameter*>& params, double lr, double weight_decay) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (Parameter* p : params) {
    Moments& s = state_[p];
    const std::size_t n = p->value.size();
    if (s.m.size() != n) {
      s.m.assign(n, 0.0);
      s.v.assign(n, 0.0);
    }
    if (p->grad.size() != n) continue;
    const double decay = p->value.rank() == 2 ? 1.0 - lr * weight_decay : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = p->grad[i];
      s.m[i] = b1_ * s.m[i] + (1 - b1_) * g;
      s.v[i] = b2_ * s.v[i] + (1 - b2_) * g * g;
      const double upd = (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + eps_);
      p->value[i] = static_cast<real>(decay * p->value[i] - lr * upd);
    }
  }
}

TrainOptions reg_options(const Config& cfg) {
  TrainOptions o;
  o.epochs = cfg.train.epochs;
  o.lr = cfg.train.lr;
  o.lr_drop_epoch = cfg.train.lr_drop_epoch;
  o.regularize = true;
  return o;
}

TrainOptions finetune_options(const Config& cfg) {
  TrainOptions o;
  o.epochs = cfg.train.finetune_epochs;
  o.lr = cfg.train.finetune_lr;
  o.lr_drop_epoch = std::max(1, static_cast<int>(0.8 * cfg.train.finetune_epochs));
  o.regularize = false;
  // Draws differ from the first stage's.
  o.sample_offset = 1ULL << 40;
  return o;
}

namespace {

struct SampleState {
  std::unique_ptr<Tape> tape;
  Var cls, iou, l1;
  std::vector<Var> ps;
};

}  // namespace

std::vector<EpochMetrics> train_model(Model& model, const Config& cfg, const TrainOptions& options) {
  const int batch = cfg.train.batch;
  const int per_epoch = cfg.train.samples_per_epoch / batch * batch;
  const int grid = model.cfg.grid();
  const LossWeights w{cfg.loss.lambda_iou, cfg.loss.lambda_l1, cfg.loss.gamma};
  PruneConfig pcfg{cfg.prune.mu, cfg.prune.alpha};
  GatingPolicy policy{cfg.bypass.rho, model.n_enf()};
  GatedOptions gopt;
  gopt.mode = GateMode::Train;

  AdamW opt;
  std::vector<EpochMetrics> history;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    EpochMetrics em;
    em.epoch = epoch;
    em.lr = epoch > options.lr_drop_epoch ? options.lr * 0.1 : options.lr;
    std::vector<Parameter*> params = model.parameters();
    int gated_samples = 0;
    for (int b0 = 0; b0 < per_epoch; b0 += batch) {
      zero_grads(params);
      std::vector<SampleState> states(static_cast<std::size_t>(batch));
      double iou_sum = 0;
      for (int i = 0; i < batch; ++i) {
        const std::uint64_t index =
            options.sample_offset + static_cast<std::uint64_t>(epoch - 1) * per_epoch + b0 + i;
        const TrainingPair pair =
            make_training_pair(cfg, namespaced_seed("train", cfg.train.seed, index), options.force_difficulty);
        SampleState& s = states[static_cast<std::size_t>(i)];
        s.tape = std::make_unique<Tape>();
        Tape& tape = *s.tape;
        ForwardOut out = model_forward(tape, model, pair.template_img, pair.search_img, policy, gopt);
        s.cls = focal_loss(out.head.score, gaussian_target(grid, pair.row, pair.col));
        Var box = decode_bbox_at(out.head, pair.row * grid + pair.col);
        Var target = tape.constant(Tensor::from({static_cast<real>(pair.target.x), static_cast<real>(pair.target.y),
                                                 static_cast<real>(pair.target.w), static_cast<real>(pair.target.h)}));
        s.iou = giou_loss(box, target);
        s.l1 = l1_loss(box, target);
        s.ps = out.backbone.probabilities;
        iou_sum += s.iou.item();
      }
      SparsityContext ctx{cfg.bypass.tau0, cfg.bypass.zeta, iou_sum / batch};
      for (SampleState& s : states) {
        Var spar;
        if (model.has_bdms() && !s.ps.empty()) {
          const double tau = sparsity_target(s.iou.item(), ctx);
          spar = sparsity_loss(s.ps, tau, model.n_enf(), model.cfg.depth);
          double mp = 0;
          for (const Var& p : s.ps) mp += p.item();
          em.mean_p += mp / static_cast<double>(s.ps.size());
          em.mean_tau += tau;
          em.spar += spar.item();
          ++gated_samples;
        }
        Var loss = overall_loss(s.cls, s.iou, s.l1, spar, w);
        em.loss += loss.item();
        em.cls += s.cls.item();
        em.iou += s.iou.item();
        em.l1 += s.l1.item();
        s.tape->propagate(loss);
        s.tape->accumulate_into_params(static_cast<real>(1.0 / batch));
        s.tape.reset();
      }
      if (options.regularize) {
        Tape rt;
        Var r = reg_loss(rt, model.layers, pcfg);
        if (!r.value().all_finite()) throw TrainingError("non-finite loss term: reg");
        em.reg += r.item();
        em.loss += r.item() * batch;
        rt.backward(r);
      }
      opt.step(params, em.lr, cfg.train.weight_decay);
    }
    const double n = per_epoch;
    em.loss /= n;
    em.cls /= n;
    em.iou /= n;
    em.l1 /= n;
    em.reg /= n / batch;
    if (gated_samples > 0) {
      em.spar /= gated_samples;
      em.mean_p /= gated_samples;
      em.mean_tau /= gated_samples;
    }
    history.push_back(em);
    if (options.on_epoch) options.on_epoch(em);
  }
  return history;
}

void write_metrics_header(std::ostream& os, const Config& cfg, const TrainOptions& o) {
  os << "# desk-scale deviations from the full-scale recipe (lr 4e-5, 300 epochs, lr drop after epoch 240):\n";
  os << "# lr=" << o.lr << " epochs=" << o.epochs << " batch=" << cfg.train.batch << " lr_drop_after_epoch="
     << o.lr_drop_epoch << " samples_per_epoch=" << cfg.train.samples_per_epoch << " weight_decay="
     << cfg.train.weight_decay << '\n';
  os << "# model d=" << cfg.model.dim << " depth=" << cfg.model.depth << " heads=" << cfg.model.heads
     << " patch=" << cfg.model.patch << " template=" << cfg.model.template_size << " search="
     << cfg.model.search_size << '\n';
  os << "epoch,lr,loss,cls,iou,l1,spar,reg,mean_p,mean_tau\n";
}

void write_metrics_row(std::ostream& os, const EpochMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%d,%.6g,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f\n", m.epoch, m.lr, m.loss, m.cls,
                m.iou, m.l1, m.spar, m.reg, m.mean_p, m.mean_tau);
  os << buf;
}

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
