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

#include <functional>
#include <iosfwd>
#include <optional>
#include <unordered_map>
#include <vector>

#include "abtrack/config.hpp"
#include "abtrack/dataset.hpp"
#include "abtrack/model.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

// Adam with decoupled weight decay, applied to rank-2 weights only.
class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) : b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(const std::vector<Parameter*>& params, double lr, double weight_decay);
  long steps() const { return t_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  double b1_, b2_, eps_;
  long t_ = 0;
  std::unordered_map<Parameter*, Moments> state_;
};

struct EpochMetrics {
  int epoch = 0;
  double lr = 0;
  double loss = 0, cls = 0, iou = 0, l1 = 0, spar = 0, reg = 0;
  double mean_p = 0, mean_tau = 0;
};

struct TrainOptions {
  int epochs = 30;
  double lr = 4e-4;
  int lr_drop_epoch = 24;  // epochs after this one run at lr / 10
  // Adds the relaxed DR L1 term; the sparsity term is active whenever
  // decision modules are attached.
  bool regularize = true;
  std::optional<Difficulty> force_difficulty;
  std::uint64_t sample_offset = 0;
  std::function<void(const EpochMetrics&)> on_epoch;
};

TrainOptions reg_options(const Config& cfg);
TrainOptions finetune_options(const Config& cfg);

// Minibatch training over freshly drawn pairs; returns one record per epoch.
// Throws TrainingError on a non-finite loss term.
std::vector<EpochMetrics> train_model(Model& model, const Config& cfg, const TrainOptions& options);

void write_metrics_header(std::ostream& os, const Config& cfg, const TrainOptions& options);
void write_metrics_row(std::ostream& os, const EpochMetrics& m);

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
