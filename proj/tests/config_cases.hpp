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

#include <map>
#include <string>

namespace abtrack::testing {

// One out-of-range value per config key.
inline const std::map<std::string, std::string> kBadConfigValues = {
    {"model.d", "0"},
    {"model.depth", "0"},
    {"model.heads", "3"},
    {"model.mlp_layers", "0"},
    {"model.patch", "0"},
    {"model.channels", "4"},
    {"model.template_size", "60"},
    {"model.search_size", "100"},
    {"model.head_channels", "0"},
    {"model.head_stages", "-1"},
    {"bypass.rho", "1.5"},
    {"bypass.tau0", "-0.1"},
    {"bypass.zeta", "0"},
    {"bypass.n_enf", "6"},
    {"prune.mu", "0"},
    {"prune.alpha", "-1"},
    {"train.lr", "0"},
    {"train.weight_decay", "-1"},
    {"train.epochs", "0"},
    {"train.batch", "0"},
    {"train.lr_drop_epoch", "0"},
    {"train.seed", "-1"},
    {"train.samples_per_epoch", "4"},
    {"train.finetune_epochs", "-1"},
    {"train.finetune_lr", "0"},
    {"loss.lambda_iou", "-1"},
    {"loss.lambda_l1", "-1"},
    {"loss.gamma", "-1"},
    {"data.easy_fraction", "1.5"},
    {"data.sequence_length", "1"},
    {"data.sequences", "0"},
    {"data.eval_sequences", "0"},
    {"data.frame_size", "4"},
    {"data.target_min", "0"},
    {"data.target_max", "10"},
    {"data.motion_std", "-1"},
    {"data.center_jitter", "-1"},
    {"data.scale_jitter", "1"},
    {"track.template_factor", "0.5"},
    {"track.search_factor", "0.5"},
    {"bench.warmup", "10"},
    {"bench.iterations", "10"},
};

}  // namespace abtrack::testing
