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

#include <cstdint>
#include <string>
#include <vector>

namespace abtrack {

struct ModelConfig {
  int dim = 64;
  int depth = 6;
  int heads = 4;
  int mlp_layers = 2;
  int patch = 16;
  int channels = 3;
  int template_size = 64;
  int search_size = 128;
  int head_channels = 64;
  int head_stages = 4;

  int grid() const { return search_size / patch; }
  int n_tokens() const {
    return (template_size / patch) * (template_size / patch) + grid() * grid() + 1;
  }
};

struct BypassConfig {
  double rho = 0.5;
  double tau0 = 0.4;
  double zeta = 0.1;
  int n_enf = 2;
};

struct PruneSettings {
  double mu = 0.3;
  std::vector<double> alpha{1e-4};
};

struct TrainConfig {
  double lr = 4e-4;
  double weight_decay = 1e-4;
  int epochs = 30;
  int batch = 16;
  int lr_drop_epoch = 24;
  std::uint64_t seed = 1;
  int samples_per_epoch = 256;
  int finetune_epochs = 10;
  double finetune_lr = 1e-4;
};

struct LossConfig {
  double lambda_iou = 2.0;
  double lambda_l1 = 5.0;
  double gamma = 5.0;
};

struct DataConfig {
  double easy_fraction = 0.5;
  int sequence_length = 20;
  int sequences = 200;
  int eval_sequences = 20;
  int frame_size = 160;
  double target_min = 16;
  double target_max = 32;
  double motion_std = 2.0;
  double center_jitter = 0.5;  // fraction of the target size
  double scale_jitter = 0.2;   // log-scale half-range
};

struct TrackConfig {
  double template_factor = 2.0;
  double search_factor = 4.0;
};

struct BenchConfig {
  int warmup = 100;
  int iterations = 1000;
};

struct Config {
  ModelConfig model;
  BypassConfig bypass;
  PruneSettings prune;
  TrainConfig train;
  LossConfig loss;
  DataConfig data;
  TrackConfig track;
  BenchConfig bench;

  // Throws ConfigError naming the offending field.
  void validate() const;
  // Canonical `key = value` dump of every field.
  std::string to_text() const;
  // FNV-1a 64 over the canonical model.* lines: checkpoints stay loadable
  // under different training or data settings.
  std::uint64_t model_hash() const;
};

// Flat `key = value` text with dotted keys; '#' starts a comment. Unknown
// keys, duplicates and malformed values are errors. Missing keys keep their
// defaults. The result is validated.
Config parse_config(const std::string& text);
Config load_config(const std::string& path);

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace abtrack
