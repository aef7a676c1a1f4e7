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


#include "abtrack/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <variant>

#include "abtrack/errors.hpp"

namespace abtrack {

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

using Slot = std::variant<int*, double*, std::uint64_t*, std::vector<double>*>;

struct Field {
  const char* key;
  Slot slot;
};

std::vector<Field> fields(Config& c) {
  return {
      {"model.d", &c.model.dim},
      {"model.depth", &c.model.depth},
      {"model.heads", &c.model.heads},
      {"model.mlp_layers", &c.model.mlp_layers},
      {"model.patch", &c.model.patch},
      {"model.channels", &c.model.channels},
      {"model.template_size", &c.model.template_size},
      {"model.search_size", &c.model.search_size},
      {"model.head_channels", &c.model.head_channels},
      {"model.head_stages", &c.model.head_stages},
      {"bypass.rho", &c.bypass.rho},
      {"bypass.tau0", &c.bypass.tau0},
      {"bypass.zeta", &c.bypass.zeta},
      {"bypass.n_enf", &c.bypass.n_enf},
      {"prune.mu", &c.prune.mu},
      {"prune.alpha", &c.prune.alpha},
      {"train.lr", &c.train.lr},
      {"train.weight_decay", &c.train.weight_decay},
      {"train.epochs", &c.train.epochs},
      {"train.batch", &c.train.batch},
      {"train.lr_drop_epoch", &c.train.lr_drop_epoch},
      {"train.seed", &c.train.seed},
      {"train.samples_per_epoch", &c.train.samples_per_epoch},
      {"train.finetune_epochs", &c.train.finetune_epochs},
      {"train.finetune_lr", &c.train.finetune_lr},
      {"loss.lambda_iou", &c.loss.lambda_iou},
      {"loss.lambda_l1", &c.loss.lambda_l1},
      {"loss.gamma", &c.loss.gamma},
      {"data.easy_fraction", &c.data.easy_fraction},
      {"data.sequence_length", &c.data.sequence_length},
      {"data.sequences", &c.data.sequences},
      {"data.eval_sequences", &c.data.eval_sequences},
      {"data.frame_size", &c.data.frame_size},
      {"data.target_min", &c.data.target_min},
      {"data.target_max", &c.data.target_max},
      {"data.motion_std", &c.data.motion_std},
      {"data.center_jitter", &c.data.center_jitter},
      {"data.scale_jitter", &c.data.scale_jitter},
      {"track.template_factor", &c.track.template_factor},
      {"track.search_factor", &c.track.search_factor},
      {"bench.warmup", &c.bench.warmup},
      {"bench.iterations", &c.bench.iterations},
  };
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": cannot parse '" + v + "'");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) throw ConfigError(key + ": value must be finite");
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void reject(const std::string& key, const std::string& rule, const std::string& got) {
  throw ConfigError(key + " must " + rule + ", got " + got);
}

void require(bool ok, const std::string& key, const std::string& rule, double got) {
  if (!ok) reject(key, rule, fmt(got));
}

}  // namespace

void Config::validate() const {
  const ModelConfig& m = model;
  require(m.dim > 0, "model.d", "be positive", m.dim);
  require(m.depth >= 1, "model.depth", "be at least 1", m.depth);
  require(m.heads > 0 && m.dim % m.heads == 0, "model.heads", "be positive and divide model.d", m.heads);
  require(m.mlp_layers >= 1, "model.mlp_layers", "be at least 1", m.mlp_layers);
  require(m.patch > 0, "model.patch", "be positive", m.patch);
  require(m.channels >= 1 && m.channels <= 3, "model.channels", "lie in [1, 3]", m.channels);
  require(m.template_size > 0 && m.template_size % m.patch == 0, "model.template_size",
          "be a positive multiple of model.patch", m.template_size);
  require(m.search_size > 0 && m.search_size % m.patch == 0, "model.search_size",
          "be a positive multiple of model.patch", m.search_size);
  require(m.search_size / m.patch >= 2, "model.search_size", "give a search grid of at least 2 x 2", m.search_size);
  require(m.head_channels > 0, "model.head_channels", "be positive", m.head_channels);
  require(m.head_stages >= 0, "model.head_stages", "be non-negative", m.head_stages);

  require(bypass.rho >= 0 && bypass.rho <= 1, "bypass.rho", "lie in [0, 1]", bypass.rho);
  require(bypass.tau0 >= 0 && bypass.tau0 <= 1, "bypass.tau0", "lie in [0, 1]", bypass.tau0);
  require(bypass.zeta > 0, "bypass.zeta", "be positive", bypass.zeta);
  require(bypass.n_enf >= 0 && bypass.n_enf < m.depth, "bypass.n_enf", "lie in [0, model.depth - 1]", bypass.n_enf);

  require(prune.mu > 0 && prune.mu <= 1, "prune.mu", "lie in (0, 1]", prune.mu);
  require(std::floor(m.dim * prune.mu / m.heads + 1e-9) >= 1, "prune.mu", "keep at least model.heads dimensions",
          prune.mu);
  if (prune.alpha.size() != 1 && static_cast<int>(prune.alpha.size()) != m.depth) {
    reject("prune.alpha", "hold 1 or model.depth values", std::to_string(prune.alpha.size()) + " values");
  }
  for (double a : prune.alpha) require(a > 0, "prune.alpha", "be positive", a);

  require(train.lr > 0, "train.lr", "be positive", train.lr);
  require(train.weight_decay >= 0, "train.weight_decay", "be non-negative", train.weight_decay);
  require(train.epochs >= 1, "train.epochs", "be at least 1", train.epochs);
  require(train.batch >= 1, "train.batch", "be at least 1", train.batch);
  require(train.lr_drop_epoch >= 1, "train.lr_drop_epoch", "be at least 1", train.lr_drop_epoch);
  require(train.samples_per_epoch >= train.batch, "train.samples_per_epoch", "be at least train.batch",
          train.samples_per_epoch);
  require(train.finetune_epochs >= 0, "train.finetune_epochs", "be non-negative", train.finetune_epochs);
  require(train.finetune_lr > 0, "train.finetune_lr", "be positive", train.finetune_lr);

  require(loss.lambda_iou >= 0, "loss.lambda_iou", "be non-negative", loss.lambda_iou);
  require(loss.lambda_l1 >= 0, "loss.lambda_l1", "be non-negative", loss.lambda_l1);
  require(loss.gamma >= 0, "loss.gamma", "be non-negative", loss.gamma);

  require(data.easy_fraction >= 0 && data.easy_fraction <= 1, "data.easy_fraction", "lie in [0, 1]",
          data.easy_fraction);
  require(data.sequence_length >= 2, "data.sequence_length", "be at least 2", data.sequence_length);
  require(data.sequences >= 1, "data.sequences", "be at least 1", data.sequences);
  require(data.eval_sequences >= 1, "data.eval_sequences", "be at least 1", data.eval_sequences);
  require(data.frame_size >= 8, "data.frame_size", "be at least 8", data.frame_size);
  require(data.target_min > 0, "data.target_min", "be positive", data.target_min);
  require(data.target_max >= data.target_min, "data.target_max", "be at least data.target_min", data.target_max);
  require(data.target_max + 2 <= data.frame_size, "data.target_max", "fit inside data.frame_size", data.target_max);
  require(data.motion_std >= 0, "data.motion_std", "be non-negative", data.motion_std);
  require(data.center_jitter >= 0, "data.center_jitter", "be non-negative", data.center_jitter);
  require(data.scale_jitter >= 0 && data.scale_jitter < 1, "data.scale_jitter", "lie in [0, 1)", data.scale_jitter);

  require(track.template_factor >= 1, "track.template_factor", "be at least 1", track.template_factor);
  require(track.search_factor >= 1, "track.search_factor", "be at least 1", track.search_factor);

  require(bench.warmup >= 100, "bench.warmup", "be at least 100", bench.warmup);
  require(bench.iterations >= 1000, "bench.iterations", "be at least 1000", bench.iterations);
}

std::string Config::to_text() const {
  Config copy = *this;
  std::ostringstream os;
  for (const Field& f : fields(copy)) {
    os << f.key << " = ";
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, std::vector<double>>) {
            for (std::size_t i = 0; i < p->size(); ++i) os << (i ? ", " : "") << fmt((*p)[i]);
          } else if constexpr (std::is_same_v<T, double>) {
            os << fmt(*p);
          } else {
            os << *p;
          }
        },
        f.slot);
    os << '\n';
  }
  return os.str();
}

std::uint64_t Config::model_hash() const {
  std::istringstream in(to_text());
  std::string line;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  while (std::getline(in, line))
    if (line.rfind("model.", 0) == 0) h = fnv1a64(line.data(), line.size(), h);
  return h;
}

Config parse_config(const std::string& text) {
  Config c;
  auto table = fields(c);
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty()) throw ConfigError(key + ": missing value");
    auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return key == f.key; });
    if (it == table.end()) throw ConfigError("unknown key '" + key + "' on line " + std::to_string(lineno));
    if (!seen.insert(key).second) throw ConfigError(key + ": duplicate key");
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, std::vector<double>>) {
            p->clear();
            std::istringstream items(value);
            std::string item;
            while (std::getline(items, item, ',')) p->push_back(parse_number<double>(key, trim(item)));
          } else {
            *p = parse_number<T>(key, value);
          }
        },
        it->slot);
  }
  c.validate();
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace abtrack
