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


#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "abtrack/checkpoint.hpp"
#include "abtrack/errors.hpp"
#include "abtrack/flops.hpp"
#include "abtrack/harness.hpp"
#include "abtrack/pipeline.hpp"
#include "doctest.h"
#include "config_cases.hpp"
#include "tiny.hpp"

using namespace abtrack;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "abtrack_test_harness";
  fs::create_directories(dir);
  return dir / name;
}

void randomize(Model& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 0.5);
  for (Parameter* p : m.all_parameters())
    for (auto& v : p->value.storage()) v = static_cast<real>(nd(rng));
}

Tensor forward_score(Model& m, const Config& cfg) {
  const TrainingPair pair = make_training_pair(cfg, 17);
  Tape t(false);
  ForwardOut o = model_forward(t, m, pair.template_img, pair.search_img, GatingPolicy{cfg.bypass.rho, m.n_enf()});
  return o.head.score.value();
}


}  // namespace

TEST_CASE("config defaults are valid and round trip") {
  const Config c;
  CHECK_NOTHROW(c.validate());
  const Config back = parse_config(c.to_text());
  CHECK(back.to_text() == c.to_text());
  const Config edited = parse_config("# comment\nmodel.d = 32   # trailing\nprune.alpha = 1e-4, 2e-4, 1e-4, 1e-4, 1e-4, 3e-4\n");
  CHECK(edited.model.dim == 32);
  CHECK(edited.prune.alpha.size() == 6);
  CHECK(edited.prune.alpha[5] == doctest::Approx(3e-4));
}

TEST_CASE("every out-of-range field is rejected by name") {
  std::istringstream keys(Config{}.to_text());
  std::string line;
  std::size_t covered = 0;
  while (std::getline(keys, line)) {
    const std::string key = line.substr(0, line.find(' '));
    REQUIRE_MESSAGE(testing::kBadConfigValues.count(key), "no bad value listed for " << key);
    ++covered;
  }
  CHECK(covered == testing::kBadConfigValues.size());
  for (const auto& [key, value] : testing::kBadConfigValues) {
    try {
      parse_config(key + " = " + value + "\n");
      FAIL("accepted " << key << " = " << value);
    } catch (const ConfigError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(key) != std::string::npos, e.what());
    }
  }
  try {
    parse_config("bypass.rho = 1.5\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "bypass.rho must lie in [0, 1], got 1.5");
  }
}

TEST_CASE("malformed config text") {
  CHECK_THROWS_AS(parse_config("model.width = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("model.d = 64\nmodel.d = 64\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("model.d 64\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("model.d = 6x4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("bypass.rho = nan\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("model.d =\n"), ConfigError);
  CHECK_THROWS_AS(load_config(scratch("missing.cfg").string()), ConfigError);
}

TEST_CASE("model hash follows model fields only") {
  Config a, b;
  b.train.lr = 1e-3;
  b.bypass.rho = 0.7;
  CHECK(a.model_hash() == b.model_hash());
  b.model.depth = 4;
  b.bypass.n_enf = 1;
  CHECK(a.model_hash() != b.model_hash());
  const char* text = "hello";
  CHECK(fnv1a64(text, 5) == 0xa430d84680aabd0bULL);  // published FNV-1a 64 test vector
}

TEST_CASE("checkpoint round trip is bit exact") {
  const Config cfg = testing::tiny_config();
  Model m(cfg.model, 3);
  randomize(m, 4);
  m.phase = Phase::RegTrained;
  const fs::path p1 = scratch("a.ckpt"), p2 = scratch("b.ckpt");
  save_model(m, p1.string());
  Model back = load_model(p1.string(), cfg.model);
  save_model(back, p2.string());
  CHECK(read_bytes(p1.string()) == read_bytes(p2.string()));
  CHECK(back.phase == Phase::RegTrained);
  auto pa = m.all_parameters(), pb = back.all_parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK(pa[i]->value.storage() == pb[i]->value.storage());
  }
}

TEST_CASE("checkpoint byte layout") {
  RawTensor t = RawTensor::f32("w", {2}, {1.0f, -2.0f});
  const auto bytes = encode_tensors({t});
  // 4 magic + 4 version + 4 count + 2 + 1 name + 1 dtype + 1 rank + 4 dim + 8 payload + 8 checksum
  CHECK(bytes.size() == 37);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "ABTK");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 1);
  CHECK(bytes[12] == 1);
  CHECK(bytes[14] == 'w');
  CHECK(bytes[15] == 0);
  CHECK(bytes[16] == 1);
  CHECK(bytes[17] == 2);
  CHECK(bytes[23] == 0x80);  // payload from offset 21; 1.0f = 0x3f800000, little-endian
  CHECK(bytes[24] == 0x3f);
  std::uint64_t h = 0;
  for (int i = 0; i < 8; ++i) h |= static_cast<std::uint64_t>(bytes[29 + i]) << (8 * i);
  CHECK(h == fnv1a64(bytes.data(), 29));
  const auto back = decode_tensors(bytes);
  REQUIRE(back.size() == 1);
  CHECK(back[0].as_f32() == std::vector<float>{1.0f, -2.0f});
}

TEST_CASE("corrupt or truncated checkpoints report offsets") {
  const Config cfg = testing::tiny_config();
  Model m(cfg.model, 3);
  auto bytes = encode_tensors(model_tensors(m));

  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x01;
  try {
    decode_tensors(flipped);
    FAIL("corruption not detected");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }

  auto cut = bytes;
  cut.resize(bytes.size() / 3);
  try {
    decode_tensors(cut);
    FAIL("truncation not detected");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }

  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_tensors(magic), CheckpointError);
  auto version = bytes;
  version[4] = 2;
  CHECK_THROWS_WITH_AS(decode_tensors(version), doctest::Contains("version"), CheckpointError);

  Config other = cfg;
  other.model.head_channels = 4;
  CHECK_THROWS_WITH_AS(model_from_tensors(decode_tensors(bytes), other.model), doctest::Contains("hash"),
                       CheckpointError);
}

TEST_CASE("compacted checkpoint rebuilds reduced shapes") {
  const Config cfg = testing::tiny_config();
  Model m(cfg.model, 3);
  randomize(m, 8);
  m.phase = Phase::RegTrained;
  const PruneReport report = prune_stage(m, cfg);
  CHECK(report.d_star == 8);
  m.attach_bdms(cfg.bypass.n_enf, 2);
  randomize(m, 9);
  const fs::path p = scratch("c.ckpt");
  save_model(m, p.string());
  Model back = load_model(p.string(), cfg.model);
  CHECK(back.phase == Phase::Compacted);
  CHECK(back.n_enf() == cfg.bypass.n_enf);
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    CHECK(back.layers[i].mode == MaskMode::Compacted);
    CHECK(back.layers[i].keep1 == m.layers[i].keep1);
    CHECK(back.layers[i].wv.value.shape() == Shape{8, 8});
    CHECK(back.layers[i].wq.value.shape() == Shape{8, 16});
    CHECK(back.layers[i].mlp.back().value.shape() == Shape{8, 16});
  }
  CHECK(max_abs_diff(forward_score(m, cfg), forward_score(back, cfg)) == 0);
  CHECK(back.parameter_count() == m.parameter_count());
}

TEST_CASE("phase machine") {
  using P = Phase;
  CHECK_NOTHROW(check_transition(P::Dense, P::RegTrained));
  CHECK_NOTHROW(check_transition(P::RegTrained, P::Compacted));
  CHECK_NOTHROW(check_transition(P::Compacted, P::Final));
  for (P a : {P::Dense, P::RegTrained, P::Compacted, P::Final})
    for (P b : {P::Dense, P::RegTrained, P::Compacted, P::Final})
      if (static_cast<int>(b) != static_cast<int>(a) + 1) CHECK_THROWS_AS(check_transition(a, b), PipelineError);
  const Config cfg = testing::tiny_config();
  Model m(cfg.model, 1);
  CHECK_THROWS_AS(prune_stage(m, cfg), PipelineError);
  CHECK_THROWS_AS(finetune_stage(m, cfg, nullptr), PipelineError);
  for (P p : {P::Dense, P::RegTrained, P::Compacted, P::Final}) CHECK(parse_phase(phase_name(p)) == p);
}

TEST_CASE("adamw step matches the update rule") {
  Parameter w("w", Tensor(Shape{1, 2}, std::vector<real>{1.0f, -1.0f}));
  Parameter b("b", Tensor(Shape{1}, std::vector<real>{1.0f}));
  w.grad = Tensor(Shape{1, 2}, std::vector<real>{0.5f, 0.0f});
  b.grad = Tensor(Shape{1}, std::vector<real>{-2.0f});
  AdamW opt;
  const double lr = 0.1, wd = 0.01;
  opt.step({&w, &b}, lr, wd);
  // first step: m_hat = g, v_hat = g^2, update = g / (|g| + eps)
  CHECK(w.value[0] == doctest::Approx((1 - lr * wd) * 1.0 - lr * 0.5 / (0.5 + 1e-8)));
  CHECK(w.value[1] == doctest::Approx((1 - lr * wd) * -1.0));
  CHECK(b.value[0] == doctest::Approx(1.0 + lr));  // no decay on rank-1 tensors
  b.grad[0] = -2.0f;
  opt.step({&w, &b}, lr, wd);
  CHECK(b.value[0] == doctest::Approx(1.0 + 2 * lr));
}

TEST_CASE("training is deterministic and logs deviations") {
  Config cfg = testing::tiny_config();
  cfg.train.epochs = 2;
  std::ostringstream a, b;
  Model ma = train_stage(cfg, &a);
  Model mb = train_stage(cfg, &b);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("# desk-scale deviations", 0) == 0);
  CHECK(a.str().find("epoch,lr,loss,cls,iou,l1,spar,reg,mean_p,mean_tau") != std::string::npos);
  CHECK(ma.phase == Phase::RegTrained);
  CHECK(encode_tensors(model_tensors(ma)) == encode_tensors(model_tensors(mb)));
}

TEST_CASE("loss is finite and decreasing over the first five epochs on easy data") {
  Config cfg = testing::tiny_config();
  cfg.train.samples_per_epoch = 64;
  Model m(cfg.model, 2);
  TrainOptions o = reg_options(cfg);
  o.epochs = 5;
  o.lr_drop_epoch = 5;
  o.force_difficulty = Difficulty::Easy;
  const auto hist = train_model(m, cfg, o);
  REQUIRE(hist.size() == 5);
  for (std::size_t e = 0; e < hist.size(); ++e) {
    CHECK(std::isfinite(hist[e].loss));
    if (e) CHECK_MESSAGE(hist[e].loss < hist[e - 1].loss, "epoch " << e + 1);
  }
}

TEST_CASE("flops report matches counted products") {
  const Config cfg = testing::tiny_config();
  Model m(cfg.model, 1);
  const FlopsReport r = flops_report(m, cfg.bypass.n_enf);
  const TrainingPair pair = make_training_pair(cfg, 1);
  const Tensor pz = patchify(pair.template_img, cfg.model.patch), px = patchify(pair.search_img, cfg.model.patch);
  CHECK(r.embedder == 2LL * (pz.rows() + px.rows()) * pz.cols() * cfg.model.dim);
  const int g = cfg.model.grid();
  CHECK(r.head == 2LL * g * g * 9 * cfg.model.dim * cfg.model.head_channels + 2LL * g * g * cfg.model.head_channels * 5);
  CHECK(r.min_flops() == r.embedder + r.head + r.blocks[0]);
  CHECK(r.max_flops() == r.embedder + r.head + r.blocks[0] + r.blocks[1] + r.blocks[2]);
  CHECK(r.to_text().find("-") != std::string::npos);

  Model p(cfg.model, 1);
  p.phase = Phase::RegTrained;
  prune_stage(p, cfg);
  const FlopsReport rp = flops_report(p, cfg.bypass.n_enf);
  for (std::size_t i = 0; i < rp.blocks.size(); ++i) CHECK(rp.blocks[i] < r.blocks[i]);
  p.attach_bdms(cfg.bypass.n_enf, 1);
  const FlopsReport rg = flops_report(p, 0);
  CHECK(rg.gated);
  CHECK(rg.n_enf == cfg.bypass.n_enf);
  CHECK(rg.bdm_count == 2);
  CHECK(rg.bdm_each == 2 * cfg.model.dim);
}

TEST_CASE("timing statistics") {
  volatile double sink = 0;
  const TimingStats t = time_calls([&] { sink = sink + 1; }, 100, 1000);
  CHECK(t.runs == 1000);
  CHECK(t.p10_ms <= t.median_ms);
  CHECK(t.median_ms <= t.p90_ms);
  CHECK(clock_resolution_ns() > 0);
}

TEST_CASE("bench checks") {
  auto rec = [](const std::string& s, double ms) {
    BenchRecord r;
    r.scenario = s;
    r.timing.median_ms = ms;
    return r;
  };
  std::vector<BenchRecord> good{rec("block/dense", 1.0),         rec("block/+bdm", 1.01),
                                rec("block/+bdm+vtp", 0.6),      rec("e2e/forced-skip-0", 10),
                                rec("e2e/forced-skip-1", 9.1),   rec("e2e/forced-skip-2", 8.0)};
  for (const auto& c : bench_checks(good)) CHECK_MESSAGE(c.passed, c.name);
  auto bad = good;
  bad[4].timing.median_ms = 10.5;
  int failed = 0;
  for (const auto& c : bench_checks(bad)) failed += c.passed ? 0 : 1;
  CHECK(failed == 2);
  std::ostringstream csv;
  write_bench_csv(csv, good);
  CHECK(csv.str().rfind("scenario,median_ms,p10_ms,p90_ms,runs,flops,params,mean_executed_blocks\n", 0) == 0);
}

TEST_CASE("command line exit codes") {
  const std::string cli = ABTRACK_CLI;
  const fs::path out = scratch("cli");
  const fs::path bad = scratch("bad.cfg");
  std::ofstream(bad) << "bypass.rho = 1.5\n";
  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  CHECK(run("flops --out " + out.string()) == 0);
  CHECK(fs::exists(out / "flops_report.txt"));
  CHECK(run("flops --config " + bad.string()) == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("prune --out " + out.string()) == 1);  // no checkpoint
  CHECK(run("gradcheck") == 0);

  // A dense checkpoint cannot be tracked or fine-tuned.
  const Config cfg = testing::tiny_config();
  const fs::path tiny_cfg = scratch("tiny.cfg");
  std::ofstream(tiny_cfg) << cfg.to_text();
  Model m(cfg.model, 1);
  save_model(m, (out / "dense.ckpt").string());
  const std::string common = " --config " + tiny_cfg.string() + " --checkpoint " + (out / "dense.ckpt").string();
  CHECK(run("track" + common) == 1);
  CHECK(run("finetune" + common) == 1);
}
