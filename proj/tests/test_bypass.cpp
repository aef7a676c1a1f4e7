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


#include <cmath>
#include <random>
#include <sstream>

#include "abtrack/bypass.hpp"
#include "abtrack/errors.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace abtrack;
using abtrack::testing::random_tensor;

namespace {

struct Rig {
  std::vector<PrunedViTLayer> layers;
  std::vector<BypassDecisionModule> bdms;
  Tensor x;
  GatingPolicy policy;

  explicit Rig(std::uint64_t seed, int depth = 6, int n_enf = 2) {
    std::mt19937_64 rng(seed);
    for (int i = 0; i < depth; ++i) {
      layers.emplace_back("l" + std::to_string(i), 16, 4, 2, rng);
      layers.back().mode = MaskMode::Dense;
    }
    for (int i = n_enf; i < depth; ++i) bdms.emplace_back("bdm" + std::to_string(i), 16, rng);
    policy.n_enf = n_enf;
    x = random_tensor({9, 16}, rng);
  }
  BackboneOutput run(Tape& t, GatedOptions opt = {}) {
    return gated_backbone(TokenSequence{t.constant(x), 4, 4}, layers, bdms, policy, opt);
  }
};

}  // namespace

TEST_CASE("bypass probability values") {
  std::mt19937_64 rng(1);
  BypassDecisionModule bdm("b", 8, rng);
  Tape t;
  Var token = t.constant(random_tensor({1, 8}, rng));
  bdm.weight.value.fill(0);
  CHECK(bypass_probability(bdm, token).item() == doctest::Approx(0.5).epsilon(1e-7));
  bdm.bias.value.fill(100);
  Tape t2;
  CHECK(std::abs(bypass_probability(bdm, t2.constant(token.value())).item() - 1.0) < 1e-8);
  CHECK_THROWS_AS(bypass_probability(bdm, t.constant(Tensor(Shape{1, 7}))), ContractError);
}

TEST_CASE("module init is small and starts near one half") {
  std::mt19937_64 rng(2);
  BypassDecisionModule bdm("b", 64, rng);
  for (real w : bdm.weight.value.values()) CHECK(std::abs(w) <= 1e-2f);
  CHECK(bdm.bias.value[0] == 0);
}

TEST_CASE("strict threshold decision table") {
  GatingPolicy pol;
  pol.rho = 0.5;
  CHECK(decide(0.5, pol) == Decision::Execute);
  CHECK(decide(0.51, pol) == Decision::Skip);
  CHECK(decide(std::nextafter(0.5, 1.0), pol) == Decision::Skip);
  for (double rho : {0.0, 0.3, 1.0}) {
    pol.rho = rho;
    CHECK(decide(0.0, pol) == Decision::Execute);
  }
  pol.rho = 1.0;
  CHECK(decide(1.0, pol) == Decision::Execute);
}

TEST_CASE("decision equals the logit-domain comparison") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-6, 6), r(0.02, 0.98);
  for (int i = 0; i < 2000; ++i) {
    GatingPolicy pol;
    pol.rho = r(rng);
    const double z = u(rng);
    const double p = 1.0 / (1.0 + std::exp(-z));
    const bool logit_skip = z > std::log(pol.rho / (1.0 - pol.rho));
    if (std::abs(z - std::log(pol.rho / (1.0 - pol.rho))) < 1e-9) continue;
    CHECK((decide(p, pol) == Decision::Skip) == logit_skip);
  }
}

TEST_CASE("policy validation") {
  GatingPolicy pol;
  pol.rho = 1.5;
  CHECK_THROWS_AS(pol.validate(6), ConfigError);
  pol.rho = 0.5;
  pol.n_enf = 6;
  CHECK_THROWS_AS(pol.validate(6), ConfigError);
  pol.n_enf = -1;
  CHECK_THROWS_AS(pol.validate(6), ConfigError);
  pol.n_enf = 5;
  CHECK_NOTHROW(pol.validate(6));
}

TEST_CASE("rho = 1 never skips") {
  Rig rig(4);
  rig.policy.rho = 1.0;
  for (auto& b : rig.bdms) b.bias.value.fill(100);
  Tape t;
  CHECK(rig.run(t).trace.executed_count() == 6);
}

TEST_CASE("saturated modules skip every gated layer") {
  Rig rig(5);
  for (auto& b : rig.bdms) b.bias.value.fill(100);
  Tape t;
  BackboneOutput out = rig.run(t);
  CHECK(out.trace.executed_count() == 2);
  Var prefix = t.constant(rig.x);
  for (int i = 0; i < 2; ++i) prefix = layer_forward(prefix, rig.layers[static_cast<std::size_t>(i)]);
  CHECK(max_abs_diff(out.seq.tokens.value(), prefix.value()) == 0);
  REQUIRE(out.probabilities.size() == 4);
}

TEST_CASE("module count must match gated layers") {
  Rig rig(6);
  rig.bdms.pop_back();
  Tape t;
  CHECK_THROWS_AS(rig.run(t), ContractError);
}

TEST_CASE("train and infer modes agree over 50 seeds") {
  double worst = 0;
  int mixed = 0;
  for (int seed = 0; seed < 50; ++seed) {
    Rig rig(100 + static_cast<std::uint64_t>(seed));
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& b : rig.bdms) b.bias.value.fill(static_cast<real>(u(rng)));
    Tape t;
    BackboneOutput a = rig.run(t, {GateMode::Train, -1});
    BackboneOutput b = rig.run(t, {GateMode::Infer, -1});
    worst = std::max(worst, static_cast<double>(max_abs_diff(a.seq.tokens.value(), b.seq.tokens.value())));
    const int ex = a.trace.executed_count();
    CHECK(ex == b.trace.executed_count());
    if (ex > 2 && ex < 6) ++mixed;
  }
  CHECK(worst <= 1e-6);
  CHECK(mixed > 0);
}

TEST_CASE("trace invariants") {
  for (int seed = 0; seed < 20; ++seed) {
    Rig rig(200 + static_cast<std::uint64_t>(seed));
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::uniform_real_distribution<double> u(-2, 2);
    for (auto& b : rig.bdms) b.bias.value.fill(static_cast<real>(u(rng)));
    Tape t;
    BypassTrace tr = rig.run(t).trace;
    REQUIRE(tr.size() == 6);
    for (const auto& e : tr.entries) {
      if (e.layer < 2) {
        CHECK(e.executed);
        CHECK(!e.p.has_value());
      } else {
        REQUIRE(e.p.has_value());
        CHECK(e.executed == (*e.p <= rig.policy.rho));
      }
    }
  }
}

TEST_CASE("forced skips override the modules") {
  Rig rig(7);
  for (int k = 0; k <= 4; ++k) {
    Tape t;
    BypassTrace tr = rig.run(t, {GateMode::Infer, k}).trace;
    CHECK(tr.executed_count() == 6 - k);
    for (int i = 0; i < 6; ++i) CHECK(tr.entries[static_cast<std::size_t>(i)].executed == (i < 6 - k));
  }
}

TEST_CASE("trace statistics") {
  BypassTrace tr;
  for (int i = 0; i < 12; ++i) tr.entries.push_back({i, i < 2 ? std::nullopt : std::optional<double>(0.6), true});
  TraceStats s = trace_stats(tr);
  CHECK(s.mean_p == doctest::Approx(0.6));
  CHECK(s.skipped == 0);

  BypassTrace t2;
  GatingPolicy pol;
  const double ps[] = {0.7, 0.3, 0.9, 0.1};
  for (int i = 0; i < 6; ++i) {
    if (i < 2) t2.entries.push_back({i, std::nullopt, true});
    else t2.entries.push_back({i, ps[i - 2], decide(ps[i - 2], pol) == Decision::Execute});
  }
  s = trace_stats(t2);
  CHECK(s.executed == 4);
  CHECK(s.skipped == 2);
  CHECK(s.executed + s.skipped == 6);
  CHECK_THROWS_AS(trace_stats(BypassTrace{}), ContractError);
}

TEST_CASE("trace csv row layout") {
  BypassTrace tr;
  tr.entries = {{0, std::nullopt, true}, {1, std::nullopt, true}, {2, 0.7, false}, {3, 0.25, true}};
  std::ostringstream os;
  write_trace_header(os, 4);
  write_trace_row(os, 3, tr);
  CHECK(os.str() == "frame_id,p1,p2,p3,p4,executed_mask,executed_count\n3,,,0.700000,0.250000,1101,3\n");
}
