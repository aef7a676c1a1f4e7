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

#include "abtrack/errors.hpp"
#include "abtrack/gradcheck.hpp"
#include "abtrack/tape.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace abtrack;
using abtrack::testing::probe;
using abtrack::testing::random_tensor;

TEST_CASE("matmul identity and direct arithmetic") {
  Tape t;
  Tensor a = Tensor::matrix(3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor eye = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Var c = matmul(t.constant(eye), t.constant(a));
  CHECK(max_abs_diff(c.value(), a) == 0.0f);

  Var d = matmul(t.constant(Tensor::matrix(2, 2, {1, 2, 3, 4})), t.constant(Tensor::matrix(2, 1, {0, 1})));
  CHECK(d.value()[0] == 2.0f);
  CHECK(d.value()[1] == 4.0f);
}

TEST_CASE("matmul shape mismatch reports both shapes") {
  Tape t;
  Var a = t.constant(Tensor(Shape{2, 3}));
  Var b = t.constant(Tensor(Shape{4, 2}));
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("layer norm statistics and degenerate cases") {
  Tape t;
  Var ones = t.constant(Tensor(Shape{16}, 1.0f));
  Var zeros = t.constant(Tensor(Shape{16}, 0.0f));
  Var c = layer_norm(t.constant(Tensor(Shape{1, 16}, 3.0f)), ones, zeros);
  for (float v : c.value().values()) CHECK(v == 0.0f);

  std::mt19937_64 rng(11);
  Var shift = t.constant(random_tensor({16}, rng));
  Var collapsed = layer_norm(t.constant(random_tensor({8, 16}, rng)), zeros, shift);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 16; ++j) CHECK(collapsed.value().at(i, j) == shift.value()[j]);

  Var y = layer_norm(t.constant(random_tensor({8, 16}, rng, -3.0f, 5.0f)), ones, zeros);
  for (int i = 0; i < 8; ++i) {
    double mu = 0.0;
    double var = 0.0;
    for (int j = 0; j < 16; ++j) mu += y.value().at(i, j);
    mu /= 16;
    for (int j = 0; j < 16; ++j) var += (y.value().at(i, j) - mu) * (y.value().at(i, j) - mu);
    var /= 16;
    CHECK(std::fabs(mu) < 1e-6);
    CHECK(var > 1.0 - 1e-4);
    CHECK(var < 1.0 + 1e-4);
  }
}

TEST_CASE("subgradient zero at kinks") {
  Tape t;
  Var x = t.leaf(Tensor::from({0.0f, 0.0f, 1.0f}));
  Var l = add(add(element(relu(x), 0), element(abs(x), 1)), element(clip(x, 0.0f, 1.0f), 2));
  t.propagate(l);
  CHECK(x.grad()[0] == 0.0f);
  CHECK(x.grad()[1] == 0.0f);
  CHECK(x.grad()[2] == 0.0f);
}

TEST_CASE("backward contract and accumulation") {
  Parameter x("x", Tensor::scalar(3.0f));
  {
    Tape t;
    Var v = t.param(x);
    t.backward(mul(v, v));
  }
  CHECK(x.grad[0] == doctest::Approx(6.0));

  Parameter a("a", Tensor::scalar(2.0f));
  Parameter b("b", Tensor::scalar(5.0f));
  for (int k = 0; k < 2; ++k) {
    Tape t;
    t.backward(mul(t.param(a), t.param(b)));
  }
  CHECK(a.grad[0] == doctest::Approx(10.0));
  CHECK(b.grad[0] == doctest::Approx(4.0));

  Tape t;
  Var m = t.param(a);
  CHECK_THROWS_AS(t.backward(t.leaf(Tensor(Shape{2}))), ContractError);
  (void)m;
}

TEST_CASE("tape replay is deterministic") {
  auto run = [] {
    std::mt19937_64 rng(99);
    Tape t;
    Var x = t.constant(random_tensor({6, 8}, rng));
    Var w = t.constant(random_tensor({8, 8}, rng));
    return softmax_rows(gelu(matmul(x, w))).value();
  };
  const Tensor a = run();
  const Tensor b = run();
  CHECK(a.storage() == b.storage());
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<float>{1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{0, 2}), DimensionError);
  Tensor t(Shape{3}, 1.0f);
  CHECK(t.all_finite());
  t[1] = std::nanf("");
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("softmax rows in float32: exact cases and large magnitudes") {
  Tape t;
  Var s = softmax_rows(t.constant(Tensor::matrix(1, 3, {2.5f, 2.5f, 2.5f})));
  for (int j = 0; j < 3; ++j) CHECK(s.value()[j] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  Var s2 = softmax_rows(t.constant(Tensor::matrix(1, 2, {0.0f, std::log(2.0f)})));
  CHECK(s2.value()[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Var big = softmax_rows(t.constant(random_tensor({4, 6}, rng, -1e4f, 1e4f)));
    for (int i = 0; i < 4; ++i) {
      double row = 0.0;
      for (int j = 0; j < 6; ++j) {
        CHECK(big.value().at(i, j) >= 0.0f);
        row += big.value().at(i, j);
      }
      CHECK(std::fabs(row - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("unary values") {
  Tape t;
  CHECK(sigmoid(t.constant(Tensor::scalar(0.0f))).item() == 0.5f);
  CHECK(clip(t.constant(Tensor::scalar(1.1f)), 0.0f, 1.0f).item() == 1.0f);
  CHECK(relu(t.constant(Tensor::scalar(-2.0f))).item() == 0.0f);
  CHECK(abs(t.constant(Tensor::scalar(-2.0f))).item() == 2.0f);
  CHECK(gelu(t.constant(Tensor::scalar(0.0f))).item() == 0.0f);
  CHECK(sigmoid(t.constant(Tensor::scalar(100.0f))).item() == doctest::Approx(1.0).epsilon(1e-8));
}
