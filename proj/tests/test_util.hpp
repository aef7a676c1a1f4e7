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

#include <random>

#include "abtrack/tape.hpp"

namespace abtrack::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, real lo = -1, real hi = 1) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<real> u(lo, hi);
  for (real& v : t.values()) v = u(rng);
  return t;
}

// Scalar probe sum(x * r) with a fixed random r keeps gradients O(1) and
// exercises every output coordinate.
inline Var probe(Var x, const Tensor& r) {
  return sum(mul(x, x.tape()->constant(r)));
}

}  // namespace abtrack::testing
