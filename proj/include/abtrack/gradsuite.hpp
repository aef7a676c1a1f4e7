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

#include "abtrack/gradcheck.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

struct GradSuiteEntry {
  std::string name;
  double tolerance = 0.0;
  GradCheckResult result;

  bool passed() const { return result.max_rel_error < tolerance; }
};

// Finite-difference checks of every loss term, the decision module, one
// block, the head, and the overall objective through a two-layer toy model.
// Meaningful in the float64 build.
std::vector<GradSuiteEntry> gradient_suite(std::uint64_t seed = 1);

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
