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

// Precision-neutral summary of the float64 gradient suite, callable from
// float32 code.
struct GradReportLine {
  std::string name;
  double tolerance = 0;
  double max_rel_error = 0;
  std::string worst_param;
  std::size_t coordinates = 0;
  bool passed = false;
};

std::vector<GradReportLine> run_gradient_suite(std::uint64_t seed = 1);

}  // namespace abtrack
