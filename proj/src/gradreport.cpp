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


#include "abtrack/gradreport.hpp"

#include "abtrack/gradsuite.hpp"

namespace abtrack {

std::vector<GradReportLine> run_gradient_suite(std::uint64_t seed) {
  std::vector<GradReportLine> out;
  for (const auto& e : f64::gradient_suite(seed)) {
    out.push_back({e.name, e.tolerance, e.result.max_rel_error, e.result.worst_param, e.result.coordinates,
                   e.passed()});
  }
  return out;
}

}  // namespace abtrack
