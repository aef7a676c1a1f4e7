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

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "abtrack/tape.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_fd = 0.0;
  double worst_analytic = 0.0;
  std::size_t coordinates = 0;
};

using ScalarFn = std::function<Var(Tape&)>;

// Central finite differences per coordinate against reverse-mode gradients.
// Relative error per coordinate: |fd - ad| / max(1e-8, |fd| + |ad|).
// `max_coords_per_param` > 0 checks an evenly strided subset of each
// parameter (large models); 0 checks every coordinate.
GradCheckResult grad_check(const ScalarFn& f, const std::vector<Parameter*>& params, real step,
                           std::size_t max_coords_per_param = 0);

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
