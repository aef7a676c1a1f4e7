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

#include "abtrack/gradcheck.hpp"

#include <cmath>

#include "abtrack/errors.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

namespace {

double evaluate(const ScalarFn& f) {
  Tape tape(false);
  const real v = f(tape).item();
  if (!std::isfinite(v)) throw OracleError("grad_check: non-finite function value at perturbed point");
  return v;
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& f, const std::vector<Parameter*>& params, real step,
                           std::size_t max_coords_per_param) {
  if (!(step > 0.0f)) throw ContractError("grad_check: step must be positive");
  zero_grads(params);
  {
    Tape tape;
    Var loss = f(tape);
    tape.backward(loss);
  }
  GradCheckResult res;
  for (Parameter* p : params) {
    const std::size_t n = p->value.size();
    const std::size_t stride =
        (max_coords_per_param == 0 || n <= max_coords_per_param) ? 1 : (n + max_coords_per_param - 1) / max_coords_per_param;
    for (std::size_t i = 0; i < n; i += stride) {
      const real orig = p->value[i];
      p->value[i] = orig + step;
      const real hi = p->value[i];
      const double f_hi = evaluate(f);
      p->value[i] = orig - step;
      const real lo = p->value[i];
      const double f_lo = evaluate(f);
      p->value[i] = orig;
      // Divide by the representable perturbation, not the nominal one.
      const double fd = (f_hi - f_lo) / (static_cast<double>(hi) - static_cast<double>(lo));
      const double ad = p->grad[i];
      const double rel = std::fabs(fd - ad) / std::max(1e-8, std::fabs(fd) + std::fabs(ad));
      ++res.coordinates;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = p->name;
        res.worst_index = i;
        res.worst_fd = fd;
        res.worst_analytic = ad;
      }
    }
  }
  return res;
}

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
