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


#include "abtrack/bypass.hpp"

#include <cstdio>
#include <ostream>

#include "abtrack/errors.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

BypassDecisionModule::BypassDecisionModule(const std::string& name, int dim, std::mt19937_64& rng) {
  Tensor w(Shape{dim, 1});
  std::uniform_real_distribution<double> u(-1e-2, 1e-2);
  for (real& v : w.values()) v = static_cast<real>(u(rng));
  weight = Parameter(name + ".weight", std::move(w));
  bias = Parameter(name + ".bias", Tensor(Shape{1}, 0.0f));
}

void GatingPolicy::validate(int depth) const {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("bypass.rho must lie in [0, 1], got " + std::to_string(rho));
  if (n_enf < 0 || n_enf >= depth) {
    throw ConfigError("bypass.n_enf must lie in [0, " + std::to_string(depth - 1) + "], got " + std::to_string(n_enf));
  }
}

Var bypass_probability(BypassDecisionModule& bdm, Var bypass_token) {
  const Tensor& b = bypass_token.value();
  if (b.size() != static_cast<std::size_t>(bdm.dim())) {
    throw ContractError("bypass_probability: token has " + std::to_string(b.size()) + " values, module expects " +
                        std::to_string(bdm.dim()));
  }
  Tape& tape = *bypass_token.tape();
  Var row = b.shape().size() == 2 ? bypass_token : reshape(bypass_token, Shape{1, bdm.dim()});
  return sigmoid(add_row(matmul(row, tape.param(bdm.weight)), tape.param(bdm.bias)));
}

Decision decide(double p, const GatingPolicy& policy) { return p > policy.rho ? Decision::Skip : Decision::Execute; }

BackboneOutput gated_backbone(TokenSequence seq, std::vector<PrunedViTLayer>& layers,
                              std::vector<BypassDecisionModule>& bdms, const GatingPolicy& policy,
                              const GatedOptions& options) {
  const int depth = static_cast<int>(layers.size());
  policy.validate(depth);
  if (static_cast<int>(bdms.size()) != depth - policy.n_enf) {
    throw ContractError("gated_backbone: " + std::to_string(bdms.size()) + " decision modules for " +
                        std::to_string(depth - policy.n_enf) + " gated layers");
  }
  GateFn gate;
  if (options.forced_skip >= 0) {
    const int first_skipped = depth - options.forced_skip;
    gate = [first_skipped](int layer, Var) { return GateDecision{layer < first_skipped, std::nullopt}; };
  } else {
    gate = [&](int layer, Var token) {
      Var p = bypass_probability(bdms[static_cast<std::size_t>(layer - policy.n_enf)], token);
      return GateDecision{decide(static_cast<double>(p.item()), policy) == Decision::Execute, p};
    };
  }
  return backbone_forward(seq, layers, policy.n_enf, gate, options.mode);
}

TraceStats trace_stats(const BypassTrace& trace) {
  if (trace.entries.empty()) throw ContractError("trace_stats: empty trace");
  TraceStats s;
  int gated = 0;
  for (const auto& e : trace.entries) {
    if (e.executed) ++s.executed;
    else ++s.skipped;
    if (e.p) {
      s.mean_p += *e.p;
      ++gated;
    }
  }
  if (gated > 0) s.mean_p /= gated;
  return s;
}

void write_trace_header(std::ostream& os, int depth) {
  os << "frame_id";
  for (int i = 1; i <= depth; ++i) os << ",p" << i;
  os << ",executed_mask,executed_count\n";
}

void write_trace_row(std::ostream& os, int frame_id, const BypassTrace& trace) {
  os << frame_id;
  char buf[32];
  std::string mask;
  for (const auto& e : trace.entries) {
    os << ',';
    if (e.p) {
      std::snprintf(buf, sizeof buf, "%.6f", *e.p);
      os << buf;
    }
    mask += e.executed ? '1' : '0';
  }
  os << ',' << mask << ',' << trace.executed_count() << '\n';
}

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
