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

#include <optional>
#include <vector>

namespace abtrack {

// Per-inference record of which blocks ran. Layer indices are 0-based; the
// first n_enf entries are enforced and carry no probability.
struct BypassTrace {
  struct Entry {
    int layer = 0;
    std::optional<double> p;
    bool executed = true;
  };
  std::vector<Entry> entries;

  std::size_t size() const { return entries.size(); }
  int executed_count() const {
    int n = 0;
    for (const auto& e : entries) n += e.executed ? 1 : 0;
    return n;
  }
};

}  // namespace abtrack
