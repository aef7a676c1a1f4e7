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

#include <stdexcept>
#include <string>

namespace abtrack {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can map categories to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or extent mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Violated precondition of an operation (non-scalar loss, bad mask, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or geometry.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Out-of-order pipeline stage or phase transition.
class PipelineError : public Error {
 public:
  using Error::Error;
};

// Checkpoint read/write failure.
// A verification step (equivalence, gradient or benchmark check) failed.
class AcceptanceError : public PipelineError {
 public:
  using PipelineError::PipelineError;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Finite-difference oracle could not evaluate the function.
class OracleError : public Error {
 public:
  using Error::Error;
};

// Tracking loop input problem (degenerate box).
class TrackingError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss term during training.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace abtrack
