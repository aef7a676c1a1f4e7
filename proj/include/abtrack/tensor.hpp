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
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

// The element type is fixed per build: float32 for the production library,
// float64 for the verification build used by finite-difference oracles. The
// inline namespace keeps both builds linkable into one program.
#if defined(ABTRACK_DOUBLE)
#define ABTRACK_PRECISION_NS f64
#else
#define ABTRACK_PRECISION_NS f32
#endif

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

#if defined(ABTRACK_DOUBLE)
using real = double;
#else
using real = float;
#endif

using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Dense row-major float32 array. Value type; no autograd state lives here
// (see Tape for the differentiable view).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, real fill = 0.0f);
  Tensor(Shape shape, std::vector<real> data);

  static Tensor scalar(real v) { return Tensor(Shape{1}, std::vector<real>{v}); }
  static Tensor from(std::initializer_list<real> values);
  static Tensor matrix(int rows, int cols, std::initializer_list<real> values);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-2 accessors; a rank-1 tensor is viewed as a single row.
  int rows() const;
  int cols() const;

  real* data() { return data_.data(); }
  const real* data() const { return data_.data(); }
  std::span<real> values() { return data_; }
  std::span<const real> values() const { return data_; }
  std::vector<real>& storage() { return data_; }
  const std::vector<real>& storage() const { return data_; }

  real& operator[](std::size_t i) { return data_[i]; }
  real operator[](std::size_t i) const { return data_[i]; }
  real& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols() + c]; }
  real at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols() + c]; }

  // Validity check: false if any element is NaN or Inf.
  bool all_finite() const;
  Tensor reshaped(Shape shape) const;
  void fill(real v);

 private:
  Shape shape_;
  std::vector<real> data_;
};

real max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
