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

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "abtrack/tensor.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

// Named trainable tensor. The gradient buffer always matches the value shape.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v);

  void zero_grad();
  std::size_t numel() const { return value.size(); }
};

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive and not cleared.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr && id_ >= 0; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  real item() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Ordered record of operations. Nodes are appended in evaluation order, so
// every node's inputs precede it and a reverse sweep is a valid backward
// traversal. A tape built with record_grad = false keeps values only.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  explicit Tape(bool record_grad = true) : record_grad_(record_grad) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);
  // Leaf bound to a Parameter; one node per parameter per tape.
  Var param(Parameter& p);

  // Computes node gradients of `loss` and adds leaf gradients into the bound
  // Parameters. Repeated calls accumulate.
  void backward(Var loss);
  // Node gradients only; Parameters untouched until accumulate_into_params.
  void propagate(Var loss);
  void accumulate_into_params(real weight = 1.0f);

  bool record_grad() const { return record_grad_; }
  std::size_t size() const { return nodes_.size(); }
  void clear();

  // Kernel-facing API.
  Var push(Tensor value, std::vector<int> inputs, BackwardFn fn);
  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Tensor& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  // Gradient buffer of an input, zero-initialised on first use.
  Tensor& grad_buffer(int id);
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  const std::vector<int>& inputs(int id) const { return nodes_[static_cast<std::size_t>(id)].inputs; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<int> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  bool record_grad_;
  std::deque<Node> nodes_;
  std::unordered_map<Parameter*, int> param_nodes_;
};

void zero_grads(const std::vector<Parameter*>& params);

enum class UnaryKind { Identity, Sigmoid, Gelu, Relu, Abs, Clip };

struct Unary {
  UnaryKind kind = UnaryKind::Identity;
  real lo = 0.0f;
  real hi = 1.0f;

  static Unary identity() { return {UnaryKind::Identity}; }
  static Unary sigmoid() { return {UnaryKind::Sigmoid}; }
  static Unary gelu() { return {UnaryKind::Gelu}; }
  static Unary relu() { return {UnaryKind::Relu}; }
  static Unary abs() { return {UnaryKind::Abs}; }
  static Unary clip(real lo, real hi);
};

real sigmoid(real x);
real gelu(real x);

// Differentiable kernels. Matrices are rank-2; "row" operands are rank-1 of
// the column extent (or 1 x n) and broadcast across rows.
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, real s);
Var add_scalar(Var a, real s);
Var add_row(Var x, Var row);
Var mul_row(Var x, Var row);
Var mul_col(Var x, Var col);
Var softmax_rows(Var x);
Var layer_norm(Var x, Var scale, Var shift, real eps = 1e-5f);
Var apply_unary(Var x, Unary kind);
Var transpose(Var x);
Var reshape(Var x, Shape shape);
Var slice_rows(Var x, int begin, int end);
Var slice_cols(Var x, int begin, int end);
Var gather_cols(Var x, const std::vector<int>& cols);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var sum(Var x);
Var mean(Var x);
Var element(Var x, std::size_t index);
Var stack(const std::vector<Var>& scalars);
// 3x3, stride 1, zero padding 1. Input is (H*W) x C in row-major grid order;
// output is (H*W) x (9*C) ordered (ky, kx, c).
Var im2col3x3(Var x, int height, int width);

inline Var sigmoid(Var x) { return apply_unary(x, Unary::sigmoid()); }
inline Var gelu(Var x) { return apply_unary(x, Unary::gelu()); }
inline Var relu(Var x) { return apply_unary(x, Unary::relu()); }
inline Var abs(Var x) { return apply_unary(x, Unary::abs()); }
inline Var clip(Var x, real lo, real hi) { return apply_unary(x, Unary::clip(lo, hi)); }

namespace kernels {
// C = A * B with 64-bit accumulation. A: m x k, B: k x n.
void gemm(const real* a, const real* b, real* c, int m, int k, int n);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
}  // namespace kernels

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
