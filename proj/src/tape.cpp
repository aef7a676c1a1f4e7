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

#include "abtrack/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "abtrack/errors.hpp"

namespace abtrack {
inline namespace ABTRACK_PRECISION_NS {

namespace {

void accumulate(Tensor& dst, const Tensor& src) {
  real* d = dst.data();
  const real* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

// Row operands may be [n] or [1 x n].
int row_extent(const Tensor& t, const char* op) {
  if (t.rank() == 1) return t.dim(0);
  if (t.rank() == 2 && t.dim(0) == 1) return t.dim(1);
  throw DimensionError(std::string(op) + ": expected a row vector, got " + shape_str(t.shape()));
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

}  // namespace

Parameter::Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
  grad = Tensor(value.shape(), 0.0f);
}

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) {
    grad = Tensor(value.shape(), 0.0f);
  } else {
    grad.fill(0.0f);
  }
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->needs_grad(id_); }

real Var::item() const {
  const Tensor& v = value();
  if (v.size() != 1) throw ContractError("item() on non-scalar " + shape_str(v.shape()));
  return v[0];
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_grad_;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Var v = leaf(p.value);
  nodes_.back().param = &p;
  param_nodes_.emplace(&p, v.id());
  return v;
}

Var Tape::push(Tensor value, std::vector<int> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (record_grad_) {
    n.requires_grad = std::any_of(inputs.begin(), inputs.end(), [this](int id) { return needs_grad(id); });
  }
  if (n.requires_grad) {
    n.inputs = std::move(inputs);
    n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor& Tape::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0f);
  return n.grad;
}

void Tape::propagate(Var loss) {
  if (loss.tape() != this) throw ContractError("backward: loss does not belong to this tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be a scalar, got " + shape_str(loss.value().shape()));
  }
  if (!record_grad_) throw ContractError("backward: tape was built without gradient recording");
  for (Node& n : nodes_) n.grad = Tensor();
  grad_buffer(loss.id()).fill(1.0f);
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
}

void Tape::accumulate_into_params(real weight) {
  for (auto& [p, id] : param_nodes_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) continue;
    if (p->grad.shape() != p->value.shape()) p->zero_grad();
    real* g = p->grad.data();
    const real* s = n.grad.data();
    for (std::size_t i = 0; i < p->grad.size(); ++i) g[i] += weight * s[i];
  }
}

void Tape::backward(Var loss) {
  propagate(loss);
  accumulate_into_params();
}

void Tape::clear() {
  nodes_.clear();
  param_nodes_.clear();
}

Unary Unary::clip(real lo, real hi) {
  if (lo > hi) throw ContractError("clip: lower bound exceeds upper bound");
  return {UnaryKind::Clip, lo, hi};
}

real sigmoid(real x) {
  if (x >= 0.0f) {
    const real z = std::exp(-x);
    return 1.0f / (1.0f + z);
  }
  const real z = std::exp(x);
  return z / (1.0f + z);
}

real gelu(real x) {
  return 0.5f * x * (1.0f + std::erf(x * static_cast<real>(std::numbers::sqrt2 / 2.0)));
}

namespace kernels {

void gemm(const real* a, const real* b, real* c, int m, int k, int n) {
  // Double accumulators, four rows of A per sweep over a double copy of B.
  thread_local std::vector<double> bd, acc;
  const auto nn = static_cast<std::size_t>(n);
  bd.resize(static_cast<std::size_t>(k) * nn);
  for (std::size_t i = 0; i < bd.size(); ++i) bd[i] = b[i];
  acc.resize(4 * nn);
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    std::fill(acc.begin(), acc.end(), 0.0);
    double* c0 = acc.data();
    double* c1 = c0 + nn;
    double* c2 = c1 + nn;
    double* c3 = c2 + nn;
    const real* a0 = a + static_cast<std::size_t>(i) * k;
    const real* a1 = a0 + k;
    const real* a2 = a1 + k;
    const real* a3 = a2 + k;
    for (int p = 0; p < k; ++p) {
      const double v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
      const double* br = bd.data() + static_cast<std::size_t>(p) * nn;
      for (std::size_t j = 0; j < nn; ++j) {
        const double bv = br[j];
        c0[j] += v0 * bv;
        c1[j] += v1 * bv;
        c2[j] += v2 * bv;
        c3[j] += v3 * bv;
      }
    }
    real* out = c + static_cast<std::size_t>(i) * nn;
    for (std::size_t j = 0; j < 4 * nn; ++j) out[j] = static_cast<real>(acc[j]);
  }
  for (; i < m; ++i) {
    double* ac = acc.data();
    std::fill(ac, ac + nn, 0.0);
    const real* arow = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* br = bd.data() + static_cast<std::size_t>(p) * nn;
      for (std::size_t j = 0; j < nn; ++j) ac[j] += av * br[j];
    }
    real* crow = c + static_cast<std::size_t>(i) * nn;
    for (std::size_t j = 0; j < nn; ++j) crow[j] = static_cast<real>(ac[j]);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tensor c(Shape{a.dim(0), b.dim(1)});
  gemm(a.data(), b.data(), c.data(), a.dim(0), a.dim(1), b.dim(1));
  return c;
}

Tensor transpose(const Tensor& a) {
  const int r = a.dim(0);
  const int cc = a.dim(1);
  Tensor t(Shape{cc, r});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < cc; ++j) t.data()[static_cast<std::size_t>(j) * r + i] = a.data()[static_cast<std::size_t>(i) * cc + j];
  return t;
}

}  // namespace kernels

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  if (av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: inner extents differ, " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  }
  Tensor out = kernels::matmul(av, bv);
  const int ia = a.id();
  const int ib = b.id();
  return a.tape()->push(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) accumulate(t.grad_buffer(ia), kernels::matmul(g, kernels::transpose(t.value(ib))));
    if (t.needs_grad(ib)) accumulate(t.grad_buffer(ib), kernels::matmul(kernels::transpose(t.value(ia)), g));
  });
}

Var matmul_nt(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul_nt");
  require_matrix(bv, "matmul_nt");
  if (av.dim(1) != bv.dim(1)) {
    throw DimensionError("matmul_nt: inner extents differ, " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()) + "^T");
  }
  Tensor out = kernels::matmul(av, kernels::transpose(bv));
  const int ia = a.id();
  const int ib = b.id();
  return a.tape()->push(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    // C = A B^T: dA = G B, dB = G^T A
    if (t.needs_grad(ia)) accumulate(t.grad_buffer(ia), kernels::matmul(g, t.value(ib)));
    if (t.needs_grad(ib)) accumulate(t.grad_buffer(ib), kernels::matmul(kernels::transpose(g), t.value(ia)));
  });
}

Var add(Var a, Var b) {
  require_same(a.value(), b.value(), "add");
  Tensor out = a.value();
  accumulate(out, b.value());
  const int ia = a.id();
  const int ib = b.id();
  return a.tape()->push(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    if (t.needs_grad(ia)) accumulate(t.grad_buffer(ia), t.grad(self));
    if (t.needs_grad(ib)) accumulate(t.grad_buffer(ib), t.grad(self));
  });
}

Var sub(Var a, Var b) {
  require_same(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const int ia = a.id();
  const int ib = b.id();
  return a.tape()->push(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    if (t.needs_grad(ia)) accumulate(t.grad_buffer(ia), t.grad(self));
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      const Tensor& g = t.grad(self);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const int ia = a.id();
  const int ib = b.id();
  return a.tape()->push(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      const Tensor& bv = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      const Tensor& av = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, real s) {
  Tensor out = a.value();
  for (real& v : out.values()) v *= s;
  const int ia = a.id();
  return a.tape()->push(std::move(out), {ia}, [ia, s](Tape& t, int self) {
    Tensor& ga = t.grad_buffer(ia);
    const Tensor& g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var add_scalar(Var a, real s) {
  Tensor out = a.value();
  for (real& v : out.values()) v += s;
  const int ia = a.id();
  return a.tape()->push(std::move(out), {ia}, [ia](Tape& t, int self) { accumulate(t.grad_buffer(ia), t.grad(self)); });
}

Var add_row(Var x, Var row) {
  const Tensor& xv = x.value();
  const int cols = xv.cols();
  if (row_extent(row.value(), "add_row") != cols) {
    throw DimensionError("add_row: " + shape_str(xv.shape()) + " vs row " + shape_str(row.value().shape()));
  }
  const int rows = xv.rows();
  Tensor out = xv;
  const real* r = row.value().data();
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out.data()[static_cast<std::size_t>(i) * cols + j] += r[j];
  const int ix = x.id();
  const int ir = row.id();
  return x.tape()->push(std::move(out), {ix, ir}, [ix, ir, rows, cols](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ix)) accumulate(t.grad_buffer(ix), g);
    if (t.needs_grad(ir)) {
      Tensor& gr = t.grad_buffer(ir);
      for (int j = 0; j < cols; ++j) {
        double s = 0.0;
        for (int i = 0; i < rows; ++i) s += g.data()[static_cast<std::size_t>(i) * cols + j];
        gr[static_cast<std::size_t>(j)] += static_cast<real>(s);
      }
    }
  });
}

Var mul_row(Var x, Var row) {
  const Tensor& xv = x.value();
  const int cols = xv.cols();
  if (row_extent(row.value(), "mul_row") != cols) {
    throw DimensionError("mul_row: " + shape_str(xv.shape()) + " vs row " + shape_str(row.value().shape()));
  }
  const int rows = xv.rows();
  Tensor out = xv;
  const real* r = row.value().data();
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out.data()[static_cast<std::size_t>(i) * cols + j] *= r[j];
  const int ix = x.id();
  const int ir = row.id();
  return x.tape()->push(std::move(out), {ix, ir}, [ix, ir, rows, cols](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ix)) {
      Tensor& gx = t.grad_buffer(ix);
      const real* r = t.value(ir).data();
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
          const std::size_t k = static_cast<std::size_t>(i) * cols + j;
          gx[k] += g[k] * r[j];
        }
    }
    if (t.needs_grad(ir)) {
      Tensor& gr = t.grad_buffer(ir);
      const Tensor& xv = t.value(ix);
      for (int j = 0; j < cols; ++j) {
        double s = 0.0;
        for (int i = 0; i < rows; ++i) {
          const std::size_t k = static_cast<std::size_t>(i) * cols + j;
          s += static_cast<double>(g[k]) * xv[k];
        }
        gr[static_cast<std::size_t>(j)] += static_cast<real>(s);
      }
    }
  });
}

Var mul_col(Var x, Var col) {
  const Tensor& xv = x.value();
  require_matrix(xv, "mul_col");
  const int rows = xv.rows();
  const int cols = xv.cols();
  if (col.value().size() != static_cast<std::size_t>(rows)) {
    throw DimensionError("mul_col: " + shape_str(xv.shape()) + " vs column " + shape_str(col.value().shape()));
  }
  Tensor out = xv;
  const real* c = col.value().data();
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out.data()[static_cast<std::size_t>(i) * cols + j] *= c[i];
  const int ix = x.id();
  const int ic = col.id();
  return x.tape()->push(std::move(out), {ix, ic}, [ix, ic, rows, cols](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ix)) {
      Tensor& gx = t.grad_buffer(ix);
      const real* c = t.value(ic).data();
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
          const std::size_t k = static_cast<std::size_t>(i) * cols + j;
          gx[k] += g[k] * c[i];
        }
    }
    if (t.needs_grad(ic)) {
      Tensor& gc = t.grad_buffer(ic);
      const Tensor& xv = t.value(ix);
      for (int i = 0; i < rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < cols; ++j) {
          const std::size_t k = static_cast<std::size_t>(i) * cols + j;
          s += static_cast<double>(g[k]) * xv[k];
        }
        gc[static_cast<std::size_t>(i)] += static_cast<real>(s);
      }
    }
  });
}

Var softmax_rows(Var x) {
  const Tensor& xv = x.value();
  const int rows = xv.rows();
  const int cols = xv.cols();
  Tensor out(xv.shape());
  for (int i = 0; i < rows; ++i) {
    const real* xr = xv.data() + static_cast<std::size_t>(i) * cols;
    real* yr = out.data() + static_cast<std::size_t>(i) * cols;
    real mx = xr[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
    double s = 0.0;
    for (int j = 0; j < cols; ++j) s += std::exp(static_cast<double>(xr[j]) - mx);
    for (int j = 0; j < cols; ++j) yr[j] = static_cast<real>(std::exp(static_cast<double>(xr[j]) - mx) / s);
  }
  const int ix = x.id();
  return x.tape()->push(std::move(out), {ix}, [ix, rows, cols](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_buffer(ix);
    for (int i = 0; i < rows; ++i) {
      const std::size_t o = static_cast<std::size_t>(i) * cols;
      double dot = 0.0;
      for (int j = 0; j < cols; ++j) dot += static_cast<double>(g[o + j]) * y[o + j];
      for (int j = 0; j < cols; ++j) gx[o + j] += static_cast<real>(y[o + j] * (g[o + j] - dot));
    }
  });
}

Var layer_norm(Var x, Var scale_v, Var shift_v, real eps) {
  const Tensor& xv = x.value();
  require_matrix(xv, "layer_norm");
  const int rows = xv.rows();
  const int d = xv.cols();
  if (row_extent(scale_v.value(), "layer_norm") != d || row_extent(shift_v.value(), "layer_norm") != d) {
    throw DimensionError("layer_norm: token dim " + std::to_string(d) + " vs scale " +
                         shape_str(scale_v.value().shape()) + " / shift " + shape_str(shift_v.value().shape()));
  }
  if (!(eps > 0.0f)) throw ContractError("layer_norm: eps must be positive");
  Tensor out(xv.shape());
  Tensor xhat(xv.shape());
  std::vector<real> rstd(static_cast<std::size_t>(rows));
  const real* sc = scale_v.value().data();
  const real* sh = shift_v.value().data();
  for (int i = 0; i < rows; ++i) {
    const std::size_t o = static_cast<std::size_t>(i) * d;
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += xv[o + j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = xv[o + j] - mu;
      var += c * c;
    }
    var /= d;
    const double r = 1.0 / std::sqrt(var + eps);
    rstd[static_cast<std::size_t>(i)] = static_cast<real>(r);
    for (int j = 0; j < d; ++j) {
      const double h = (xv[o + j] - mu) * r;
      xhat[o + j] = static_cast<real>(h);
      out[o + j] = static_cast<real>(h * sc[j] + sh[j]);
    }
  }
  const int ix = x.id();
  const int is = scale_v.id();
  const int ib = shift_v.id();
  return x.tape()->push(std::move(out), {ix, is, ib},
                        [ix, is, ib, rows, d, xhat = std::move(xhat), rstd = std::move(rstd)](Tape& t, int self) {
                          const Tensor& g = t.grad(self);
                          const real* sc = t.value(is).data();
                          if (t.needs_grad(ix)) {
                            Tensor& gx = t.grad_buffer(ix);
                            for (int i = 0; i < rows; ++i) {
                              const std::size_t o = static_cast<std::size_t>(i) * d;
                              double m1 = 0.0;
                              double m2 = 0.0;
                              for (int j = 0; j < d; ++j) {
                                const double dh = static_cast<double>(g[o + j]) * sc[j];
                                m1 += dh;
                                m2 += dh * xhat[o + j];
                              }
                              m1 /= d;
                              m2 /= d;
                              const double r = rstd[static_cast<std::size_t>(i)];
                              for (int j = 0; j < d; ++j) {
                                const double dh = static_cast<double>(g[o + j]) * sc[j];
                                gx[o + j] += static_cast<real>(r * (dh - m1 - xhat[o + j] * m2));
                              }
                            }
                          }
                          if (t.needs_grad(is) || t.needs_grad(ib)) {
                            std::vector<double> gs(static_cast<std::size_t>(d), 0.0);
                            std::vector<double> gb(static_cast<std::size_t>(d), 0.0);
                            for (int i = 0; i < rows; ++i) {
                              const std::size_t o = static_cast<std::size_t>(i) * d;
                              for (int j = 0; j < d; ++j) {
                                gs[static_cast<std::size_t>(j)] += static_cast<double>(g[o + j]) * xhat[o + j];
                                gb[static_cast<std::size_t>(j)] += g[o + j];
                              }
                            }
                            if (t.needs_grad(is)) {
                              Tensor& g_s = t.grad_buffer(is);
                              for (int j = 0; j < d; ++j) g_s[static_cast<std::size_t>(j)] += static_cast<real>(gs[static_cast<std::size_t>(j)]);
                            }
                            if (t.needs_grad(ib)) {
                              Tensor& g_b = t.grad_buffer(ib);
                              for (int j = 0; j < d; ++j) g_b[static_cast<std::size_t>(j)] += static_cast<real>(gb[static_cast<std::size_t>(j)]);
                            }
                          }
                        });
}

namespace {

real unary_forward(const Unary& u, real x) {
  switch (u.kind) {
    case UnaryKind::Identity:
      return x;
    case UnaryKind::Sigmoid:
      return sigmoid(x);
    case UnaryKind::Gelu:
      return gelu(x);
    case UnaryKind::Relu:
      return x > 0.0f ? x : 0.0f;
    case UnaryKind::Abs:
      return std::fabs(x);
    case UnaryKind::Clip:
      return std::clamp(x, u.lo, u.hi);
  }
  return x;
}

// Subgradient 0 at every kink.
real unary_derivative(const Unary& u, real x, real y) {
  switch (u.kind) {
    case UnaryKind::Identity:
      return 1.0f;
    case UnaryKind::Sigmoid:
      return y * (1.0f - y);
    case UnaryKind::Gelu: {
      const double xd = x;
      const double cdf = 0.5 * (1.0 + std::erf(xd / std::numbers::sqrt2));
      const double pdf = std::exp(-0.5 * xd * xd) / std::sqrt(2.0 * std::numbers::pi);
      return static_cast<real>(cdf + xd * pdf);
    }
    case UnaryKind::Relu:
      return x > 0.0f ? 1.0f : 0.0f;
    case UnaryKind::Abs:
      return x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f);
    case UnaryKind::Clip:
      return (x > u.lo && x < u.hi) ? 1.0f : 0.0f;
  }
  return 1.0f;
}

}  // namespace

Var apply_unary(Var x, Unary kind) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = unary_forward(kind, xv[i]);
  const int ix = x.id();
  return x.tape()->push(std::move(out), {ix}, [ix, kind](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& xv = t.value(ix);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * unary_derivative(kind, xv[i], y[i]);
  });
}

Var transpose(Var x) {
  require_matrix(x.value(), "transpose");
  Tensor out = kernels::transpose(x.value());
  const int ix = x.id();
  return x.tape()->push(std::move(out), {ix}, [ix](Tape& t, int self) {
    accumulate(t.grad_buffer(ix), kernels::transpose(t.grad(self)));
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const int ix = x.id();
  return x.tape()->push(std::move(out), {ix}, [ix](Tape& t, int self) {
    Tensor& gx = t.grad_buffer(ix);
    const Tensor& g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var slice_rows(Var x, int begin, int end) {
  const Tensor& xv = x.value();
  require_matrix(xv, "slice_rows");
  if (begin < 0 || end > xv.rows() || begin >= end) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                         shape_str(xv.shape()));
  }
  const int cols = xv.cols();
  const std::size_t off = static_cast<std::size_t>(begin) * cols;
  const std::size_t n = static_cast<std::size_t>(end - begin) * cols;
  Tensor out(Shape{end - begin, cols}, std::vector<real>(xv.data() + off, xv.data() + off + n));
  const int ix = x.id();
  return x.tape()->push(std::move(out), {ix}, [ix, off](Tape& t, int self) {
    Tensor& gx = t.grad_buffer(ix);
    const Tensor& g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) gx[off + i] += g[i];
  });
}

Var slice_cols(Var x, int begin, int end) {
  const Tensor& xv = x.value();
  require_matrix(xv, "slice_cols");
  if (begin < 0 || end > xv.cols() || begin >= end) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                         shape_str(xv.shape()));
  }
  const int rows = xv.rows();
  const int cols = xv.cols();
  const int w = end - begin;
  Tensor out(Shape{rows, w});
  for (int i = 0; i < rows; ++i)
    std::copy_n(xv.data() + static_cast<std::size_t>(i) * cols + begin, w, out.data() + static_cast<std::size_t>(i) * w);
  const int ix = x.id();
  return x.tape()->push(std::move(out), {ix}, [ix, rows, cols, begin, w](Tape& t, int self) {
    Tensor& gx = t.grad_buffer(ix);
    const Tensor& g = t.grad(self);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < w; ++j)
        gx[static_cast<std::size_t>(i) * cols + begin + j] += g[static_cast<std::size_t>(i) * w + j];
  });
}

Var gather_cols(Var x, const std::vector<int>& idx) {
  const Tensor& xv = x.value();
  require_matrix(xv, "gather_cols");
  const int rows = xv.rows();
  const int cols = xv.cols();
  const int w = static_cast<int>(idx.size());
  if (w == 0) throw DimensionError("gather_cols: empty index set");
  for (int c : idx) {
    if (c < 0 || c >= cols) throw DimensionError("gather_cols: index " + std::to_string(c) + " out of " + shape_str(xv.shape()));
  }
  Tensor out(Shape{rows, w});
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < w; ++j)
      out[static_cast<std::size_t>(i) * w + j] = xv[static_cast<std::size_t>(i) * cols + idx[static_cast<std::size_t>(j)]];
  const int ix = x.id();
  return x.tape()->push(std::move(out), {ix}, [ix, rows, cols, w, idx](Tape& t, int self) {
    Tensor& gx = t.grad_buffer(ix);
    const Tensor& g = t.grad(self);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < w; ++j)
        gx[static_cast<std::size_t>(i) * cols + idx[static_cast<std::size_t>(j)]] += g[static_cast<std::size_t>(i) * w + j];
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const int cols = parts.front().value().cols();
  int rows = 0;
  std::vector<int> ids;
  for (const Var& p : parts) {
    if (p.value().cols() != cols) {
      throw DimensionError("concat_rows: " + shape_str(parts.front().shape()) + " vs " + shape_str(p.shape()));
    }
    rows += p.value().rows();
    ids.push_back(p.id());
  }
  Tensor out(Shape{rows, cols});
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + off);
    off += p.value().size();
  }
  std::vector<int> inputs = ids;
  return parts.front().tape()->push(std::move(out), std::move(inputs), [ids](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    std::size_t o = 0;
    for (int id : ids) {
      const std::size_t n = t.value(id).size();
      if (t.needs_grad(id)) {
        Tensor& gi = t.grad_buffer(id);
        for (std::size_t i = 0; i < n; ++i) gi[i] += g[o + i];
      }
      o += n;
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const int rows = parts.front().value().rows();
  int cols = 0;
  std::vector<int> ids;
  std::vector<int> widths;
  for (const Var& p : parts) {
    require_matrix(p.value(), "concat_cols");
    if (p.value().rows() != rows) {
      throw DimensionError("concat_cols: " + shape_str(parts.front().shape()) + " vs " + shape_str(p.shape()));
    }
    cols += p.value().cols();
    ids.push_back(p.id());
    widths.push_back(p.value().cols());
  }
  Tensor out(Shape{rows, cols});
  int c0 = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    const int w = widths[k];
    for (int i = 0; i < rows; ++i)
      std::copy_n(pv.data() + static_cast<std::size_t>(i) * w, w, out.data() + static_cast<std::size_t>(i) * cols + c0);
    c0 += w;
  }
  std::vector<int> inputs = ids;
  return parts.front().tape()->push(std::move(out), std::move(inputs), [ids, widths, rows, cols](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    int c = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const int w = widths[k];
      if (t.needs_grad(ids[k])) {
        Tensor& gi = t.grad_buffer(ids[k]);
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < w; ++j) gi[static_cast<std::size_t>(i) * w + j] += g[static_cast<std::size_t>(i) * cols + c + j];
      }
      c += w;
    }
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (real v : x.value().values()) s += v;
  const int ix = x.id();
  return x.tape()->push(Tensor::scalar(static_cast<real>(s)), {ix}, [ix](Tape& t, int self) {
    const real g = t.grad(self)[0];
    for (real& v : t.grad_buffer(ix).values()) v += g;
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  double s = 0.0;
  for (real v : x.value().values()) s += v;
  const int ix = x.id();
  return x.tape()->push(Tensor::scalar(static_cast<real>(s / static_cast<double>(n))), {ix}, [ix, n](Tape& t, int self) {
    const real g = t.grad(self)[0] / static_cast<real>(n);
    for (real& v : t.grad_buffer(ix).values()) v += g;
  });
}

Var element(Var x, std::size_t index) {
  if (index >= x.value().size()) {
    throw DimensionError("element: index " + std::to_string(index) + " out of " + shape_str(x.shape()));
  }
  const int ix = x.id();
  return x.tape()->push(Tensor::scalar(x.value()[index]), {ix}, [ix, index](Tape& t, int self) {
    t.grad_buffer(ix)[index] += t.grad(self)[0];
  });
}

Var stack(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw ContractError("stack: no inputs");
  std::vector<real> vals;
  std::vector<int> ids;
  for (const Var& s : scalars) {
    if (s.value().size() != 1) throw DimensionError("stack: non-scalar input " + shape_str(s.shape()));
    vals.push_back(s.value()[0]);
    ids.push_back(s.id());
  }
  std::vector<int> inputs = ids;
  const int count = static_cast<int>(vals.size());
  Tensor out(Shape{count}, std::move(vals));
  return scalars.front().tape()->push(std::move(out), std::move(inputs), [ids](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k)
      if (t.needs_grad(ids[k])) t.grad_buffer(ids[k])[0] += g[k];
  });
}

Var im2col3x3(Var x, int height, int width) {
  const Tensor& xv = x.value();
  require_matrix(xv, "im2col3x3");
  if (xv.rows() != height * width) {
    throw DimensionError("im2col3x3: " + shape_str(xv.shape()) + " is not a " + std::to_string(height) + "x" +
                         std::to_string(width) + " grid");
  }
  const int c = xv.cols();
  const int oc = 9 * c;
  Tensor out(Shape{height * width, oc}, 0.0f);
  for (int r = 0; r < height; ++r)
    for (int q = 0; q < width; ++q) {
      real* orow = out.data() + static_cast<std::size_t>(r * width + q) * oc;
      for (int ky = 0; ky < 3; ++ky) {
        const int rr = r + ky - 1;
        if (rr < 0 || rr >= height) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int qq = q + kx - 1;
          if (qq < 0 || qq >= width) continue;
          std::copy_n(xv.data() + static_cast<std::size_t>(rr * width + qq) * c, c, orow + (ky * 3 + kx) * c);
        }
      }
    }
  const int ix = x.id();
  return x.tape()->push(std::move(out), {ix}, [ix, height, width, c, oc](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(ix);
    for (int r = 0; r < height; ++r)
      for (int q = 0; q < width; ++q) {
        const real* grow = g.data() + static_cast<std::size_t>(r * width + q) * oc;
        for (int ky = 0; ky < 3; ++ky) {
          const int rr = r + ky - 1;
          if (rr < 0 || rr >= height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int qq = q + kx - 1;
            if (qq < 0 || qq >= width) continue;
            real* dst = gx.data() + static_cast<std::size_t>(rr * width + qq) * c;
            const real* src = grow + (ky * 3 + kx) * c;
            for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
          }
        }
      }
  });
}

}  // namespace ABTRACK_PRECISION_NS
}  // namespace abtrack
