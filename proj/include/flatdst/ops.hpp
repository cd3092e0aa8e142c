// Copyright 2026 The flatdst Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Differentiable ops. All matrices are rank-2 row-major; vectors passed as
// biases or gains may be rank 1 or 1 x d.

#ifndef FLATDST_OPS_HPP_
#define FLATDST_OPS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "flatdst/autograd.hpp"
#include "flatdst/error.hpp"
#include "flatdst/mask.hpp"
#include "flatdst/tensor.hpp"

namespace flatdst {

namespace kernels {

// C[m x n] += A[m x k] * B[k x n]. Zero entries of A are skipped, so a row
// of A with zeros in some columns never reads the matching rows of B.
template <Real T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    const T* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ai[p];
      if (av == T{0}) continue;
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[m x n] += A[m x k] * B[n x k]^T
template <Real T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    T* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      T acc{0};
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

// C[m x n] += A[k x m]^T * B[k x n]
template <Real T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t k, std::size_t m,
             std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* ap = a + p * m;
    const T* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = ap[i];
      if (av == T{0}) continue;
      T* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

}  // namespace kernels

namespace detail {

template <Real T>
void require_matrix(const Var<T>& v, const char* op) {
  if (v.value().rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " +
                         shape_string(v.shape()));
  }
}

template <Real T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

template <Real T>
Tensor<T>* grad_of(const std::shared_ptr<Node<T>>& n) {
  return n->requires_grad ? &n->ensure_grad() : nullptr;
}

}  // namespace detail

template <Real T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  detail::require_matrix(a, "matmul");
  detail::require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ, " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor<T> out = Tensor<T>::matrix(m, n);
  kernels::gemm_nn(a.value().data().data(), b.value().data().data(),
                   out.data().data(), m, k, n);
  return Var<T>::op(std::move(out), {a, b}, [m, k, n](detail::Node<T>& self) {
    const auto& pa = self.parents[0];
    const auto& pb = self.parents[1];
    const T* g = self.grad.data().data();
    if (auto* ga = detail::grad_of(pa)) {
      kernels::gemm_nt(g, pb->value.data().data(), ga->data().data(), m, n, k);
    }
    if (auto* gb = detail::grad_of(pb)) {
      kernels::gemm_tn(pa->value.data().data(), g, gb->data().data(), m, k, n);
    }
  });
}

// a[m x k] * b[n x k]^T
template <Real T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  detail::require_matrix(a, "matmul_nt");
  detail::require_matrix(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw DimensionError("matmul_nt: inner dimensions differ, " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()) + "^T");
  }
  Tensor<T> out = Tensor<T>::matrix(m, n);
  kernels::gemm_nt(a.value().data().data(), b.value().data().data(),
                   out.data().data(), m, k, n);
  return Var<T>::op(std::move(out), {a, b}, [m, k, n](detail::Node<T>& self) {
    const auto& pa = self.parents[0];
    const auto& pb = self.parents[1];
    const T* g = self.grad.data().data();
    if (auto* ga = detail::grad_of(pa)) {
      kernels::gemm_nn(g, pb->value.data().data(), ga->data().data(), m, n, k);
    }
    if (auto* gb = detail::grad_of(pb)) {
      kernels::gemm_tn(g, pa->value.data().data(), gb->data().data(), m, n, k);
    }
  });
}

// x[n x d_in] * w[d_in x d_out] + b[d_out]; b may be undefined.
template <Real T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  detail::require_matrix(x, "linear");
  detail::require_matrix(w, "linear");
  const std::size_t n = x.rows(), din = x.cols(), dout = w.cols();
  if (w.rows() != din) {
    throw DimensionError("linear: input " + shape_string(x.shape()) +
                         " vs weight " + shape_string(w.shape()));
  }
  const bool has_bias = b.defined();
  if (has_bias && b.value().size() != dout) {
    throw DimensionError("linear: bias " + shape_string(b.shape()) +
                         " vs output width " + std::to_string(dout));
  }
  Tensor<T> out = Tensor<T>::matrix(n, dout);
  if (has_bias) {
    const auto bv = b.value().data();
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(bv.begin(), bv.end(), out.row(i).begin());
    }
  }
  kernels::gemm_nn(x.value().data().data(), w.value().data().data(),
                   out.data().data(), n, din, dout);
  std::vector<Var<T>> parents{x, w};
  if (has_bias) parents.push_back(b);
  return Var<T>::op(std::move(out), std::move(parents),
                    [n, din, dout](detail::Node<T>& self) {
    const T* g = self.grad.data().data();
    const auto& px = self.parents[0];
    const auto& pw = self.parents[1];
    if (auto* gx = detail::grad_of(px)) {
      kernels::gemm_nt(g, pw->value.data().data(), gx->data().data(), n, dout, din);
    }
    if (auto* gw = detail::grad_of(pw)) {
      kernels::gemm_tn(px->value.data().data(), g, gw->data().data(), n, din, dout);
    }
    if (self.parents.size() > 2) {
      if (auto* gb = detail::grad_of(self.parents[2])) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < dout; ++j) (*gb)[j] += g[i * dout + j];
        }
      }
    }
  });
}

template <Real T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  out.add_(b.value());
  return Var<T>::op(std::move(out), {a, b}, [](detail::Node<T>& self) {
    for (const auto& p : self.parents) {
      if (auto* gp = detail::grad_of(p)) gp->add_(self.grad);
    }
  });
}

// Sum of equally shaped values.
template <Real T>
Var<T> add_n(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw ContractError("add_n of an empty list");
  Tensor<T> out = xs.front().value();
  for (std::size_t i = 1; i < xs.size(); ++i) {
    detail::require_same_shape(xs.front(), xs[i], "add_n");
    out.add_(xs[i].value());
  }
  return Var<T>::op(std::move(out), xs, [](detail::Node<T>& self) {
    for (const auto& p : self.parents) {
      if (auto* gp = detail::grad_of(p)) gp->add_(self.grad);
    }
  });
}

// Adds a length-d row vector to every row of x[n x d].
template <Real T>
Var<T> add_row(const Var<T>& x, const Var<T>& bias) {
  detail::require_matrix(x, "add_row");
  const std::size_t n = x.rows(), d = x.cols();
  if (bias.value().size() != d) {
    throw DimensionError("add_row: bias " + shape_string(bias.shape()) +
                         " vs " + shape_string(x.shape()));
  }
  Tensor<T> out = x.value();
  const auto bv = bias.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < d; ++j) r[j] += bv[j];
  }
  return Var<T>::op(std::move(out), {x, bias}, [n, d](detail::Node<T>& self) {
    if (auto* gx = detail::grad_of(self.parents[0])) gx->add_(self.grad);
    if (auto* gb = detail::grad_of(self.parents[1])) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) (*gb)[j] += self.grad.at(i, j);
      }
    }
  });
}

// Elementwise product.
template <Real T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return Var<T>::op(std::move(out), {a, b}, [](detail::Node<T>& self) {
    const auto& pa = self.parents[0];
    const auto& pb = self.parents[1];
    if (auto* ga = detail::grad_of(pa)) {
      for (std::size_t i = 0; i < ga->size(); ++i) {
        (*ga)[i] += self.grad[i] * pb->value[i];
      }
    }
    if (auto* gb = detail::grad_of(pb)) {
      for (std::size_t i = 0; i < gb->size(); ++i) {
        (*gb)[i] += self.grad[i] * pa->value[i];
      }
    }
  });
}

template <Real T>
Var<T> scale(const Var<T>& x, T factor) {
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v *= factor;
  return Var<T>::op(std::move(out), {x}, [factor](detail::Node<T>& self) {
    if (auto* gx = detail::grad_of(self.parents[0])) {
      for (std::size_t i = 0; i < gx->size(); ++i) {
        (*gx)[i] += factor * self.grad[i];
      }
    }
  });
}

template <Real T>
Var<T> sum(const Var<T>& x) {
  T total{0};
  for (T v : x.value().data()) total += v;
  return Var<T>::op(Tensor<T>::scalar(total), {x}, [](detail::Node<T>& self) {
    if (auto* gx = detail::grad_of(self.parents[0])) {
      const T g = self.grad[0];
      for (auto& v : gx->data()) v += g;
    }
  });
}

template <Real T>
Var<T> mean(const Var<T>& x) {
  if (x.value().size() == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(x), T{1} / static_cast<T>(x.value().size()));
}

// Row-wise softmax of logits + mask. Hidden entries get probability exactly
// zero; the row maximum is taken over visible entries only.
template <Real T>
Var<T> masked_softmax(const Var<T>& logits, const AttentionMask& mask) {
  detail::require_matrix(logits, "masked_softmax");
  const std::size_t r = logits.rows(), c = logits.cols();
  if (mask.rows() != r || mask.cols() != c) {
    throw DimensionError("masked_softmax: logits " + shape_string(logits.shape()) +
                         " vs mask " + shape_string({mask.rows(), mask.cols()}));
  }
  const bool dense = mask.all_visible();
  Tensor<T> probs = Tensor<T>::matrix(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    const auto in = logits.value().row(i);
    auto out = probs.row(i);
    T mx = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < c; ++j) {
      if (dense || mask.visible(i, j)) {
        mx = std::max(mx, in[j]);
        any = true;
      }
    }
    if (!any) {
      throw InvalidMaskError("masked_softmax: row " + std::to_string(i) +
                             " is fully masked");
    }
    T total{0};
    for (std::size_t j = 0; j < c; ++j) {
      if (dense || mask.visible(i, j)) {
        out[j] = std::exp(in[j] - mx);
        total += out[j];
      }
    }
    const T inv = T{1} / total;
    for (std::size_t j = 0; j < c; ++j) out[j] *= inv;
  }
  return Var<T>::op(std::move(probs), {logits}, [r, c](detail::Node<T>& self) {
    auto* gx = detail::grad_of(self.parents[0]);
    if (!gx) return;
    for (std::size_t i = 0; i < r; ++i) {
      const auto p = self.value.row(i);
      const auto g = self.grad.row(i);
      T dot{0};
      for (std::size_t j = 0; j < c; ++j) dot += p[j] * g[j];
      auto out = gx->row(i);
      for (std::size_t j = 0; j < c; ++j) out[j] += p[j] * (g[j] - dot);
    }
  });
}

// Per-row normalization to zero mean and unit variance, then gain * x + bias.
template <Real T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias,
                  T eps) {
  detail::require_matrix(x, "layer_norm");
  if (!(eps > T{0})) throw ContractError("layer_norm needs eps > 0");
  const std::size_t n = x.rows(), d = x.cols();
  if (gain.value().size() != d || bias.value().size() != d) {
    throw DimensionError("layer_norm: gain/bias " + shape_string(gain.shape()) +
                         "/" + shape_string(bias.shape()) + " vs " +
                         shape_string(x.shape()));
  }
  auto xhat = std::make_shared<Tensor<T>>(Tensor<T>::matrix(n, d));
  auto inv_sd = std::make_shared<std::vector<T>>(n);
  Tensor<T> out = Tensor<T>::matrix(n, d);
  const auto g = gain.value().data();
  const auto b = bias.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    const auto in = x.value().row(i);
    T mu{0};
    for (T v : in) mu += v;
    mu /= static_cast<T>(d);
    T var{0};
    for (T v : in) var += (v - mu) * (v - mu);
    var /= static_cast<T>(d);
    const T s = T{1} / std::sqrt(var + eps);
    (*inv_sd)[i] = s;
    auto xh = xhat->row(i);
    auto o = out.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      xh[j] = (in[j] - mu) * s;
      o[j] = g[j] * xh[j] + b[j];
    }
  }
  return Var<T>::op(std::move(out), {x, gain, bias},
                    [n, d, xhat, inv_sd](detail::Node<T>& self) {
    const auto& px = self.parents[0];
    const auto& pg = self.parents[1];
    auto* gx = detail::grad_of(px);
    auto* gg = detail::grad_of(pg);
    auto* gb = detail::grad_of(self.parents[2]);
    const auto gain_v = pg->value.data();
    std::vector<T> dxhat(d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto dy = self.grad.row(i);
      const auto xh = xhat->row(i);
      if (gg) {
        for (std::size_t j = 0; j < d; ++j) (*gg)[j] += dy[j] * xh[j];
      }
      if (gb) {
        for (std::size_t j = 0; j < d; ++j) (*gb)[j] += dy[j];
      }
      if (gx) {
        T m1{0}, m2{0};
        for (std::size_t j = 0; j < d; ++j) {
          dxhat[j] = dy[j] * gain_v[j];
          m1 += dxhat[j];
          m2 += dxhat[j] * xh[j];
        }
        m1 /= static_cast<T>(d);
        m2 /= static_cast<T>(d);
        auto out = gx->row(i);
        const T s = (*inv_sd)[i];
        for (std::size_t j = 0; j < d; ++j) {
          out[j] += s * (dxhat[j] - m1 - xh[j] * m2);
        }
      }
    }
  });
}

// Exact (erf-based) GELU.
template <Real T>
Var<T> gelu(const Var<T>& x) {
  Tensor<T> out = x.value();
  const T rsqrt2 = T{1} / std::sqrt(T{2});
  for (auto& v : out.data()) v = T{0.5} * v * (T{1} + std::erf(v * rsqrt2));
  return Var<T>::op(std::move(out), {x}, [rsqrt2](detail::Node<T>& self) {
    const auto& px = self.parents[0];
    auto* gx = detail::grad_of(px);
    if (!gx) return;
    const T inv_sqrt_2pi = T{1} / std::sqrt(T{2} * std::numbers::pi_v<T>);
    for (std::size_t i = 0; i < gx->size(); ++i) {
      const T v = px->value[i];
      const T cdf = T{0.5} * (T{1} + std::erf(v * rsqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T{-0.5} * v * v);
      (*gx)[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

template <Real T>
Var<T> tanh(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v = std::tanh(v);
  return Var<T>::op(std::move(out), {x}, [](detail::Node<T>& self) {
    auto* gx = detail::grad_of(self.parents[0]);
    if (!gx) return;
    for (std::size_t i = 0; i < gx->size(); ++i) {
      const T y = self.value[i];
      (*gx)[i] += self.grad[i] * (T{1} - y * y);
    }
  });
}

// Rows table[ids[i]]; backward scatter-adds into the table.
template <Real T>
Var<T> embedding(const Var<T>& table, std::span<const int> ids,
                 const char* table_name = "embedding") {
  detail::require_matrix(table, "embedding");
  const std::size_t size = table.rows(), d = table.cols();
  std::vector<std::size_t> idx(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= size) {
      throw IndexError(std::string(table_name) + " id " + std::to_string(ids[i]) +
                       " at index " + std::to_string(i) +
                       " out of range [0, " + std::to_string(size) + ")");
    }
    idx[i] = static_cast<std::size_t>(ids[i]);
  }
  Tensor<T> out = Tensor<T>::matrix(ids.size(), d);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto src = table.value().row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return Var<T>::op(std::move(out), {table}, [idx, d](detail::Node<T>& self) {
    auto* gt = detail::grad_of(self.parents[0]);
    if (!gt) return;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto dst = gt->row(idx[i]);
      const auto g = self.grad.row(i);
      for (std::size_t j = 0; j < d; ++j) dst[j] += g[j];
    }
  });
}

// Selects rows of x in the given order.
template <Real T>
Var<T> gather_rows(const Var<T>& x, std::span<const std::size_t> rows) {
  detail::require_matrix(x, "gather_rows");
  const std::size_t n = x.rows(), d = x.cols();
  Tensor<T> out = Tensor<T>::matrix(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) {
      throw IndexError("gather_rows: row " + std::to_string(rows[i]) +
                       " out of range for " + shape_string(x.shape()));
    }
    const auto src = x.value().row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return Var<T>::op(std::move(out), {x}, [idx, d](detail::Node<T>& self) {
    auto* gx = detail::grad_of(self.parents[0]);
    if (!gx) return;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto dst = gx->row(idx[i]);
      const auto g = self.grad.row(i);
      for (std::size_t j = 0; j < d; ++j) dst[j] += g[j];
    }
  });
}

// Stacks matrices with equal column counts vertically.
template <Real T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_rows of an empty list");
  const std::size_t d = parts.front().cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_matrix(p, "concat_rows");
    if (p.cols() != d) {
      throw DimensionError("concat_rows: widths " + shape_string(parts.front().shape()) +
                           " vs " + shape_string(p.shape()));
    }
    total += p.rows();
  }
  Tensor<T> out = Tensor<T>::matrix(total, d);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(offset * d));
    offset += p.rows();
  }
  return Var<T>::op(std::move(out), parts, [d](detail::Node<T>& self) {
    std::size_t off = 0;
    for (const auto& p : self.parents) {
      const std::size_t len = p->value.rows() * d;
      if (auto* gp = detail::grad_of(p)) {
        for (std::size_t i = 0; i < len; ++i) (*gp)[i] += self.grad[off + i];
      }
      off += len;
    }
  });
}

// Columns [start, start + width) of x.
template <Real T>
Var<T> slice_cols(const Var<T>& x, std::size_t start, std::size_t width) {
  detail::require_matrix(x, "slice_cols");
  const std::size_t n = x.rows(), d = x.cols();
  if (start + width > d) {
    throw DimensionError("slice_cols [" + std::to_string(start) + ", " +
                         std::to_string(start + width) + ") of " +
                         shape_string(x.shape()));
  }
  Tensor<T> out = Tensor<T>::matrix(n, width);
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = x.value().row(i);
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(start),
              src.begin() + static_cast<std::ptrdiff_t>(start + width),
              out.row(i).begin());
  }
  return Var<T>::op(std::move(out), {x}, [n, start, width](detail::Node<T>& self) {
    auto* gx = detail::grad_of(self.parents[0]);
    if (!gx) return;
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = gx->row(i);
      const auto g = self.grad.row(i);
      for (std::size_t j = 0; j < width; ++j) dst[start + j] += g[j];
    }
  });
}

// Places matrices with equal row counts side by side.
template <Real T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_cols of an empty list");
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    detail::require_matrix(p, "concat_cols");
    if (p.rows() != n) {
      throw DimensionError("concat_cols: heights " + shape_string(parts.front().shape()) +
                           " vs " + shape_string(p.shape()));
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor<T> out = Tensor<T>::matrix(n, total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = p.value().row(i);
      std::copy(src.begin(), src.end(),
                out.row(i).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += p.cols();
  }
  return Var<T>::op(std::move(out), parts, [n, total, widths](detail::Node<T>& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      if (auto* gp = detail::grad_of(self.parents[k])) {
        for (std::size_t i = 0; i < n; ++i) {
          auto dst = gp->row(i);
          for (std::size_t j = 0; j < widths[k]; ++j) {
            dst[j] += self.grad[i * total + off + j];
          }
        }
      }
      off += widths[k];
    }
  });
}

// Mean over rows of -log softmax(logits[i])[targets[i]].
template <Real T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const int> targets) {
  detail::require_matrix(logits, "cross_entropy");
  const std::size_t n = logits.rows(), c = logits.cols();
  if (targets.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + shape_string(logits.shape()));
  }
  if (n == 0) throw ContractError("cross_entropy over zero rows");
  auto probs = std::make_shared<Tensor<T>>(Tensor<T>::matrix(n, c));
  std::vector<int> tgt(targets.begin(), targets.end());
  T total{0};
  for (std::size_t i = 0; i < n; ++i) {
    if (tgt[i] < 0 || static_cast<std::size_t>(tgt[i]) >= c) {
      throw IndexError("cross_entropy: target " + std::to_string(tgt[i]) +
                       " out of range [0, " + std::to_string(c) + ")");
    }
    const auto row = logits.value().row(i);
    const T mx = *std::max_element(row.begin(), row.end());
    T z{0};
    auto p = probs->row(i);
    for (std::size_t j = 0; j < c; ++j) {
      p[j] = std::exp(row[j] - mx);
      z += p[j];
    }
    for (std::size_t j = 0; j < c; ++j) p[j] /= z;
    total += std::log(z) + mx - row[static_cast<std::size_t>(tgt[i])];
  }
  const T inv_n = T{1} / static_cast<T>(n);
  return Var<T>::op(Tensor<T>::scalar(total * inv_n), {logits},
                    [probs, tgt, n, c, inv_n](detail::Node<T>& self) {
    auto* gx = detail::grad_of(self.parents[0]);
    if (!gx) return;
    const T g = self.grad[0] * inv_n;
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = gx->row(i);
      const auto p = probs->row(i);
      for (std::size_t j = 0; j < c; ++j) dst[j] += g * p[j];
      dst[static_cast<std::size_t>(tgt[i])] -= g;
    }
  });
}

}  // namespace flatdst

#endif  // FLATDST_OPS_HPP_
