// Copyright 2026 the vcx authors
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

#ifndef VCX_NN_TAPE_HPP_
#define VCX_NN_TAPE_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcx/nn/tensor.hpp"

namespace vcx::nn {

enum class PoolKind { kGap, kGmp, kGwrp };

inline const char* pool_name(PoolKind k) {
  switch (k) {
    case PoolKind::kGap: return "GAP";
    case PoolKind::kGmp: return "GMP";
    case PoolKind::kGwrp: return "GWRP";
  }
  return "?";
}

inline PoolKind pool_from_name(const std::string& s) {
  if (s == "GAP" || s == "gap") return PoolKind::kGap;
  if (s == "GMP" || s == "gmp") return PoolKind::kGmp;
  if (s == "GWRP" || s == "gwrp") return PoolKind::kGwrp;
  throw std::invalid_argument("unknown pooling kind: " + s);
}

namespace detail {

// c[m x n] += a[m x k] * b[k x n]. The p-loop accumulates each output element
// left to right; the inner j-loop is over independent elements and free to
// vectorize. All other matrix products are routed through this kernel via
// explicit transposes so every reduction has one fixed order.
template <typename S>
void gemm_nn_acc(const S* a, const S* b, S* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const S* arow = a + static_cast<size_t>(i) * k;
    S* crow = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const S apv = arow[p];
      const S* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += apv * brow[j];
    }
  }
}

template <typename S>
TensorT<S> transposed(const TensorT<S>& x) {
  TensorT<S> y({x.cols(), x.rows()});
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) y.at2(j, i) = x.at2(i, j);
  return y;
}

template <typename S>
S stable_sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

template <typename S>
S stable_softplus(S x) {
  // max(x,0) + log1p(exp(-|x|))
  const S m = x > S(0) ? x : S(0);
  return m + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace detail

template <typename S>
class TapeT;

/// Lightweight handle to a node on a tape.
template <typename S>
struct ValT {
  TapeT<S>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const TensorT<S>& value() const;
};

[[noreturn]] inline void shape_error(const std::string& op, const std::vector<int>& a,
                                     const std::vector<int>& b) {
  throw std::invalid_argument(op + ": incompatible shapes " +
                              TensorT<float>::shape_str(a) + " and " +
                              TensorT<float>::shape_str(b));
}

/// Reverse-mode tape. Nodes are appended in evaluation order, so node ids form
/// a topological order and backward() is a single descending sweep that visits
/// each reachable node exactly once.
template <typename S>
class TapeT {
 public:
  struct Node {
    TensorT<S> value;
    TensorT<S> grad;
    std::vector<int> parents;
    std::function<void(TapeT&, int)> backprop;
    bool needs_grad = false;
    bool grad_alloc = false;
  };

  ValT<S> constant(TensorT<S> v) {
    return make(std::move(v), {}, nullptr, false);
  }

  /// Parameter leaf: on backward, the accumulated gradient is added into
  /// `grad_sink` (which outlives the tape).
  ValT<S> leaf(const TensorT<S>& v, S* grad_sink) {
    ValT<S> out = make(TensorT<S>(v.shape(), std::vector<S>(v.data(), v.data() + v.numel())),
                       {}, nullptr, true);
    Node& n = nodes_[static_cast<size_t>(out.id)];
    n.backprop = [grad_sink](TapeT& t, int self) {
      const TensorT<S>& g = t.nodes_[static_cast<size_t>(self)].grad;
      for (size_t i = 0; i < g.numel(); ++i) grad_sink[i] += g[i];
    };
    return out;
  }

  Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
  size_t size() const { return nodes_.size(); }

  void clear() { nodes_.clear(); }

  /// Reverse sweep from a scalar loss. Gradients of parameter leaves are
  /// accumulated into their sinks.
  void backward(ValT<S> loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: node from another tape");
    Node& ln = node(loss.id);
    if (ln.value.numel() != 1)
      throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                  TensorT<S>::shape_str(ln.value.shape()));
    // Mark the subgraph below the loss.
    std::vector<char> reach(nodes_.size(), 0);
    std::vector<int> stack{loss.id};
    reach[static_cast<size_t>(loss.id)] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int p : nodes_[static_cast<size_t>(u)].parents) {
        if (!reach[static_cast<size_t>(p)] && nodes_[static_cast<size_t>(p)].needs_grad) {
          reach[static_cast<size_t>(p)] = 1;
          stack.push_back(p);
        }
      }
    }
    ensure_grad(loss.id);
    node(loss.id).grad[0] = S(1);
    for (int u = loss.id; u >= 0; --u) {
      if (!reach[static_cast<size_t>(u)]) continue;
      Node& n = nodes_[static_cast<size_t>(u)];
      if (!n.grad_alloc || !n.backprop) continue;
      n.backprop(*this, u);
    }
  }

  void ensure_grad(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.grad_alloc) {
      n.grad = TensorT<S>(n.value.shape());
      n.grad_alloc = true;
    }
  }

  // -- internal: node construction -------------------------------------------

  ValT<S> make(TensorT<S> value, std::vector<int> parents,
               std::function<void(TapeT&, int)> backprop, bool needs_grad) {
    Node n;
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.needs_grad = needs_grad;
    if (needs_grad) n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    ValT<S> v;
    v.tape = this;
    v.id = static_cast<int>(nodes_.size()) - 1;
    return v;
  }

  bool any_needs_grad(std::initializer_list<int> ids) const {
    for (int id : ids)
      if (nodes_[static_cast<size_t>(id)].needs_grad) return true;
    return false;
  }

  TensorT<S>& grad_of(int id) {
    ensure_grad(id);
    return nodes_[static_cast<size_t>(id)].grad;
  }

 private:
  std::vector<Node> nodes_;
};

template <typename S>
const TensorT<S>& ValT<S>::value() const {
  return tape->node(id).value;
}

// ---------------------------------------------------------------------------
// Operations. Free functions building nodes; each op documents its gradient
// only where the rule is not the obvious one.
// ---------------------------------------------------------------------------

namespace detail {
template <typename S>
void check_same_tape(const ValT<S>& a, const ValT<S>& b) {
  if (a.tape != b.tape) throw std::invalid_argument("operands from different tapes");
}
}  // namespace detail

template <typename S>
ValT<S> add(ValT<S> a, ValT<S> b) {
  detail::check_same_tape(a, b);
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  const TensorT<S>& bv = b.value();
  if (!av.same_shape(bv)) shape_error("add", av.shape(), bv.shape());
  TensorT<S> out(av.shape());
  for (size_t i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[i];
  const bool ng = t.any_needs_grad({a.id, b.id});
  return t.make(std::move(out), {a.id, b.id},
                [pa = a.id, pb = b.id](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  if (tp.node(pa).needs_grad) {
                    TensorT<S>& ga = tp.grad_of(pa);
                    for (size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
                  }
                  if (tp.node(pb).needs_grad) {
                    TensorT<S>& gb = tp.grad_of(pb);
                    for (size_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
                  }
                },
                ng);
}

template <typename S>
ValT<S> sub(ValT<S> a, ValT<S> b) {
  detail::check_same_tape(a, b);
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  const TensorT<S>& bv = b.value();
  if (!av.same_shape(bv)) shape_error("sub", av.shape(), bv.shape());
  TensorT<S> out(av.shape());
  for (size_t i = 0; i < out.numel(); ++i) out[i] = av[i] - bv[i];
  const bool ng = t.any_needs_grad({a.id, b.id});
  return t.make(std::move(out), {a.id, b.id},
                [pa = a.id, pb = b.id](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  if (tp.node(pa).needs_grad) {
                    TensorT<S>& ga = tp.grad_of(pa);
                    for (size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
                  }
                  if (tp.node(pb).needs_grad) {
                    TensorT<S>& gb = tp.grad_of(pb);
                    for (size_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
                  }
                },
                ng);
}

template <typename S>
ValT<S> mul(ValT<S> a, ValT<S> b) {
  detail::check_same_tape(a, b);
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  const TensorT<S>& bv = b.value();
  if (!av.same_shape(bv)) shape_error("mul", av.shape(), bv.shape());
  TensorT<S> out(av.shape());
  for (size_t i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[i];
  const bool ng = t.any_needs_grad({a.id, b.id});
  return t.make(std::move(out), {a.id, b.id},
                [pa = a.id, pb = b.id](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  const TensorT<S>& av2 = tp.node(pa).value;
                  const TensorT<S>& bv2 = tp.node(pb).value;
                  if (tp.node(pa).needs_grad) {
                    TensorT<S>& ga = tp.grad_of(pa);
                    for (size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * bv2[i];
                  }
                  if (tp.node(pb).needs_grad) {
                    TensorT<S>& gb = tp.grad_of(pb);
                    for (size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * av2[i];
                  }
                },
                ng);
}

template <typename S>
ValT<S> scale(ValT<S> a, S c) {
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  TensorT<S> out(av.shape());
  for (size_t i = 0; i < out.numel(); ++i) out[i] = av[i] * c;
  const bool ng = t.any_needs_grad({a.id});
  return t.make(std::move(out), {a.id},
                [pa = a.id, c](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  TensorT<S>& ga = tp.grad_of(pa);
                  for (size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * c;
                },
                ng);
}

template <typename S>
ValT<S> neg(ValT<S> a) {
  return scale(a, S(-1));
}

/// a[m x k] * b[k x n] -> [m x n]. d a = g * b^T, d b = a^T * g; both are
/// evaluated through the one NN kernel after materializing the transpose.
template <typename S>
ValT<S> matmul(ValT<S> a, ValT<S> b) {
  detail::check_same_tape(a, b);
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  const TensorT<S>& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows())
    shape_error("matmul", av.shape(), bv.shape());
  const int m = av.rows(), k = av.cols(), n = bv.cols();
  TensorT<S> out({m, n});
  detail::gemm_nn_acc(av.data(), bv.data(), out.data(), m, k, n);
  const bool ng = t.any_needs_grad({a.id, b.id});
  return t.make(std::move(out), {a.id, b.id},
                [pa = a.id, pb = b.id, m, k, n](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  const TensorT<S>& av2 = tp.node(pa).value;
                  const TensorT<S>& bv2 = tp.node(pb).value;
                  if (tp.node(pa).needs_grad) {
                    TensorT<S> bt = detail::transposed(bv2);
                    detail::gemm_nn_acc(g.data(), bt.data(), tp.grad_of(pa).data(), m, n, k);
                  }
                  if (tp.node(pb).needs_grad) {
                    TensorT<S> at = detail::transposed(av2);
                    detail::gemm_nn_acc(at.data(), g.data(), tp.grad_of(pb).data(), k, m, n);
                  }
                },
                ng);
}

template <typename S>
ValT<S> transpose2d(ValT<S> a) {
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  if (av.rank() != 2) throw std::invalid_argument("transpose2d: rank-2 tensor required");
  const bool ng = t.any_needs_grad({a.id});
  return t.make(detail::transposed(av), {a.id},
                [pa = a.id](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  TensorT<S> gt = detail::transposed(g);
                  TensorT<S>& ga = tp.grad_of(pa);
                  for (size_t i = 0; i < gt.numel(); ++i) ga[i] += gt[i];
                },
                ng);
}

template <typename S>
ValT<S> reshape(ValT<S> a, std::vector<int> new_shape) {
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  if (TensorT<S>::numel_of(new_shape) != av.numel())
    shape_error("reshape", av.shape(), new_shape);
  TensorT<S> out(new_shape, std::vector<S>(av.data(), av.data() + av.numel()));
  const bool ng = t.any_needs_grad({a.id});
  return t.make(std::move(out), {a.id},
                [pa = a.id](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  TensorT<S>& ga = tp.grad_of(pa);
                  for (size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
                },
                ng);
}

template <typename S>
ValT<S> slice_rows(ValT<S> a, int r0, int r1) {
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  if (av.rank() != 2 || r0 < 0 || r1 > av.rows() || r0 >= r1)
    throw std::invalid_argument("slice_rows: bad range [" + std::to_string(r0) + "," +
                                std::to_string(r1) + ") for " +
                                TensorT<S>::shape_str(av.shape()));
  const int c = av.cols();
  TensorT<S> out({r1 - r0, c});
  std::copy(av.data() + static_cast<size_t>(r0) * c, av.data() + static_cast<size_t>(r1) * c,
            out.data());
  const bool ng = t.any_needs_grad({a.id});
  return t.make(std::move(out), {a.id},
                [pa = a.id, r0, c](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  TensorT<S>& ga = tp.grad_of(pa);
                  S* dst = ga.data() + static_cast<size_t>(r0) * c;
                  for (size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
                },
                ng);
}

template <typename S>
ValT<S> slice_cols(ValT<S> a, int c0, int c1) {
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  if (av.rank() != 2 || c0 < 0 || c1 > av.cols() || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range");
  const int r = av.rows(), c = av.cols(), w = c1 - c0;
  TensorT<S> out({r, w});
  for (int i = 0; i < r; ++i)
    std::copy(av.data() + static_cast<size_t>(i) * c + c0,
              av.data() + static_cast<size_t>(i) * c + c1,
              out.data() + static_cast<size_t>(i) * w);
  const bool ng = t.any_needs_grad({a.id});
  return t.make(std::move(out), {a.id},
                [pa = a.id, c0, c, w](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  TensorT<S>& ga = tp.grad_of(pa);
                  const int r2 = g.rows();
                  for (int i = 0; i < r2; ++i) {
                    S* dst = ga.data() + static_cast<size_t>(i) * c + c0;
                    const S* src = g.data() + static_cast<size_t>(i) * w;
                    for (int j = 0; j < w; ++j) dst[j] += src[j];
                  }
                },
                ng);
}

template <typename S>
ValT<S> concat_rows(const std::vector<ValT<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty list");
  TapeT<S>& t = *parts[0].tape;
  const int c = parts[0].value().cols();
  int rows = 0;
  std::vector<int> ids;
  for (const auto& p : parts) {
    detail::check_same_tape(parts[0], p);
    if (p.value().rank() != 2 || p.value().cols() != c)
      shape_error("concat_rows", parts[0].value().shape(), p.value().shape());
    rows += p.value().rows();
    ids.push_back(p.id);
  }
  TensorT<S> out({rows, c});
  size_t off = 0;
  for (const auto& p : parts) {
    const TensorT<S>& pv = p.value();
    std::copy(pv.data(), pv.data() + pv.numel(), out.data() + off);
    off += pv.numel();
  }
  bool ng = false;
  for (int id : ids) ng = ng || t.node(id).needs_grad;
  return t.make(std::move(out), ids,
                [ids](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  size_t off2 = 0;
                  for (int id : ids) {
                    const size_t n = tp.node(id).value.numel();
                    if (tp.node(id).needs_grad) {
                      TensorT<S>& gp = tp.grad_of(id);
                      for (size_t i = 0; i < n; ++i) gp[i] += g[off2 + i];
                    }
                    off2 += n;
                  }
                },
                ng);
}

template <typename S>
ValT<S> concat_cols(const std::vector<ValT<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty list");
  TapeT<S>& t = *parts[0].tape;
  const int r = parts[0].value().rows();
  int cols = 0;
  std::vector<int> ids;
  std::vector<int> widths;
  for (const auto& p : parts) {
    detail::check_same_tape(parts[0], p);
    if (p.value().rank() != 2 || p.value().rows() != r)
      shape_error("concat_cols", parts[0].value().shape(), p.value().shape());
    cols += p.value().cols();
    ids.push_back(p.id);
    widths.push_back(p.value().cols());
  }
  TensorT<S> out({r, cols});
  int coff = 0;
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    const TensorT<S>& pv = parts[pi].value();
    for (int i = 0; i < r; ++i)
      std::copy(pv.data() + static_cast<size_t>(i) * widths[pi],
                pv.data() + static_cast<size_t>(i + 1) * widths[pi],
                out.data() + static_cast<size_t>(i) * cols + coff);
    coff += widths[pi];
  }
  bool ng = false;
  for (int id : ids) ng = ng || t.node(id).needs_grad;
  return t.make(std::move(out), ids,
                [ids, widths, cols, r](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  int coff2 = 0;
                  for (size_t pi = 0; pi < ids.size(); ++pi) {
                    if (tp.node(ids[pi]).needs_grad) {
                      TensorT<S>& gp = tp.grad_of(ids[pi]);
                      for (int i = 0; i < r; ++i) {
                        const S* src = g.data() + static_cast<size_t>(i) * cols + coff2;
                        S* dst = gp.data() + static_cast<size_t>(i) * widths[pi];
                        for (int j = 0; j < widths[pi]; ++j) dst[j] += src[j];
                      }
                    }
                    coff2 += widths[pi];
                  }
                },
                ng);
}

/// Row-wise softmax with max subtraction.
template <typename S>
ValT<S> softmax_rows(ValT<S> a) {
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  if (av.rank() != 2) throw std::invalid_argument("softmax_rows: rank-2 tensor required");
  const int r = av.rows(), c = av.cols();
  TensorT<S> out({r, c});
  for (int i = 0; i < r; ++i) {
    const S* x = av.data() + static_cast<size_t>(i) * c;
    S* y = out.data() + static_cast<size_t>(i) * c;
    S mx = x[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    S sum = S(0);
    for (int j = 0; j < c; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    const S inv = S(1) / sum;
    for (int j = 0; j < c; ++j) y[j] *= inv;
  }
  const bool ng = t.any_needs_grad({a.id});
  return t.make(std::move(out), {a.id},
                [pa = a.id, r, c](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  const TensorT<S>& y = tp.node(self).value;
                  TensorT<S>& ga = tp.grad_of(pa);
                  for (int i = 0; i < r; ++i) {
                    const S* gr = g.data() + static_cast<size_t>(i) * c;
                    const S* yr = y.data() + static_cast<size_t>(i) * c;
                    S dot = S(0);
                    for (int j = 0; j < c; ++j) dot += gr[j] * yr[j];
                    S* gar = ga.data() + static_cast<size_t>(i) * c;
                    for (int j = 0; j < c; ++j) gar[j] += yr[j] * (gr[j] - dot);
                  }
                },
                ng);
}

template <typename S>
ValT<S> log_softmax_rows(ValT<S> a) {
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  if (av.rank() != 2) throw std::invalid_argument("log_softmax_rows: rank-2 tensor required");
  const int r = av.rows(), c = av.cols();
  TensorT<S> out({r, c});
  for (int i = 0; i < r; ++i) {
    const S* x = av.data() + static_cast<size_t>(i) * c;
    S* y = out.data() + static_cast<size_t>(i) * c;
    S mx = x[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    S sum = S(0);
    for (int j = 0; j < c; ++j) sum += std::exp(x[j] - mx);
    const S lse = mx + std::log(sum);
    for (int j = 0; j < c; ++j) y[j] = x[j] - lse;
  }
  const bool ng = t.any_needs_grad({a.id});
  return t.make(std::move(out), {a.id},
                [pa = a.id, r, c](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  const TensorT<S>& y = tp.node(self).value;
                  TensorT<S>& ga = tp.grad_of(pa);
                  for (int i = 0; i < r; ++i) {
                    const S* gr = g.data() + static_cast<size_t>(i) * c;
                    const S* yr = y.data() + static_cast<size_t>(i) * c;
                    S gsum = S(0);
                    for (int j = 0; j < c; ++j) gsum += gr[j];
                    S* gar = ga.data() + static_cast<size_t>(i) * c;
                    for (int j = 0; j < c; ++j) gar[j] += gr[j] - std::exp(yr[j]) * gsum;
                  }
                },
                ng);
}

/// LayerNorm over the last dimension of a [r x c] tensor with affine params
/// gamma, beta of shape [c].
template <typename S>
ValT<S> layer_norm(ValT<S> a, ValT<S> gamma, ValT<S> beta, S eps = S(1e-5)) {
  detail::check_same_tape(a, gamma);
  detail::check_same_tape(a, beta);
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  if (av.rank() != 2) throw std::invalid_argument("layer_norm: rank-2 tensor required");
  const int r = av.rows(), c = av.cols();
  if (gamma.value().numel() != static_cast<size_t>(c) ||
      beta.value().numel() != static_cast<size_t>(c))
    shape_error("layer_norm affine", av.shape(), gamma.value().shape());
  TensorT<S> out({r, c});
  std::vector<S> xhat(static_cast<size_t>(r) * c);
  std::vector<S> inv_sigma(static_cast<size_t>(r));
  const S* gm = gamma.value().data();
  const S* bt = beta.value().data();
  for (int i = 0; i < r; ++i) {
    const S* x = av.data() + static_cast<size_t>(i) * c;
    S mean = S(0);
    for (int j = 0; j < c; ++j) mean += x[j];
    mean /= S(c);
    S var = S(0);
    for (int j = 0; j < c; ++j) var += (x[j] - mean) * (x[j] - mean);
    var /= S(c);
    const S inv = S(1) / std::sqrt(var + eps);
    inv_sigma[static_cast<size_t>(i)] = inv;
    S* xh = xhat.data() + static_cast<size_t>(i) * c;
    S* y = out.data() + static_cast<size_t>(i) * c;
    for (int j = 0; j < c; ++j) {
      xh[j] = (x[j] - mean) * inv;
      y[j] = gm[j] * xh[j] + bt[j];
    }
  }
  const bool ng = t.any_needs_grad({a.id, gamma.id, beta.id});
  return t.make(
      std::move(out), {a.id, gamma.id, beta.id},
      [pa = a.id, pg = gamma.id, pb = beta.id, r, c, xhat = std::move(xhat),
       inv_sigma = std::move(inv_sigma)](TapeT<S>& tp, int self) {
        const TensorT<S>& g = tp.node(self).grad;
        const S* gm2 = tp.node(pg).value.data();
        for (int i = 0; i < r; ++i) {
          const S* gr = g.data() + static_cast<size_t>(i) * c;
          const S* xh = xhat.data() + static_cast<size_t>(i) * c;
          if (tp.node(pb).needs_grad) {
            TensorT<S>& gb = tp.grad_of(pb);
            for (int j = 0; j < c; ++j) gb[static_cast<size_t>(j)] += gr[j];
          }
          if (tp.node(pg).needs_grad) {
            TensorT<S>& gg = tp.grad_of(pg);
            for (int j = 0; j < c; ++j) gg[static_cast<size_t>(j)] += gr[j] * xh[j];
          }
          if (tp.node(pa).needs_grad) {
            S m1 = S(0), m2 = S(0);
            for (int j = 0; j < c; ++j) {
              const S gj = gr[j] * gm2[j];
              m1 += gj;
              m2 += gj * xh[j];
            }
            m1 /= S(c);
            m2 /= S(c);
            const S inv = inv_sigma[static_cast<size_t>(i)];
            S* gar = tp.grad_of(pa).data() + static_cast<size_t>(i) * c;
            for (int j = 0; j < c; ++j)
              gar[j] += inv * (gr[j] * gm2[j] - m1 - xh[j] * m2);
          }
        }
      },
      ng);
}

/// Exact GELU: 0.5 x (1 + erf(x / sqrt(2))).
template <typename S>
ValT<S> gelu(ValT<S> a) {
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  TensorT<S> out(av.shape());
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  for (size_t i = 0; i < out.numel(); ++i) {
    const double x = static_cast<double>(av[i]);
    out[i] = static_cast<S>(0.5 * x * (1.0 + std::erf(x * kInvSqrt2)));
  }
  const bool ng = t.any_needs_grad({a.id});
  return t.make(std::move(out), {a.id},
                [pa = a.id](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  const TensorT<S>& x = tp.node(pa).value;
                  TensorT<S>& ga = tp.grad_of(pa);
                  constexpr double kInvSqrt2pi = 0.39894228040143267794;
                  for (size_t i = 0; i < g.numel(); ++i) {
                    const double xi = static_cast<double>(x[i]);
                    const double cdf = 0.5 * (1.0 + std::erf(xi * 0.70710678118654752440));
                    const double pdf = kInvSqrt2pi * std::exp(-0.5 * xi * xi);
                    ga[i] += g[i] * static_cast<S>(cdf + xi * pdf);
                  }
                },
                ng);
}

template <typename S>
ValT<S> sigmoid(ValT<S> a) {
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  TensorT<S> out(av.shape());
  for (size_t i = 0; i < out.numel(); ++i) out[i] = detail::stable_sigmoid(av[i]);
  const bool ng = t.any_needs_grad({a.id});
  return t.make(std::move(out), {a.id},
                [pa = a.id](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  const TensorT<S>& y = tp.node(self).value;
                  TensorT<S>& ga = tp.grad_of(pa);
                  for (size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * y[i] * (S(1) - y[i]);
                },
                ng);
}

template <typename S>
ValT<S> softplus(ValT<S> a) {
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  TensorT<S> out(av.shape());
  for (size_t i = 0; i < out.numel(); ++i) out[i] = detail::stable_softplus(av[i]);
  const bool ng = t.any_needs_grad({a.id});
  return t.make(std::move(out), {a.id},
                [pa = a.id](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  const TensorT<S>& x = tp.node(pa).value;
                  TensorT<S>& ga = tp.grad_of(pa);
                  for (size_t i = 0; i < g.numel(); ++i)
                    ga[i] += g[i] * detail::stable_sigmoid(x[i]);
                },
                ng);
}

template <typename S>
ValT<S> relu(ValT<S> a) {
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  TensorT<S> out(av.shape());
  for (size_t i = 0; i < out.numel(); ++i) out[i] = av[i] > S(0) ? av[i] : S(0);
  const bool ng = t.any_needs_grad({a.id});
  return t.make(std::move(out), {a.id},
                [pa = a.id](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  const TensorT<S>& x = tp.node(pa).value;
                  TensorT<S>& ga = tp.grad_of(pa);
                  for (size_t i = 0; i < g.numel(); ++i)
                    if (x[i] > S(0)) ga[i] += g[i];
                },
                ng);
}

/// x[r x c] + b[c], broadcast over rows.
template <typename S>
ValT<S> add_rowvec(ValT<S> a, ValT<S> b) {
  detail::check_same_tape(a, b);
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  const TensorT<S>& bv = b.value();
  if (av.rank() != 2 || bv.numel() != static_cast<size_t>(av.cols()))
    shape_error("add_rowvec", av.shape(), bv.shape());
  const int r = av.rows(), c = av.cols();
  TensorT<S> out({r, c});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at2(i, j) = av.at2(i, j) + bv[static_cast<size_t>(j)];
  const bool ng = t.any_needs_grad({a.id, b.id});
  return t.make(std::move(out), {a.id, b.id},
                [pa = a.id, pb = b.id, r, c](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  if (tp.node(pa).needs_grad) {
                    TensorT<S>& ga = tp.grad_of(pa);
                    for (size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
                  }
                  if (tp.node(pb).needs_grad) {
                    TensorT<S>& gb = tp.grad_of(pb);
                    for (int i = 0; i < r; ++i)
                      for (int j = 0; j < c; ++j) gb[static_cast<size_t>(j)] += g.at2(i, j);
                  }
                },
                ng);
}

/// x[r x c] * v[c], broadcast over rows (per-channel scaling).
template <typename S>
ValT<S> mul_rowvec(ValT<S> a, ValT<S> b) {
  detail::check_same_tape(a, b);
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  const TensorT<S>& bv = b.value();
  if (av.rank() != 2 || bv.numel() != static_cast<size_t>(av.cols()))
    shape_error("mul_rowvec", av.shape(), bv.shape());
  const int r = av.rows(), c = av.cols();
  TensorT<S> out({r, c});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at2(i, j) = av.at2(i, j) * bv[static_cast<size_t>(j)];
  const bool ng = t.any_needs_grad({a.id, b.id});
  return t.make(std::move(out), {a.id, b.id},
                [pa = a.id, pb = b.id, r, c](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  const TensorT<S>& av2 = tp.node(pa).value;
                  const TensorT<S>& bv2 = tp.node(pb).value;
                  if (tp.node(pa).needs_grad) {
                    TensorT<S>& ga = tp.grad_of(pa);
                    for (int i = 0; i < r; ++i)
                      for (int j = 0; j < c; ++j)
                        ga.at2(i, j) += g.at2(i, j) * bv2[static_cast<size_t>(j)];
                  }
                  if (tp.node(pb).needs_grad) {
                    TensorT<S>& gb = tp.grad_of(pb);
                    for (int i = 0; i < r; ++i)
                      for (int j = 0; j < c; ++j)
                        gb[static_cast<size_t>(j)] += g.at2(i, j) * av2.at2(i, j);
                  }
                },
                ng);
}

/// Per-row mean over columns: [r x c] -> [r]. The channel-wise average pooling
/// used to turn concept tokens into logits.
template <typename S>
ValT<S> row_mean(ValT<S> a) {
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  if (av.rank() != 2) throw std::invalid_argument("row_mean: rank-2 tensor required");
  const int r = av.rows(), c = av.cols();
  TensorT<S> out({r});
  for (int i = 0; i < r; ++i) {
    S s = S(0);
    for (int j = 0; j < c; ++j) s += av.at2(i, j);
    out[static_cast<size_t>(i)] = s / S(c);
  }
  const bool ng = t.any_needs_grad({a.id});
  return t.make(std::move(out), {a.id},
                [pa = a.id, r, c](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  TensorT<S>& ga = tp.grad_of(pa);
                  for (int i = 0; i < r; ++i) {
                    const S gi = g[static_cast<size_t>(i)] / S(c);
                    for (int j = 0; j < c; ++j) ga.at2(i, j) += gi;
                  }
                },
                ng);
}

template <typename S>
ValT<S> sum_all(ValT<S> a) {
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  S s = S(0);
  for (size_t i = 0; i < av.numel(); ++i) s += av[i];
  TensorT<S> out({1});
  out[0] = s;
  const bool ng = t.any_needs_grad({a.id});
  return t.make(std::move(out), {a.id},
                [pa = a.id](TapeT<S>& tp, int self) {
                  const S g = tp.node(self).grad[0];
                  TensorT<S>& ga = tp.grad_of(pa);
                  for (size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
                },
                ng);
}

template <typename S>
ValT<S> mean_all(ValT<S> a) {
  const size_t n = a.value().numel();
  return scale(sum_all(a), S(1) / static_cast<S>(n));
}

/// Diagonal of a square matrix: [n x n] -> [n].
template <typename S>
ValT<S> diag(ValT<S> a) {
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  if (av.rank() != 2 || av.rows() != av.cols())
    throw std::invalid_argument("diag: square matrix required, got " +
                                TensorT<S>::shape_str(av.shape()));
  const int n = av.rows();
  TensorT<S> out({n});
  for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = av.at2(i, i);
  const bool ng = t.any_needs_grad({a.id});
  return t.make(std::move(out), {a.id},
                [pa = a.id, n](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  TensorT<S>& ga = tp.grad_of(pa);
                  for (int i = 0; i < n; ++i) ga.at2(i, i) += g[static_cast<size_t>(i)];
                },
                ng);
}

/// Rows scaled to unit L2 norm (with a small floor to stay differentiable at
/// zero rows): y_i = x_i / sqrt(|x_i|^2 + eps).
template <typename S>
ValT<S> l2_normalize_rows(ValT<S> a, S eps = S(1e-12)) {
  TapeT<S>& t = *a.tape;
  const TensorT<S>& av = a.value();
  if (av.rank() != 2) throw std::invalid_argument("l2_normalize_rows: rank-2 tensor required");
  const int r = av.rows(), c = av.cols();
  TensorT<S> out({r, c});
  std::vector<S> inv_norm(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) {
    S s = S(0);
    for (int j = 0; j < c; ++j) s += av.at2(i, j) * av.at2(i, j);
    const S inv = S(1) / std::sqrt(s + eps);
    inv_norm[static_cast<size_t>(i)] = inv;
    for (int j = 0; j < c; ++j) out.at2(i, j) = av.at2(i, j) * inv;
  }
  const bool ng = t.any_needs_grad({a.id});
  return t.make(std::move(out), {a.id},
                [pa = a.id, r, c, inv_norm = std::move(inv_norm)](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  const TensorT<S>& y = tp.node(self).value;
                  TensorT<S>& ga = tp.grad_of(pa);
                  for (int i = 0; i < r; ++i) {
                    S dot = S(0);
                    for (int j = 0; j < c; ++j) dot += g.at2(i, j) * y.at2(i, j);
                    const S inv = inv_norm[static_cast<size_t>(i)];
                    for (int j = 0; j < c; ++j)
                      ga.at2(i, j) += (g.at2(i, j) - dot * y.at2(i, j)) * inv;
                  }
                },
                ng);
}

/// 2-D cross-correlation, NHWC, stride 1, zero same-padding. Kernel size must
/// be odd so the spatial size is preserved exactly.
template <typename S>
ValT<S> conv2d_same(ValT<S> x, ValT<S> w, ValT<S> b) {
  detail::check_same_tape(x, w);
  detail::check_same_tape(x, b);
  TapeT<S>& t = *x.tape;
  const TensorT<S>& xv = x.value();
  const TensorT<S>& wv = w.value();
  if (xv.rank() != 3 || wv.rank() != 4) shape_error("conv2d", xv.shape(), wv.shape());
  const int h = xv.dim(0), wd = xv.dim(1), ci = xv.dim(2);
  const int kk = wv.dim(0), co = wv.dim(3);
  if (wv.dim(1) != kk || wv.dim(2) != ci) shape_error("conv2d channels", xv.shape(), wv.shape());
  if (kk % 2 == 0) throw std::invalid_argument("conv2d_same: kernel size must be odd");
  if (b.value().numel() != static_cast<size_t>(co)) shape_error("conv2d bias", wv.shape(), b.value().shape());
  const int pad = kk / 2;
  TensorT<S> out({h, wd, co});
  const S* bp = b.value().data();
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < wd; ++j) {
      S* orow = out.data() + (static_cast<size_t>(i) * wd + j) * co;
      for (int oc = 0; oc < co; ++oc) orow[oc] = bp[oc];
      for (int di = 0; di < kk; ++di) {
        const int si = i + di - pad;
        if (si < 0 || si >= h) continue;
        for (int dj = 0; dj < kk; ++dj) {
          const int sj = j + dj - pad;
          if (sj < 0 || sj >= wd) continue;
          const S* xp = xv.data() + (static_cast<size_t>(si) * wd + sj) * ci;
          const S* wp = wv.data() + (static_cast<size_t>(di) * kk + dj) * ci * co;
          for (int icx = 0; icx < ci; ++icx) {
            const S xvv = xp[icx];
            const S* wrow = wp + static_cast<size_t>(icx) * co;
            for (int oc = 0; oc < co; ++oc) orow[oc] += xvv * wrow[oc];
          }
        }
      }
    }
  }
  const bool ng = t.any_needs_grad({x.id, w.id, b.id});
  return t.make(
      std::move(out), {x.id, w.id, b.id},
      [px = x.id, pw = w.id, pb = b.id, h, wd, ci, kk, co, pad](TapeT<S>& tp, int self) {
        const TensorT<S>& g = tp.node(self).grad;
        const TensorT<S>& xv2 = tp.node(px).value;
        const TensorT<S>& wv2 = tp.node(pw).value;
        if (tp.node(pb).needs_grad) {
          TensorT<S>& gb = tp.grad_of(pb);
          for (int i = 0; i < h; ++i)
            for (int j = 0; j < wd; ++j)
              for (int oc = 0; oc < co; ++oc) gb[static_cast<size_t>(oc)] += g.at3(i, j, oc);
        }
        if (tp.node(pw).needs_grad) {
          TensorT<S>& gw = tp.grad_of(pw);
          for (int di = 0; di < kk; ++di)
            for (int dj = 0; dj < kk; ++dj)
              for (int i = 0; i < h; ++i) {
                const int si = i + di - pad;
                if (si < 0 || si >= h) continue;
                for (int j = 0; j < wd; ++j) {
                  const int sj = j + dj - pad;
                  if (sj < 0 || sj >= wd) continue;
                  const S* xp = xv2.data() + (static_cast<size_t>(si) * wd + sj) * ci;
                  const S* gp = g.data() + (static_cast<size_t>(i) * wd + j) * co;
                  S* wp = gw.data() + (static_cast<size_t>(di) * kk + dj) * ci * co;
                  for (int icx = 0; icx < ci; ++icx)
                    for (int oc = 0; oc < co; ++oc)
                      wp[static_cast<size_t>(icx) * co + oc] += xp[icx] * gp[oc];
                }
              }
        }
        if (tp.node(px).needs_grad) {
          TensorT<S>& gx = tp.grad_of(px);
          for (int i = 0; i < h; ++i)
            for (int j = 0; j < wd; ++j) {
              const S* gp = g.data() + (static_cast<size_t>(i) * wd + j) * co;
              for (int di = 0; di < kk; ++di) {
                const int si = i + di - pad;
                if (si < 0 || si >= h) continue;
                for (int dj = 0; dj < kk; ++dj) {
                  const int sj = j + dj - pad;
                  if (sj < 0 || sj >= wd) continue;
                  S* xp = gx.data() + (static_cast<size_t>(si) * wd + sj) * ci;
                  const S* wp = wv2.data() + (static_cast<size_t>(di) * kk + dj) * ci * co;
                  for (int icx = 0; icx < ci; ++icx) {
                    S acc = S(0);
                    const S* wrow = wp + static_cast<size_t>(icx) * co;
                    for (int oc = 0; oc < co; ++oc) acc += wrow[oc] * gp[oc];
                    xp[icx] += acc;
                  }
                }
              }
            }
        }
      },
      ng);
}

/// Spatial pooling [H x W x C] -> [C]. GAP: mean. GMP: max (first max in
/// row-major order receives the gradient). GWRP: descending stable sort per
/// channel, weights decay^j normalized by their sum.
template <typename S>
ValT<S> pool_spatial(ValT<S> x, PoolKind kind, S decay = S(0.9)) {
  TapeT<S>& t = *x.tape;
  const TensorT<S>& xv = x.value();
  if (xv.rank() != 3) throw std::invalid_argument("pool_spatial: rank-3 HWC tensor required");
  if (kind == PoolKind::kGwrp && !(decay > S(0) && decay <= S(1)))
    throw std::invalid_argument("pool_spatial: GWRP decay must lie in (0,1]");
  const int h = xv.dim(0), w = xv.dim(1), c = xv.dim(2);
  const int hw = h * w;
  TensorT<S> out({c});
  std::vector<int> aux;  // GMP: argmax per channel. GWRP: sort permutation.
  if (kind == PoolKind::kGap) {
    for (int ch = 0; ch < c; ++ch) {
      S s = S(0);
      for (int p = 0; p < hw; ++p) s += xv[static_cast<size_t>(p) * c + ch];
      out[static_cast<size_t>(ch)] = s / S(hw);
    }
  } else if (kind == PoolKind::kGmp) {
    aux.resize(static_cast<size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
      S best = xv[static_cast<size_t>(ch)];
      int arg = 0;
      for (int p = 1; p < hw; ++p) {
        const S v = xv[static_cast<size_t>(p) * c + ch];
        if (v > best) {
          best = v;
          arg = p;
        }
      }
      out[static_cast<size_t>(ch)] = best;
      aux[static_cast<size_t>(ch)] = arg;
    }
  } else {
    aux.resize(static_cast<size_t>(c) * hw);
    S zsum = S(0);
    S wgt = S(1);
    for (int p = 0; p < hw; ++p) {
      zsum += wgt;
      wgt *= decay;
    }
    for (int ch = 0; ch < c; ++ch) {
      int* perm = aux.data() + static_cast<size_t>(ch) * hw;
      std::iota(perm, perm + hw, 0);
      std::stable_sort(perm, perm + hw, [&](int i2, int j2) {
        return xv[static_cast<size_t>(i2) * c + ch] > xv[static_cast<size_t>(j2) * c + ch];
      });
      S s = S(0);
      S wg = S(1);
      for (int p = 0; p < hw; ++p) {
        s += wg * xv[static_cast<size_t>(perm[p]) * c + ch];
        wg *= decay;
      }
      out[static_cast<size_t>(ch)] = s / zsum;
    }
  }
  const bool ng = t.any_needs_grad({x.id});
  return t.make(std::move(out), {x.id},
                [px = x.id, kind, decay, h, w, c, aux = std::move(aux)](TapeT<S>& tp, int self) {
                  const TensorT<S>& g = tp.node(self).grad;
                  TensorT<S>& gx = tp.grad_of(px);
                  const int hw2 = h * w;
                  if (kind == PoolKind::kGap) {
                    for (int ch = 0; ch < c; ++ch) {
                      const S gi = g[static_cast<size_t>(ch)] / S(hw2);
                      for (int p = 0; p < hw2; ++p) gx[static_cast<size_t>(p) * c + ch] += gi;
                    }
                  } else if (kind == PoolKind::kGmp) {
                    for (int ch = 0; ch < c; ++ch)
                      gx[static_cast<size_t>(aux[static_cast<size_t>(ch)]) * c + ch] +=
                          g[static_cast<size_t>(ch)];
                  } else {
                    S zsum = S(0);
                    S wgt = S(1);
                    for (int p = 0; p < hw2; ++p) {
                      zsum += wgt;
                      wgt *= decay;
                    }
                    for (int ch = 0; ch < c; ++ch) {
                      const int* perm = aux.data() + static_cast<size_t>(ch) * hw2;
                      S wg = g[static_cast<size_t>(ch)] / zsum;
                      for (int p = 0; p < hw2; ++p) {
                        gx[static_cast<size_t>(perm[p]) * c + ch] += wg;
                        wg *= decay;
                      }
                    }
                  }
                },
                ng);
}

}  // namespace vcx::nn

#endif  // VCX_NN_TAPE_HPP_
