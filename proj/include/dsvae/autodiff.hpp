/*
 * Copyright 2026 The dsvae Authors
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
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dsvae/error.hpp"
#include "dsvae/layers.hpp"
#include "dsvae/parameters.hpp"
#include "dsvae/tensor.hpp"

namespace dsvae {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode tape. Every op appends one node holding its forward value and
/// (if any input needs gradients) a closure that pushes the node's gradient to
/// its inputs. Forward values are checked for NaN/Inf as they are recorded.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor<T>& out_grad)>;

  Var constant(Tensor<T> value, std::string name) {
    return push(std::move(value), std::move(name), false, nullptr);
  }

  Var variable(Tensor<T> value, std::string name) {
    return push(std::move(value), std::move(name), true, nullptr);
  }

  Var push(Tensor<T> value, std::string name, bool needs_grad, Backward backward) {
    if (!value.all_finite()) {
      throw NumericalError(name, "non-finite value produced by '" + name + "'");
    }
    nodes_.push_back({std::move(value), Tensor<T>(), false, std::move(name), needs_grad,
                      needs_grad ? std::move(backward) : Backward{}});
    return Var{nodes_.size() - 1};
  }

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  const std::string& name(Var v) const { return nodes_.at(v.id).name; }
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient buffer of `v`, allocated as zeros on first access.
  Tensor<T>& grad(Var v) {
    auto& n = nodes_.at(v.id);
    if (!n.has_grad) {
      n.grad = Tensor<T>(n.value.dims());
      n.has_grad = true;
    }
    return n.grad;
  }

  bool has_grad(Var v) const { return nodes_.at(v.id).has_grad; }

  /// Seeds d(loss)/d(loss) = 1 and runs every closure in reverse order.
  void backward(Var loss) {
    if (value(loss).size() != 1) throw ConfigError("backward() needs a scalar loss");
    if (!needs_grad(loss)) return;
    grad(loss)[0] = T(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.has_grad || !n.backward) continue;
      n.backward(*this, n.grad);
    }
  }

  /// Adds `g` into the gradient of `v` when `v` participates in differentiation.
  void accumulate(Var v, const Tensor<T>& g) {
    if (!needs_grad(v)) return;
    auto& dst = grad(v);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool has_grad;
    std::string name;
    bool needs_grad;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

namespace ops {

template <typename T>
bool any_needs_grad(const Tape<T>& t, std::initializer_list<Var> vs) {
  for (auto v : vs) {
    if (t.needs_grad(v)) return true;
  }
  return false;
}

template <typename T>
Var conv2d(Tape<T>& t, Var x, Var w, Var b, const LayerSpec& spec, std::string name) {
  spec.validate();
  auto cols = std::make_shared<std::vector<T>>();
  Tensor<T> y = kernels::conv2d_linear(t.value(x), spec, t.value(w), t.value(b), cols.get());
  return t.push(std::move(y), std::move(name), any_needs_grad(t, {x, w, b}),
                [x, w, b, spec, cols](Tape<T>& tp, const Tensor<T>& gy) {
                  Tensor<T> dx(tp.value(x).dims());
                  kernels::conv2d_linear_backward(
                      tp.value(x), spec, tp.value(w), tp.value(b), *cols, gy,
                      tp.needs_grad(x) ? &dx : nullptr, tp.needs_grad(w) ? &tp.grad(w) : nullptr,
                      tp.needs_grad(b) ? &tp.grad(b) : nullptr);
                  tp.accumulate(x, dx);
                });
}

template <typename T>
Var deconv2d(Tape<T>& t, Var x, Var w, Var b, const LayerSpec& spec, std::string name) {
  spec.validate();
  Tensor<T> y = kernels::deconv2d_linear(t.value(x), spec, t.value(w), t.value(b));
  return t.push(std::move(y), std::move(name), any_needs_grad(t, {x, w, b}),
                [x, w, b, spec](Tape<T>& tp, const Tensor<T>& gy) {
                  Tensor<T> dx(tp.value(x).dims());
                  kernels::deconv2d_linear_backward(
                      tp.value(x), spec, tp.value(w), tp.value(b), gy,
                      tp.needs_grad(x) ? &dx : nullptr, tp.needs_grad(w) ? &tp.grad(w) : nullptr,
                      tp.needs_grad(b) ? &tp.grad(b) : nullptr);
                  tp.accumulate(x, dx);
                });
}

template <typename T>
Var dense(Tape<T>& t, Var x, Var w, Var b, std::string name) {
  Tensor<T> y = kernels::dense_linear(t.value(x), t.value(w), t.value(b));
  return t.push(std::move(y), std::move(name), any_needs_grad(t, {x, w, b}),
                [x, w, b](Tape<T>& tp, const Tensor<T>& gy) {
                  Tensor<T> dx(tp.value(x).dims());
                  kernels::dense_linear_backward(
                      tp.value(x), tp.value(w), gy, tp.needs_grad(x) ? &dx : nullptr,
                      tp.needs_grad(w) ? &tp.grad(w) : nullptr,
                      tp.needs_grad(b) ? &tp.grad(b) : nullptr);
                  tp.accumulate(x, dx);
                });
}

/// max(x, slope*x); relu is the slope = 0 case.
template <typename T>
Var leaky_relu(Tape<T>& t, Var x, double slope, std::string name) {
  const T s = static_cast<T>(slope);
  Tensor<T> y = t.value(x);
  for (auto& v : y.span()) v = v > T(0) ? v : s * v;
  return t.push(std::move(y), std::move(name), t.needs_grad(x),
                [x, s](Tape<T>& tp, const Tensor<T>& gy) {
                  const Tensor<T>& xv = tp.value(x);
                  Tensor<T>& gx = tp.grad(x);
                  for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += xv[i] > T(0) ? gy[i] : s * gy[i];
                });
}

template <typename T>
Var relu(Tape<T>& t, Var x, std::string name) {
  return leaky_relu(t, x, 0.0, std::move(name));
}

template <typename T>
Var activation(Tape<T>& t, Var x, Activation act, double slope, std::string name) {
  switch (act) {
    case Activation::relu: return relu(t, x, std::move(name));
    case Activation::leaky_relu: return leaky_relu(t, x, slope, std::move(name));
    case Activation::none: break;
  }
  return x;
}

template <typename T>
Var reshape(Tape<T>& t, Var x, Shape dims, std::string name) {
  Tensor<T> y = t.value(x).reshaped(std::move(dims));
  return t.push(std::move(y), std::move(name), t.needs_grad(x),
                [x](Tape<T>& tp, const Tensor<T>& gy) {
                  Tensor<T>& gx = tp.grad(x);
                  for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
                });
}

/// out[r] = x[index[r]] along the leading axis.
template <typename T>
Var gather_rows(Tape<T>& t, Var x, std::vector<std::size_t> index, std::string name) {
  const Tensor<T>& xv = t.value(x);
  const std::size_t rs = xv.row_size();
  Shape dims = xv.dims();
  dims[0] = index.size();
  Tensor<T> y(dims);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= xv.rows()) throw ConfigError("gather_rows: index out of range");
    std::copy_n(xv.data() + index[r] * rs, rs, y.data() + r * rs);
  }
  return t.push(std::move(y), std::move(name), t.needs_grad(x),
                [x, index = std::move(index), rs](Tape<T>& tp, const Tensor<T>& gy) {
                  Tensor<T>& gx = tp.grad(x);
                  for (std::size_t r = 0; r < index.size(); ++r) {
                    const T* g = gy.data() + r * rs;
                    T* d = gx.data() + index[r] * rs;
                    for (std::size_t j = 0; j < rs; ++j) d[j] += g[j];
                  }
                });
}

/// Concatenation along the last axis; all leading extents must agree.
template <typename T>
Var concat_last(Tape<T>& t, Var a, Var b, std::string name) {
  const Tensor<T>& av = t.value(a);
  const Tensor<T>& bv = t.value(b);
  if (av.rank() != bv.rank() ||
      !std::equal(av.dims().begin(), av.dims().end() - 1, bv.dims().begin())) {
    throw ConfigError("concat_last: incompatible shapes " + shape_string(av.dims()) + " and " +
                      shape_string(bv.dims()));
  }
  const std::size_t ca = av.dims().back(), cb = bv.dims().back();
  const std::size_t n = av.size() / ca;
  Shape dims = av.dims();
  dims.back() = ca + cb;
  Tensor<T> y(dims);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(av.data() + r * ca, ca, y.data() + r * (ca + cb));
    std::copy_n(bv.data() + r * cb, cb, y.data() + r * (ca + cb) + ca);
  }
  return t.push(std::move(y), std::move(name), any_needs_grad(t, {a, b}),
                [a, b, ca, cb, n](Tape<T>& tp, const Tensor<T>& gy) {
                  if (tp.needs_grad(a)) {
                    Tensor<T>& ga = tp.grad(a);
                    for (std::size_t r = 0; r < n; ++r)
                      for (std::size_t j = 0; j < ca; ++j) ga[r * ca + j] += gy[r * (ca + cb) + j];
                  }
                  if (tp.needs_grad(b)) {
                    Tensor<T>& gb = tp.grad(b);
                    for (std::size_t r = 0; r < n; ++r)
                      for (std::size_t j = 0; j < cb; ++j)
                        gb[r * cb + j] += gy[r * (ca + cb) + ca + j];
                  }
                });
}

/// x[..., start:start+len].
template <typename T>
Var slice_last(Tape<T>& t, Var x, std::size_t start, std::size_t len, std::string name) {
  const Tensor<T>& xv = t.value(x);
  const std::size_t c = xv.dims().back();
  if (start + len > c || len == 0) throw ConfigError("slice_last: range out of bounds");
  const std::size_t n = xv.size() / c;
  Shape dims = xv.dims();
  dims.back() = len;
  Tensor<T> y(dims);
  for (std::size_t r = 0; r < n; ++r) std::copy_n(xv.data() + r * c + start, len, y.data() + r * len);
  return t.push(std::move(y), std::move(name), t.needs_grad(x),
                [x, start, len, c, n](Tape<T>& tp, const Tensor<T>& gy) {
                  Tensor<T>& gx = tp.grad(x);
                  for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t j = 0; j < len; ++j) gx[r * c + start + j] += gy[r * len + j];
                });
}

/// Rows are grouped `group` at a time: x[b*group+g, ..., c] -> y[b, ..., g*C + c].
template <typename T>
Var group_concat_last(Tape<T>& t, Var x, std::size_t group, std::string name) {
  const Tensor<T>& xv = t.value(x);
  if (group == 0 || xv.rows() % group) throw ConfigError("group_concat_last: rows not divisible");
  const std::size_t batch = xv.rows() / group;
  const std::size_t c = xv.dims().back();
  const std::size_t inner = xv.row_size() / c;
  Shape dims = xv.dims();
  dims[0] = batch;
  dims.back() = c * group;
  Tensor<T> y(dims);
  auto src_index = [=](std::size_t b, std::size_t g, std::size_t p, std::size_t ch) {
    return ((b * group + g) * inner + p) * c + ch;
  };
  auto dst_index = [=](std::size_t b, std::size_t g, std::size_t p, std::size_t ch) {
    return (b * inner + p) * c * group + g * c + ch;
  };
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t g = 0; g < group; ++g)
      for (std::size_t p = 0; p < inner; ++p)
        for (std::size_t ch = 0; ch < c; ++ch) y[dst_index(b, g, p, ch)] = xv[src_index(b, g, p, ch)];
  return t.push(std::move(y), std::move(name), t.needs_grad(x),
                [=](Tape<T>& tp, const Tensor<T>& gy) {
                  Tensor<T>& gx = tp.grad(x);
                  for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t g = 0; g < group; ++g)
                      for (std::size_t p = 0; p < inner; ++p)
                        for (std::size_t ch = 0; ch < c; ++ch)
                          gx[src_index(b, g, p, ch)] += gy[dst_index(b, g, p, ch)];
                });
}

/// y[b] = scale * sum_g x[b*group+g]; fixed summation order g = 0..group-1.
template <typename T>
Var group_sum(Tape<T>& t, Var x, std::size_t group, T scale, std::string name) {
  const Tensor<T>& xv = t.value(x);
  if (group == 0 || xv.rows() % group) throw ConfigError("group_sum: rows not divisible");
  const std::size_t batch = xv.rows() / group;
  const std::size_t rs = xv.row_size();
  Shape dims = xv.dims();
  dims[0] = batch;
  Tensor<T> y(dims);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < rs; ++j) {
      T s = 0;
      for (std::size_t g = 0; g < group; ++g) s += xv[(b * group + g) * rs + j];
      y[b * rs + j] = scale * s;
    }
  }
  return t.push(std::move(y), std::move(name), t.needs_grad(x),
                [=](Tape<T>& tp, const Tensor<T>& gy) {
                  Tensor<T>& gx = tp.grad(x);
                  for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t g = 0; g < group; ++g)
                      for (std::size_t j = 0; j < rs; ++j)
                        gx[(b * group + g) * rs + j] += scale * gy[b * rs + j];
                });
}

template <typename T>
Var group_mean(Tape<T>& t, Var x, std::size_t group, std::string name) {
  return group_sum(t, x, group, T(1) / static_cast<T>(group), std::move(name));
}

/// alpha*a + beta*b, elementwise on equal shapes.
template <typename T>
Var axpby(Tape<T>& t, T alpha, Var a, T beta, Var b, std::string name) {
  const Tensor<T>& av = t.value(a);
  const Tensor<T>& bv = t.value(b);
  if (av.dims() != bv.dims()) throw ConfigError("axpby: shape mismatch");
  Tensor<T> y(av.dims());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = alpha * av[i] + beta * bv[i];
  return t.push(std::move(y), std::move(name), any_needs_grad(t, {a, b}),
                [=](Tape<T>& tp, const Tensor<T>& gy) {
                  if (tp.needs_grad(a)) {
                    Tensor<T>& ga = tp.grad(a);
                    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += alpha * gy[i];
                  }
                  if (tp.needs_grad(b)) {
                    Tensor<T>& gb = tp.grad(b);
                    for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += beta * gy[i];
                  }
                });
}

template <typename T>
Var add(Tape<T>& t, Var a, Var b, std::string name) {
  return axpby(t, T(1), a, T(1), b, std::move(name));
}

template <typename T>
Var sub(Tape<T>& t, Var a, Var b, std::string name) {
  return axpby(t, T(1), a, T(-1), b, std::move(name));
}

/// scale * sum(x) as a [1] tensor.
template <typename T>
Var sum(Tape<T>& t, Var x, T scale, std::string name) {
  const Tensor<T>& xv = t.value(x);
  T s = 0;
  for (auto v : xv.span()) s += v;
  return t.push(Tensor<T>::scalar(scale * s), std::move(name), t.needs_grad(x),
                [x, scale](Tape<T>& tp, const Tensor<T>& gy) {
                  Tensor<T>& gx = tp.grad(x);
                  for (auto& g : gx.span()) g += scale * gy[0];
                });
}

template <typename T>
Var mean(Tape<T>& t, Var x, std::string name) {
  return sum(t, x, T(1) / static_cast<T>(t.value(x).size()), std::move(name));
}

/// Elementwise product.
template <typename T>
Var mul(Tape<T>& t, Var a, Var b, std::string name) {
  const Tensor<T>& av = t.value(a);
  const Tensor<T>& bv = t.value(b);
  if (av.dims() != bv.dims()) throw ConfigError("mul: shape mismatch");
  Tensor<T> y(av.dims());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  return t.push(std::move(y), std::move(name), any_needs_grad(t, {a, b}),
                [a, b](Tape<T>& tp, const Tensor<T>& gy) {
                  const Tensor<T>& av2 = tp.value(a);
                  const Tensor<T>& bv2 = tp.value(b);
                  if (tp.needs_grad(a)) {
                    Tensor<T>& ga = tp.grad(a);
                    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bv2[i];
                  }
                  if (tp.needs_grad(b)) {
                    Tensor<T>& gb = tp.grad(b);
                    for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * av2[i];
                  }
                });
}

}  // namespace ops

/// Parameters bound to tape leaves, looked up by name.
template <typename T>
class BoundParameters {
 public:
  BoundParameters(Tape<T>& tape, const ParameterSet<T>& params, bool needs_grad = true)
      : params_(&params) {
    vars_.reserve(params.size());
    for (const auto& e : params) {
      vars_.push_back(needs_grad ? tape.variable(e.value, e.name) : tape.constant(e.value, e.name));
    }
  }

  Var operator[](const std::string& name) const { return vars_[params_->index_of(name)]; }
  Var at(std::size_t i) const { return vars_.at(i); }
  std::size_t size() const noexcept { return vars_.size(); }
  const ParameterSet<T>& params() const { return *params_; }

 private:
  const ParameterSet<T>* params_;
  std::vector<Var> vars_;
};

template <typename T>
struct GradientResult {
  T loss;
  ParameterSet<T> grads;
};

/// Exact reverse-mode gradient of `loss_fn(tape, bound_params) -> Var` with
/// respect to every parameter. Throws NumericalError naming the first
/// parameter whose gradient is not finite.
template <typename T, typename LossFn>
GradientResult<T> gradients(const ParameterSet<T>& params, LossFn&& loss_fn) {
  Tape<T> tape;
  BoundParameters<T> bound(tape, params);
  const Var loss = loss_fn(tape, bound);
  tape.backward(loss);
  GradientResult<T> out{tape.value(loss).item(), ParameterSet<T>{}};
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.entry(i).name;
    Tensor<T> g = tape.has_grad(bound.at(i)) ? tape.grad(bound.at(i))
                                             : Tensor<T>(params.entry(i).value.dims());
    if (!g.all_finite()) throw NumericalError(name, "non-finite gradient for '" + name + "'");
    out.grads.add(name, std::move(g));
  }
  return out;
}

}  // namespace dsvae
