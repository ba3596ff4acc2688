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

#include <cmath>
#include <numbers>

#include "dsvae/autodiff.hpp"
#include "dsvae/error.hpp"
#include "dsvae/rng.hpp"
#include "dsvae/tensor.hpp"

namespace dsvae {

/// Diagonal Gaussian, parameterized by mean and log-variance.
template <typename T>
struct GaussianParams {
  Tensor<T> mu;
  Tensor<T> log_var;

  static GaussianParams standard(std::size_t d) { return {Tensor<T>(Shape{d}), Tensor<T>(Shape{d})}; }

  std::size_t dim() const { return mu.size(); }

  void validate() const {
    if (mu.dims() != log_var.dims()) throw ConfigError("GaussianParams: mu/log_var shape mismatch");
    if (!log_var.all_finite() || !mu.all_finite()) {
      throw NumericalError("gaussian", "GaussianParams with non-finite entries");
    }
  }
};

template <typename T>
T softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.span()) v = sigmoid(v);
  return y;
}

/// mu + exp(log_var / 2) * eps.
template <typename T>
Tensor<T> reparameterize(const GaussianParams<T>& g, const Tensor<T>& eps) {
  g.validate();
  if (eps.size() != g.mu.size()) throw ConfigError("reparameterize: eps shape mismatch");
  Tensor<T> z(g.mu.dims());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = g.mu[i] + std::exp(T(0.5) * g.log_var[i]) * eps[i];
  return z;
}

template <typename T>
Tensor<T> standard_normal(const Shape& dims, Rng& rng) {
  Tensor<T> t(dims);
  for (auto& v : t.span()) v = static_cast<T>(rng.normal());
  return t;
}

/// KL(N(mu, exp(log_var)) || N(0, 1)) summed over dimensions.
template <typename T>
T kl_to_standard_normal(const GaussianParams<T>& g) {
  g.validate();
  T s = 0;
  for (std::size_t i = 0; i < g.mu.size(); ++i) {
    s += T(0.5) * (g.mu[i] * g.mu[i] + std::exp(g.log_var[i]) - T(1) - g.log_var[i]);
  }
  return s;
}

/// KL(q || p) for diagonal Gaussians, summed over dimensions.
template <typename T>
T kl_diag_gaussians(const GaussianParams<T>& q, const GaussianParams<T>& p) {
  q.validate();
  p.validate();
  if (q.mu.size() != p.mu.size()) throw ConfigError("kl_diag_gaussians: dimension mismatch");
  T s = 0;
  for (std::size_t i = 0; i < q.mu.size(); ++i) {
    const T d = q.mu[i] - p.mu[i];
    s += T(0.5) * (p.log_var[i] - q.log_var[i] + (std::exp(q.log_var[i]) + d * d) * std::exp(-p.log_var[i]) - T(1));
  }
  return s;
}

/// sum x*log(sigmoid(l)) + (1-x)*log(1-sigmoid(l)) = sum x*l - softplus(l).
template <typename T>
T bernoulli_log_likelihood(const Tensor<T>& x, const Tensor<T>& logits) {
  if (x.size() != logits.size()) throw ConfigError("bernoulli_log_likelihood: shape mismatch");
  T s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= T(0) && x[i] <= T(1))) {
      throw PreconditionError("bernoulli_log_likelihood: targets must lie in [0,1]");
    }
    s += x[i] * logits[i] - softplus(logits[i]);
  }
  return s;
}

/// log N(x | mu, diag(exp(log_var))).
template <typename T>
T gaussian_log_density(const Tensor<T>& x, const GaussianParams<T>& g) {
  if (x.size() != g.mu.size()) throw ConfigError("gaussian_log_density: shape mismatch");
  const T log2pi = static_cast<T>(std::log(2.0 * std::numbers::pi));
  T s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T d = x[i] - g.mu[i];
    s += T(-0.5) * (log2pi + g.log_var[i] + d * d * std::exp(-g.log_var[i]));
  }
  return s;
}

namespace ops {

namespace detail {
template <typename T>
std::size_t row_count(const Tensor<T>& t) {
  return t.rank() == 1 ? 1 : t.rows();
}
}  // namespace detail

template <typename T>
Var reparameterize(Tape<T>& t, Var mu, Var log_var, const Tensor<T>& eps, std::string name) {
  const Tensor<T>& m = t.value(mu);
  const Tensor<T>& l = t.value(log_var);
  if (m.dims() != l.dims() || eps.size() != m.size()) throw ConfigError("reparameterize: shape mismatch");
  Tensor<T> z(m.dims());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = m[i] + std::exp(T(0.5) * l[i]) * eps[i];
  return t.push(std::move(z), std::move(name), any_needs_grad(t, {mu, log_var}),
                [mu, log_var, eps](Tape<T>& tp, const Tensor<T>& gz) {
                  if (tp.needs_grad(mu)) {
                    Tensor<T>& gm = tp.grad(mu);
                    for (std::size_t i = 0; i < gz.size(); ++i) gm[i] += gz[i];
                  }
                  if (tp.needs_grad(log_var)) {
                    const Tensor<T>& lv = tp.value(log_var);
                    Tensor<T>& gl = tp.grad(log_var);
                    for (std::size_t i = 0; i < gz.size(); ++i)
                      gl[i] += gz[i] * T(0.5) * std::exp(T(0.5) * lv[i]) * eps[i];
                  }
                });
}

/// Per-row KL(N(mu, exp(log_var)) || N(0,1)); output [rows].
template <typename T>
Var kl_standard_normal_rows(Tape<T>& t, Var mu, Var log_var, std::string name) {
  const Tensor<T>& m = t.value(mu);
  const Tensor<T>& l = t.value(log_var);
  if (m.dims() != l.dims()) throw ConfigError("kl_standard_normal_rows: shape mismatch");
  const std::size_t rows = detail::row_count(m), d = m.size() / rows;
  Tensor<T> y(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    T s = 0;
    for (std::size_t j = r * d; j < (r + 1) * d; ++j) {
      s += T(0.5) * (m[j] * m[j] + std::exp(l[j]) - T(1) - l[j]);
    }
    y[r] = s;
  }
  return t.push(std::move(y), std::move(name), any_needs_grad(t, {mu, log_var}),
                [mu, log_var, d](Tape<T>& tp, const Tensor<T>& gy) {
                  const Tensor<T>& m2 = tp.value(mu);
                  const Tensor<T>& l2 = tp.value(log_var);
                  for (std::size_t j = 0; j < m2.size(); ++j) {
                    const T g = gy[j / d];
                    if (tp.needs_grad(mu)) tp.grad(mu)[j] += g * m2[j];
                    if (tp.needs_grad(log_var)) tp.grad(log_var)[j] += g * T(0.5) * (std::exp(l2[j]) - T(1));
                  }
                });
}

/// Per-row KL(q || p) between diagonal Gaussians; output [rows].
template <typename T>
Var kl_diag_rows(Tape<T>& t, Var mu_q, Var lv_q, Var mu_p, Var lv_p, std::string name) {
  const Tensor<T>& mq = t.value(mu_q);
  const Tensor<T>& lq = t.value(lv_q);
  const Tensor<T>& mp = t.value(mu_p);
  const Tensor<T>& lp = t.value(lv_p);
  if (mq.dims() != lq.dims() || mq.dims() != mp.dims() || mq.dims() != lp.dims()) {
    throw ConfigError("kl_diag_rows: shape mismatch");
  }
  const std::size_t rows = detail::row_count(mq), d = mq.size() / rows;
  Tensor<T> y(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    T s = 0;
    for (std::size_t j = r * d; j < (r + 1) * d; ++j) {
      const T diff = mq[j] - mp[j];
      s += T(0.5) * (lp[j] - lq[j] + (std::exp(lq[j]) + diff * diff) * std::exp(-lp[j]) - T(1));
    }
    y[r] = s;
  }
  return t.push(std::move(y), std::move(name), any_needs_grad(t, {mu_q, lv_q, mu_p, lv_p}),
                [=](Tape<T>& tp, const Tensor<T>& gy) {
                  const Tensor<T>& mq2 = tp.value(mu_q);
                  const Tensor<T>& lq2 = tp.value(lv_q);
                  const Tensor<T>& mp2 = tp.value(mu_p);
                  const Tensor<T>& lp2 = tp.value(lv_p);
                  for (std::size_t j = 0; j < mq2.size(); ++j) {
                    const T g = gy[j / d];
                    const T diff = mq2[j] - mp2[j];
                    const T inv_p = std::exp(-lp2[j]);
                    const T vq = std::exp(lq2[j]);
                    if (tp.needs_grad(mu_q)) tp.grad(mu_q)[j] += g * diff * inv_p;
                    if (tp.needs_grad(mu_p)) tp.grad(mu_p)[j] -= g * diff * inv_p;
                    if (tp.needs_grad(lv_q)) tp.grad(lv_q)[j] += g * T(0.5) * (vq * inv_p - T(1));
                    if (tp.needs_grad(lv_p))
                      tp.grad(lv_p)[j] += g * T(0.5) * (T(1) - (vq + diff * diff) * inv_p);
                  }
                });
}

/// Per-row Bernoulli log-likelihood of constant targets under `logits`; output [rows].
template <typename T>
Var bernoulli_ll_rows(Tape<T>& t, const Tensor<T>& target, Var logits, std::string name) {
  const Tensor<T>& l = t.value(logits);
  if (l.size() != target.size()) throw ConfigError("bernoulli_ll_rows: shape mismatch");
  const std::size_t rows = detail::row_count(l), d = l.size() / rows;
  Tensor<T> y(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    T s = 0;
    for (std::size_t j = r * d; j < (r + 1) * d; ++j) s += target[j] * l[j] - softplus(l[j]);
    y[r] = s;
  }
  return t.push(std::move(y), std::move(name), t.needs_grad(logits),
                [logits, target, d](Tape<T>& tp, const Tensor<T>& gy) {
                  const Tensor<T>& l2 = tp.value(logits);
                  Tensor<T>& gl = tp.grad(logits);
                  for (std::size_t j = 0; j < l2.size(); ++j) gl[j] += gy[j / d] * (target[j] - sigmoid(l2[j]));
                });
}

}  // namespace ops

}  // namespace dsvae
