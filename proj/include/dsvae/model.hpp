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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dsvae/autodiff.hpp"
#include "dsvae/distributions.hpp"
#include "dsvae/network.hpp"

namespace dsvae {

/// N frames drawn from one sequence: frames [N,H,W,C] with values in [0,1].
template <typename T>
struct FrameSet {
  Tensor<T> frames;
  std::string sequence_id;
  std::vector<std::size_t> indices;

  std::size_t size() const { return frames.rows(); }
};

template <typename T>
struct ElboReport {
  T elbo = 0;
  T recon_loglik = 0;
  T kl_z = 0;
  T kl_f = 0;
};

/// Standard-normal noise for one ELBO evaluation: eps_f [B,f_dim], eps_z [B*N,z_dim].
template <typename T>
struct ElboNoise {
  Tensor<T> eps_f;
  Tensor<T> eps_z;

  static ElboNoise draw(const ModelConfig& cfg, std::size_t batch, std::size_t n, Rng& rng) {
    ElboNoise e{standard_normal<T>({batch, cfg.f_dim}, rng), standard_normal<T>({batch * n, cfg.z_dim}, rng)};
    return e;
  }
};

/// Per-frame-set ELBO pieces on a tape, each of shape [B].
struct ElboVars {
  Var elbo;
  Var recon;
  Var kl_z;
  Var kl_f;
  Var loss;  // mean over the batch of -elbo
};

/// Single-sample ELBO for `batch` frame sets of `n` frames, stacked as
/// frames [B*n,H,W,C]: one reparameterized f per set, one z per frame.
template <typename T>
ElboVars elbo_on_tape(const ModelConfig& cfg, Tape<T>& tape, const BoundParameters<T>& params,
                      const Tensor<T>& frames, std::size_t batch, std::size_t n,
                      const ElboNoise<T>& noise) {
  if (frames.rows() != batch * n) throw ConfigError("elbo: frames rows != batch * n");
  if (noise.eps_f.dims() != Shape{batch, cfg.f_dim} || noise.eps_z.dims() != Shape{batch * n, cfg.z_dim}) {
    throw ConfigError("elbo: noise shapes do not match batch");
  }
  Network<T> net(cfg, tape, params);
  const Var x = tape.constant(frames, "frames");
  const Var h = net.encode_frames(x);
  const GaussianVars qf = net.encode_static(h, batch, n);
  const Var f = ops::reparameterize(tape, qf.mu, qf.log_var, noise.eps_f, "f");
  const Var f_rep = net.repeat_rows(f, n, "f.repeat");
  const GaussianVars qz = net.encode_dynamic(f_rep, h);
  const Var z = ops::reparameterize(tape, qz.mu, qz.log_var, noise.eps_z, "z");
  const GaussianVars pz = net.prior_dynamic(f_rep);
  const Var logits = net.decode(f_rep, z);

  ElboVars out;
  out.recon = ops::group_sum(tape, ops::bernoulli_ll_rows(tape, frames, logits, "recon.frame"), n, T(1),
                             "recon_loglik");
  out.kl_z = ops::group_sum(tape, ops::kl_diag_rows(tape, qz.mu, qz.log_var, pz.mu, pz.log_var, "kl_z.frame"),
                            n, T(1), "kl_z");
  out.kl_f = ops::kl_standard_normal_rows(tape, qf.mu, qf.log_var, "kl_f");
  out.elbo = ops::sub(tape, ops::sub(tape, out.recon, out.kl_z, "recon_minus_kl_z"), out.kl_f, "elbo");
  out.loss = ops::sum(tape, out.elbo, T(-1) / static_cast<T>(batch), "loss");
  return out;
}

template <typename T>
ElboReport<T> report_row(const Tape<T>& tape, const ElboVars& v, std::size_t row) {
  return {tape.value(v.elbo)[row], tape.value(v.recon)[row], tape.value(v.kl_z)[row], tape.value(v.kl_f)[row]};
}

/// ELBO of one frame set under fixed noise (eps_f [1,f_dim], eps_z [N,z_dim]).
template <typename T>
ElboReport<T> elbo(const ModelConfig& cfg, const ParameterSet<T>& params, const FrameSet<T>& x,
                   const ElboNoise<T>& noise) {
  Tape<T> tape;
  BoundParameters<T> bound(tape, params, false);
  const ElboVars v = elbo_on_tape(cfg, tape, bound, x.frames, 1, x.size(), noise);
  return report_row(tape, v, 0);
}

namespace detail {

template <typename T>
Tensor<T> as_batch(const Tensor<T>& t) {
  if (t.rank() == 1) return t.reshaped({1, t.size()});
  return t;
}

template <typename T>
GaussianParams<T> to_gaussian(const Tape<T>& tape, const GaussianVars& g) {
  return {tape.value(g.mu), tape.value(g.log_var)};
}

}  // namespace detail

/// Shared frame encoder applied to frames [N,H,W,C] -> features [N,s,s,F].
template <typename T>
Tensor<T> encode_frames(const ModelConfig& cfg, const ParameterSet<T>& params, const Tensor<T>& frames) {
  for (auto v : frames.span()) {
    if (!(v >= T(0) && v <= T(1))) throw PreconditionError("encode_frames: pixels must lie in [0,1]");
  }
  Tape<T> tape;
  BoundParameters<T> bound(tape, params, false);
  Network<T> net(cfg, tape, bound);
  return tape.value(net.encode_frames(tape.constant(frames, "frames")));
}

/// q(f | x_S) from the N feature maps of one frame set; result has shape [f_dim].
template <typename T>
GaussianParams<T> encode_static(const ModelConfig& cfg, const ParameterSet<T>& params, const Tensor<T>& features) {
  Tape<T> tape;
  BoundParameters<T> bound(tape, params, false);
  Network<T> net(cfg, tape, bound);
  auto g = detail::to_gaussian(tape, net.encode_static(tape.constant(features, "features"), 1, features.rows()));
  return {g.mu.reshaped({cfg.f_dim}), g.log_var.reshaped({cfg.f_dim})};
}

/// q(z | f, x_i) for one frame's features h_i [s,s,F] (or rows of several frames).
template <typename T>
GaussianParams<T> encode_dynamic(const ModelConfig& cfg, const ParameterSet<T>& params, const Tensor<T>& f,
                                 const Tensor<T>& features) {
  Tape<T> tape;
  BoundParameters<T> bound(tape, params, false);
  Network<T> net(cfg, tape, bound);
  Tensor<T> h = features.rank() == 3 ? features.reshaped({1, features.size()}) : features;
  Tensor<T> fb = detail::as_batch(f);
  if (fb.rows() == 1 && h.rows() > 1) {
    fb = tape.value(net.repeat_rows(tape.constant(fb, "f"), h.rows(), "f.repeat"));
  }
  auto g = detail::to_gaussian(tape, net.encode_dynamic(tape.constant(fb, "f"), tape.constant(h, "features")));
  if (f.rank() == 1 && features.rank() == 3) return {g.mu.reshaped({cfg.z_dim}), g.log_var.reshaped({cfg.z_dim})};
  return g;
}

/// Learned conditional prior p(z | f).
template <typename T>
GaussianParams<T> prior_dynamic(const ModelConfig& cfg, const ParameterSet<T>& params, const Tensor<T>& f) {
  Tape<T> tape;
  BoundParameters<T> bound(tape, params, false);
  Network<T> net(cfg, tape, bound);
  auto g = detail::to_gaussian(tape, net.prior_dynamic(tape.constant(detail::as_batch(f), "f")));
  if (f.rank() == 1) return {g.mu.reshaped({cfg.z_dim}), g.log_var.reshaped({cfg.z_dim})};
  return g;
}

/// Bernoulli logits. f [f_dim], z [z_dim] -> [H,W,C]; f [R,f_dim], z [R,z_dim] -> [R,H,W,C].
template <typename T>
Tensor<T> decode(const ModelConfig& cfg, const ParameterSet<T>& params, const Tensor<T>& f, const Tensor<T>& z) {
  Tape<T> tape;
  BoundParameters<T> bound(tape, params, false);
  Network<T> net(cfg, tape, bound);
  Tensor<T> out = tape.value(net.decode(tape.constant(detail::as_batch(f), "f"), tape.constant(detail::as_batch(z), "z")));
  if (f.rank() == 1) return out.reshaped({cfg.image_size, cfg.image_size, cfg.channels});
  return out;
}

/// Ancestral sampling: f ~ N(0,1), z ~ p(z|f), image = sigmoid(decode(f, z)).
/// With `share_f`, all `count` images use one f.
template <typename T>
std::vector<Tensor<T>> sample_generate(const ModelConfig& cfg, const ParameterSet<T>& params, Rng& rng,
                                       std::size_t count = 1, bool share_f = false) {
  std::vector<Tensor<T>> images;
  Tensor<T> f = standard_normal<T>({cfg.f_dim}, rng);
  for (std::size_t k = 0; k < count; ++k) {
    if (k > 0 && !share_f) f = standard_normal<T>({cfg.f_dim}, rng);
    const GaussianParams<T> pz = prior_dynamic(cfg, params, f);
    const Tensor<T> z = reparameterize(pz, standard_normal<T>({cfg.z_dim}, rng));
    images.push_back(sigmoid(decode(cfg, params, f, z)));
  }
  return images;
}

/// log (1/K) sum_k p(x, f_k, z_k) / q(f_k, z_k | x) with K joint draws from q.
template <typename T>
double importance_weighted_bound(const ModelConfig& cfg, const ParameterSet<T>& params, const FrameSet<T>& x,
                                 std::size_t samples, Rng& rng) {
  if (samples < 1) throw PreconditionError("importance_weighted_bound: need at least one sample");
  const std::size_t n = x.size();
  const Tensor<T> h = encode_frames(cfg, params, x.frames);
  const GaussianParams<T> qf = encode_static(cfg, params, h);
  std::vector<double> log_w;
  for (std::size_t k = 0; k < samples; ++k) {
    const Tensor<T> f = reparameterize(qf, standard_normal<T>({cfg.f_dim}, rng));
    const GaussianParams<T> qz = encode_dynamic(cfg, params, f.reshaped({1, cfg.f_dim}), h);
    const Tensor<T> frep = [&] {
      Tensor<T> r({n, cfg.f_dim});
      for (std::size_t i = 0; i < n; ++i) std::copy_n(f.data(), cfg.f_dim, r.data() + i * cfg.f_dim);
      return r;
    }();
    const GaussianParams<T> pz = prior_dynamic(cfg, params, frep);
    const Tensor<T> z = reparameterize(qz, standard_normal<T>({n, cfg.z_dim}, rng));
    const Tensor<T> logits = decode(cfg, params, frep, z);
    double lw = gaussian_log_density(f, GaussianParams<T>::standard(cfg.f_dim)) - gaussian_log_density(f, qf);
    lw += bernoulli_log_likelihood(x.frames, logits);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = [&](const Tensor<T>& t) {
        return Tensor<T>({cfg.z_dim}, std::vector<T>(t.row(i).begin(), t.row(i).end()));
      };
      const Tensor<T> zi = row(z);
      lw += gaussian_log_density(zi, {row(pz.mu), row(pz.log_var)});
      lw -= gaussian_log_density(zi, {row(qz.mu), row(qz.log_var)});
    }
    log_w.push_back(lw);
  }
  const double m = *std::max_element(log_w.begin(), log_w.end());
  double s = 0;
  for (double v : log_w) s += std::exp(v - m);
  return m + std::log(s / static_cast<double>(samples));
}

}  // namespace dsvae
