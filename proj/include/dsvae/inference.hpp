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
#include <cstddef>
#include <vector>

#include "dsvae/dataset.hpp"
#include "dsvae/model.hpp"
#include "dsvae/sampling.hpp"

namespace dsvae {

/// Batched, gradient-free evaluation of the trained networks.
template <typename T>
class Inference {
 public:
  Inference(const ModelConfig& cfg, const ParameterSet<T>& params) : cfg_(cfg), params_(params) {
    check_parameters(cfg, params);
  }

  const ModelConfig& config() const { return cfg_; }

  /// Posterior q(f | x_S) means for equally sized frame sets, one [f_dim] row each.
  Tensor<T> static_means(const std::vector<FrameSet<T>>& sets) const {
    if (sets.empty()) throw PreconditionError("static_means: no frame sets");
    const std::size_t n = sets.front().size();
    const std::size_t frame = sets.front().frames.row_size();
    Tensor<T> out({sets.size(), cfg_.f_dim});
    for (std::size_t begin = 0; begin < sets.size(); begin += kChunk) {
      const std::size_t count = std::min(kChunk, sets.size() - begin);
      Shape dims = sets.front().frames.dims();
      dims[0] = count * n;
      Tensor<T> frames(dims);
      for (std::size_t k = 0; k < count; ++k) {
        if (sets[begin + k].size() != n) throw PreconditionError("static_means: frame sets differ in size");
        std::copy_n(sets[begin + k].frames.data(), n * frame, frames.data() + k * n * frame);
      }
      Tape<T> tape;
      BoundParameters<T> bound(tape, params_, false);
      Network<T> net(cfg_, tape, bound);
      const GaussianVars g = net.encode_static(net.encode_frames(tape.constant(frames, "frames")), count, n);
      std::copy_n(tape.value(g.mu).data(), count * cfg_.f_dim, out.data() + begin * cfg_.f_dim);
    }
    return out;
  }

  Tensor<T> static_mean(const FrameSet<T>& set) const {
    return static_means(std::vector<FrameSet<T>>{set}).reshaped({cfg_.f_dim});
  }

  /// f for a whole sequence. Mean aggregation encodes all frames as one set;
  /// concat aggregation averages the means of the strided sets
  /// {o, o+s, ..., o+(N-1)s}, s = T/N. Sequences shorter than N repeat frames cyclically.
  Tensor<T> sequence_static_mean(const SequenceFrames& seq) const {
    const std::size_t t_len = seq.frames->rows(), n = cfg_.n_frames;
    std::vector<FrameSet<T>> sets;
    if (cfg_.pair_aggregation == PairAggregation::mean && t_len >= 2) {
      std::vector<std::size_t> all(t_len);
      for (std::size_t i = 0; i < t_len; ++i) all[i] = i;
      sets.push_back(cast_set(select_frames(seq, all)));
    } else if (t_len < n) {
      std::vector<std::size_t> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i % t_len;
      sets.push_back(cast_set(select_frames(seq, idx)));
    } else {
      const std::size_t stride = t_len / n;
      for (std::size_t o = 0; o < stride; ++o) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = o + i * stride;
        sets.push_back(cast_set(select_frames(seq, idx)));
      }
    }
    const Tensor<T> means = static_means(sets);
    Tensor<T> f({cfg_.f_dim});
    for (std::size_t k = 0; k < sets.size(); ++k)
      for (std::size_t j = 0; j < cfg_.f_dim; ++j) f[j] += means[k * cfg_.f_dim + j];
    for (auto& v : f.span()) v /= static_cast<T>(sets.size());
    return f;
  }

  /// Posterior q(z | f, x_t) means for every frame of frames [T,H,W,C]; result [T, z_dim].
  Tensor<T> dynamic_means(const Tensor<T>& f, const Tensor<T>& frames) const {
    const std::size_t t_len = frames.rows(), frame = frames.row_size();
    Tensor<T> out({t_len, cfg_.z_dim});
    for (std::size_t begin = 0; begin < t_len; begin += kChunk) {
      const std::size_t count = std::min(kChunk, t_len - begin);
      Shape dims = frames.dims();
      dims[0] = count;
      Tensor<T> chunk(dims, std::vector<T>(frames.data() + begin * frame, frames.data() + (begin + count) * frame));
      Tensor<T> f_rows({count, cfg_.f_dim});
      for (std::size_t k = 0; k < count; ++k) std::copy_n(f.data(), cfg_.f_dim, f_rows.data() + k * cfg_.f_dim);
      Tape<T> tape;
      BoundParameters<T> bound(tape, params_, false);
      Network<T> net(cfg_, tape, bound);
      const Var h = net.encode_frames(tape.constant(chunk, "frames"));
      const GaussianVars g = net.encode_dynamic(tape.constant(f_rows, "f"), h);
      std::copy_n(tape.value(g.mu).data(), count * cfg_.z_dim, out.data() + begin * cfg_.z_dim);
    }
    return out;
  }

  /// Bernoulli means sigmoid(decode(f_r, z_r)) for f [R,f_dim], z [R,z_dim]; result [R,H,W,C].
  Tensor<T> decode_means(const Tensor<T>& f, const Tensor<T>& z) const {
    const std::size_t rows = f.rows();
    if (z.rows() != rows) throw ConfigError("decode_means: f and z row counts differ");
    Shape dims{rows, cfg_.image_size, cfg_.image_size, cfg_.channels};
    Tensor<T> out(dims);
    const std::size_t img = out.row_size();
    for (std::size_t begin = 0; begin < rows; begin += kChunk) {
      const std::size_t count = std::min(kChunk, rows - begin);
      Tensor<T> fc({count, cfg_.f_dim}, std::vector<T>(f.data() + begin * cfg_.f_dim, f.data() + (begin + count) * cfg_.f_dim));
      Tensor<T> zc({count, cfg_.z_dim}, std::vector<T>(z.data() + begin * cfg_.z_dim, z.data() + (begin + count) * cfg_.z_dim));
      const Tensor<T> logits = decode(cfg_, params_, fc, zc);
      for (std::size_t i = 0; i < count * img; ++i) out[begin * img + i] = sigmoid(logits[i]);
    }
    return out;
  }

 private:
  static constexpr std::size_t kChunk = 64;

  static FrameSet<T> cast_set(FrameSet<float> s) {
    if constexpr (std::is_same_v<T, float>) {
      return s;
    } else {
      return {s.frames.template cast<T>(), s.sequence_id, s.indices};
    }
  }

  const ModelConfig& cfg_;
  const ParameterSet<T>& params_;
};

}  // namespace dsvae
