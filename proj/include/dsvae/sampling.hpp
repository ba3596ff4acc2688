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
#include <numeric>
#include <string>
#include <vector>

#include "dsvae/dataset.hpp"
#include "dsvae/error.hpp"
#include "dsvae/model.hpp"
#include "dsvae/rng.hpp"

namespace dsvae {

/// Draws n distinct frame indices uniformly (partial Fisher-Yates) and copies
/// those frames out. The order of the indices is recorded but meaningless.
inline FrameSet<float> sample_frames(const SequenceFrames& seq, std::size_t n, Rng& rng) {
  const std::size_t t_len = seq.frames->rows();
  if (t_len < n) {
    throw DataError("sequence '" + std::string(seq.id) + "' has " + std::to_string(t_len) +
                    " frames, fewer than the " + std::to_string(n) + " requested");
  }
  std::vector<std::size_t> order(t_len);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) std::swap(order[i], order[i + rng.below(t_len - i)]);
  order.resize(n);

  Shape dims = seq.frames->dims();
  dims[0] = n;
  FrameSet<float> out{Tensor<float>(dims), std::string(seq.id), order};
  const std::size_t frame = seq.frames->row_size();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(seq.frames->data() + order[i] * frame, frame, out.frames.data() + i * frame);
  }
  return out;
}

inline FrameSet<float> sample_frames(const Sequence& seq, std::size_t n, Rng& rng) {
  return sample_frames(SequenceFrames{seq.id, &seq.frames}, n, rng);
}

/// Frames at the given indices (repeats allowed), as a FrameSet.
inline FrameSet<float> select_frames(const SequenceFrames& seq, const std::vector<std::size_t>& indices) {
  Shape dims = seq.frames->dims();
  dims[0] = indices.size();
  FrameSet<float> out{Tensor<float>(dims), std::string(seq.id), indices};
  const std::size_t frame = seq.frames->row_size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= seq.frames->rows()) throw DataError("frame index out of range");
    std::copy_n(seq.frames->data() + indices[i] * frame, frame, out.frames.data() + i * frame);
  }
  return out;
}

}  // namespace dsvae
