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

#include "dsvae/error.hpp"
#include "dsvae/tensor.hpp"

namespace dsvae {

/// Bilinear resize to target_h x target_w (half-pixel centres, edge clamped)
/// followed by the linear map [in_min, in_max] -> [0, 1]. Accepts [H,W,C] or
/// [T,H,W,C]; results are clamped into [0,1].
template <typename T>
Tensor<float> preprocess(const Tensor<T>& frames, std::size_t target_h, std::size_t target_w, double in_min = 0.0,
                         double in_max = 1.0) {
  if (frames.rank() != 3 && frames.rank() != 4) {
    throw PreconditionError("preprocess: expected [H,W,C] or [T,H,W,C], got " + shape_string(frames.dims()));
  }
  if (target_h < 1 || target_w < 1) throw PreconditionError("preprocess: empty target size");
  if (!(in_max > in_min)) throw PreconditionError("preprocess: value range must satisfy in_max > in_min");
  const bool batched = frames.rank() == 4;
  const std::size_t t_len = batched ? frames.dim(0) : 1;
  const std::size_t h = frames.dims()[batched ? 1 : 0], w = frames.dims()[batched ? 2 : 1];
  const std::size_t c = frames.dims().back();

  Tensor<float> out(batched ? Shape{t_len, target_h, target_w, c} : Shape{target_h, target_w, c});
  const double sy = static_cast<double>(h) / static_cast<double>(target_h);
  const double sx = static_cast<double>(w) / static_cast<double>(target_w);
  const double scale = 1.0 / (in_max - in_min);
  auto at = [&](std::size_t t, std::size_t y, std::size_t x, std::size_t ch) {
    return static_cast<double>(frames[((t * h + y) * w + x) * c + ch]);
  };
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t oy = 0; oy < target_h; ++oy) {
      const double fy = std::clamp((static_cast<double>(oy) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
      const std::size_t y0 = static_cast<std::size_t>(fy), y1 = std::min(y0 + 1, h - 1);
      const double wy = fy - static_cast<double>(y0);
      for (std::size_t ox = 0; ox < target_w; ++ox) {
        const double fx = std::clamp((static_cast<double>(ox) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
        const std::size_t x0 = static_cast<std::size_t>(fx), x1 = std::min(x0 + 1, w - 1);
        const double wx = fx - static_cast<double>(x0);
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double v = (1 - wy) * ((1 - wx) * at(t, y0, x0, ch) + wx * at(t, y0, x1, ch)) +
                           wy * ((1 - wx) * at(t, y1, x0, ch) + wx * at(t, y1, x1, ch));
          out[((t * target_h + oy) * target_w + ox) * c + ch] =
              static_cast<float>(std::clamp((v - in_min) * scale, 0.0, 1.0));
        }
      }
    }
  }
  return out;
}

}  // namespace dsvae
