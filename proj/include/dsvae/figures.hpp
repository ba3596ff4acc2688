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
#include <fstream>
#include <string>
#include <vector>

#include "dsvae/checkpoint.hpp"
#include "dsvae/dataset.hpp"
#include "dsvae/inference.hpp"
#include "dsvae/png.hpp"
#include "dsvae/sampling.hpp"

namespace dsvae {

/// Places images [R,H,W,C] into a cols x rows grid, row-major, unused cells black.
template <typename T>
Image8 tile_images(const Tensor<T>& images, std::size_t cols, std::size_t rows) {
  const std::size_t h = images.dim(1), w = images.dim(2), c = images.dim(3);
  if (images.rows() > cols * rows) throw ConfigError("tile_images: more images than cells");
  Image8 out(cols * w, rows * h, c);
  for (std::size_t k = 0; k < images.rows(); ++k) {
    const std::size_t cx = (k % cols) * w, cy = (k / cols) * h;
    const T* src = images.data() + k * images.row_size();
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t ch = 0; ch < c; ++ch) out.at(cx + x, cy + y)[ch] = to_byte(src[(y * w + x) * c + ch]);
  }
  return out;
}

/// Stacks images vertically; narrower ones are padded with black on the right.
inline Image8 stack_rows(const std::vector<Image8>& rows) {
  std::size_t w = 0, h = 0;
  for (const auto& r : rows) {
    w = std::max(w, r.width);
    h += r.height;
  }
  Image8 out(w, h, rows.empty() ? 3 : rows.front().channels);
  std::size_t y0 = 0;
  for (const auto& r : rows) {
    for (std::size_t y = 0; y < r.height; ++y)
      std::copy_n(r.at(0, y), r.width * r.channels, out.at(0, y0 + y));
    y0 += r.height;
  }
  return out;
}

struct GridSpec {
  std::size_t grid_size = 8;
  double z_min = -2.0;
  double z_max = 2.0;
  std::size_t dim_x = 0;  // traversed along columns
  std::size_t dim_y = 1;  // traversed along rows (ignored when z_dim == 1)
  std::string sequence_id;

  void validate(std::size_t z_dim) const {
    if (grid_size < 2) throw ConfigError("grid size must be >= 2");
    if (!(z_min < z_max)) throw ConfigError("grid range needs z_min < z_max");
    if (dim_x >= z_dim || (z_dim > 1 && (dim_y >= z_dim || dim_y == dim_x))) {
      throw ConfigError("traversed dimensions must be distinct and < z_dim");
    }
  }

  double value(std::size_t k) const {
    return z_min + (z_max - z_min) * static_cast<double>(k) / static_cast<double>(grid_size - 1);
  }
};

struct GridResult {
  Tensor<float> tiles;  // [G*G (or G), H, W, C] Bernoulli means, row-major
  Tensor<float> f;      // the fixed static latent
  Tensor<float> z;      // [tiles, z_dim]
  Image8 montage;
};

/// Latent traversal: f is the posterior mean from n_frames sampled frames of
/// `seq`; tile (row r, col c) decodes z with z[dim_x] = value(c), z[dim_y] =
/// value(r) and the other dimensions at the mean of the frames' posterior means.
inline GridResult grid_traversal(const Inference<float>& inf, const SequenceFrames& seq, const GridSpec& spec, Rng& rng) {
  const ModelConfig& cfg = inf.config();
  spec.validate(cfg.z_dim);
  const std::size_t n = std::min<std::size_t>(cfg.n_frames, seq.frames->rows());
  std::vector<std::size_t> idx;
  if (n < cfg.n_frames) {
    for (std::size_t i = 0; i < cfg.n_frames; ++i) idx.push_back(i % seq.frames->rows());
  }
  const FrameSet<float> set = idx.empty() ? sample_frames(seq, cfg.n_frames, rng) : select_frames(seq, idx);
  GridResult r;
  r.f = inf.static_mean(set);
  const Tensor<float> zq = inf.dynamic_means(r.f, set.frames);
  std::vector<float> base(cfg.z_dim, 0.0f);
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t j = 0; j < cfg.z_dim; ++j) base[j] += zq[i * cfg.z_dim + j] / static_cast<float>(set.size());

  const std::size_t g = spec.grid_size;
  const std::size_t rows = cfg.z_dim == 1 ? 1 : g;
  const std::size_t count = rows * g;
  r.z = Tensor<float>({count, cfg.z_dim});
  Tensor<float> f_rows({count, cfg.f_dim});
  for (std::size_t row = 0; row < rows; ++row) {
    for (std::size_t col = 0; col < g; ++col) {
      const std::size_t k = row * g + col;
      float* z = r.z.data() + k * cfg.z_dim;
      std::copy(base.begin(), base.end(), z);
      z[spec.dim_x] = static_cast<float>(spec.value(col));
      if (cfg.z_dim > 1) z[spec.dim_y] = static_cast<float>(spec.value(row));
      std::copy_n(r.f.data(), cfg.f_dim, f_rows.data() + k * cfg.f_dim);
    }
  }
  r.tiles = inf.decode_means(f_rows, r.z);
  r.montage = tile_images(r.tiles, g, rows);
  return r;
}

/// Per-frame posterior means of z with f fixed from the whole sequence; [T, z_dim].
inline Tensor<float> timeline(const Inference<float>& inf, const SequenceFrames& seq) {
  return inf.dynamic_means(inf.sequence_static_mean(seq), *seq.frames);
}

inline std::string timeline_csv(const Tensor<float>& z) {
  const std::size_t k = z.dim(1);
  std::string out = "t";
  for (std::size_t j = 0; j < k; ++j) out += ",z_" + std::to_string(j + 1);
  out += "\n";
  for (std::size_t t = 0; t < z.rows(); ++t) {
    out += std::to_string(t);
    for (std::size_t j = 0; j < k; ++j) out += "," + format_double(z[t * k + j]);
    out += "\n";
  }
  return out;
}

/// Line plot of column `dim` of z [T, k] against t: white canvas, gray zero line, blue curve.
inline Image8 timeline_plot(const Tensor<float>& z, std::size_t dim = 0, std::size_t width = 640, std::size_t height = 240) {
  Image8 img(width, height, 3, 255);
  const std::size_t t_len = z.rows(), k = z.dim(1);
  double lo = 0, hi = 0;
  for (std::size_t t = 0; t < t_len; ++t) {
    lo = std::min<double>(lo, z[t * k + dim]);
    hi = std::max<double>(hi, z[t * k + dim]);
  }
  if (hi - lo < 1e-6) {
    hi += 1;
    lo -= 1;
  }
  const double margin = 10;
  auto px = [&](double t) {
    return margin + (t_len > 1 ? t / static_cast<double>(t_len - 1) : 0.5) * (static_cast<double>(width) - 2 * margin);
  };
  auto py = [&](double v) { return margin + (hi - v) / (hi - lo) * (static_cast<double>(height) - 2 * margin); };
  auto plot = [&](long x, long y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= static_cast<long>(width) || y >= static_cast<long>(height)) return;
    auto* p = img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
    p[0] = r, p[1] = g, p[2] = b;
  };
  auto line = [&](double x0, double y0, double x1, double y1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
    for (int s = 0; s <= steps; ++s) {
      const double a = static_cast<double>(s) / steps;
      plot(std::lround(x0 + a * (x1 - x0)), std::lround(y0 + a * (y1 - y0)), r, g, b);
    }
  };
  line(margin, py(0), static_cast<double>(width) - margin, py(0), 180, 180, 180);
  line(margin, margin, margin, static_cast<double>(height) - margin, 0, 0, 0);
  for (std::size_t t = 0; t + 1 < t_len; ++t) {
    line(px(static_cast<double>(t)), py(z[t * k + dim]), px(static_cast<double>(t + 1)), py(z[(t + 1) * k + dim]), 30, 60, 220);
  }
  for (std::size_t t = 0; t < t_len; ++t) {
    const long cx = std::lround(px(static_cast<double>(t))), cy = std::lround(py(z[t * k + dim]));
    for (long dy = -2; dy <= 2; ++dy)
      for (long dx = -2; dx <= 2; ++dx) plot(cx + dx, cy + dy, 30, 60, 220);
  }
  return img;
}

struct SwapResult {
  Tensor<float> swapped;  // [T_B, H, W, C]: decode(f_A, z_{B,t})
  Image8 strip;           // rows: A, B, swap
};

/// Static latent of A combined with each frame's dynamic latent of B.
inline SwapResult swap_strip(const Inference<float>& inf, const SequenceFrames& a, const SequenceFrames& b) {
  const ModelConfig& cfg = inf.config();
  const Tensor<float> f_a = inf.sequence_static_mean(a);
  const Tensor<float> z_b = inf.dynamic_means(inf.sequence_static_mean(b), *b.frames);
  const std::size_t t_b = b.frames->rows();
  Tensor<float> f_rows({t_b, cfg.f_dim});
  for (std::size_t t = 0; t < t_b; ++t) std::copy_n(f_a.data(), cfg.f_dim, f_rows.data() + t * cfg.f_dim);
  SwapResult r;
  r.swapped = inf.decode_means(f_rows, z_b);
  const std::size_t shown_a = std::min(a.frames->rows(), t_b);
  Shape dims = a.frames->dims();
  dims[0] = shown_a;
  const Tensor<float> a_shown(dims, std::vector<float>(a.frames->data(), a.frames->data() + shown_a * a.frames->row_size()));
  Image8 row_a = tile_images(a_shown, t_b, 1);
  r.strip = stack_rows({row_a, tile_images(*b.frames, t_b, 1), tile_images(r.swapped, t_b, 1)});
  return r;
}

}  // namespace dsvae
