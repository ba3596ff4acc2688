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
#include <cstdint>
#include <limits>
#include <vector>

#include "dsvae/checkpoint.hpp"
#include "dsvae/dataset.hpp"
#include "dsvae/inference.hpp"
#include "dsvae/shapes.hpp"

namespace dsvae {

struct ProbeOptions {
  std::size_t frame_sets_per_sequence = 8;
  std::size_t swaps_per_sequence = 4;
  std::size_t palette_size = 6;
  std::uint64_t seed = 12345;
};

struct ProbeMetrics {
  double static_variance_ratio = 0;
  double swap_color_accuracy = 0;
  std::size_t swap_pairs = 0;
};

/// Mean within-group variance over between-group variance of the group means,
/// both as traces (summed over dimensions). groups[g] holds equal-length vectors.
inline double static_variance_ratio(const std::vector<std::vector<std::vector<double>>>& groups) {
  if (groups.size() < 2) throw PreconditionError("static_variance_ratio: need at least two groups");
  const std::size_t dim = groups.front().front().size();
  std::vector<std::vector<double>> means;
  double within = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw PreconditionError("static_variance_ratio: need at least two samples per group");
    std::vector<double> m(dim, 0.0);
    for (const auto& v : g)
      for (std::size_t j = 0; j < dim; ++j) m[j] += v[j] / static_cast<double>(g.size());
    double var = 0;
    for (const auto& v : g)
      for (std::size_t j = 0; j < dim; ++j) var += (v[j] - m[j]) * (v[j] - m[j]);
    within += var / static_cast<double>(g.size() - 1);
    means.push_back(std::move(m));
  }
  within /= static_cast<double>(groups.size());
  std::vector<double> grand(dim, 0.0);
  for (const auto& m : means)
    for (std::size_t j = 0; j < dim; ++j) grand[j] += m[j] / static_cast<double>(means.size());
  double between = 0;
  for (const auto& m : means)
    for (std::size_t j = 0; j < dim; ++j) between += (m[j] - grand[j]) * (m[j] - grand[j]);
  between /= static_cast<double>(means.size() - 1);
  if (between <= 0) return within > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  return within / between;
}

/// Palette index closest to the foreground of an [H,W,3] image: pixels whose
/// brightest channel exceeds 0.5 vote by squared distance (the single
/// brightest pixel if none do).
template <typename T>
std::size_t dominant_color(const T* image, std::size_t pixels, std::size_t palette_size) {
  const auto& table = color_table();
  std::vector<double> score(palette_size, 0.0);
  std::size_t fg = 0, brightest = 0;
  double best_bright = -1;
  for (std::size_t p = 0; p < pixels; ++p) {
    const T* px = image + 3 * p;
    const double bright = std::max({px[0], px[1], px[2]});
    if (bright > best_bright) {
      best_bright = bright;
      brightest = p;
    }
    if (bright <= 0.5) continue;
    ++fg;
    for (std::size_t c = 0; c < palette_size; ++c) {
      double d = 0;
      for (std::size_t k = 0; k < 3; ++k) d += (px[k] - table[c][k]) * (px[k] - table[c][k]);
      score[c] -= d;
    }
  }
  if (fg == 0) {
    const T* px = image + 3 * brightest;
    for (std::size_t c = 0; c < palette_size; ++c) {
      double d = 0;
      for (std::size_t k = 0; k < 3; ++k) d += (px[k] - table[c][k]) * (px[k] - table[c][k]);
      score[c] = -d;
    }
  }
  return static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
}

/// Quantifies the static/dynamic split on a labeled moving-shapes dataset.
///
/// static_variance_ratio: spread of mu_f across random frame sets of the same
/// sequence relative to its spread across sequences (small is good).
/// swap_color_accuracy: for pairs (A, B) with different colors, the fraction
/// where decode(f_A, z_B) renders in A's color.
inline ProbeMetrics disentanglement_probe(const Checkpoint& ckpt, const SequenceDataset& ds,
                                          const ProbeOptions& opt = {}) {
  if (ds.size() < 2) throw PreconditionError("disentanglement_probe: need at least two sequences");
  for (const auto& s : ds.sequences) {
    if (!s.labeled()) throw PreconditionError("disentanglement_probe: sequence '" + s.id + "' carries no labels");
  }
  if (ds.channels() != 3) throw PreconditionError("disentanglement_probe: color probe needs 3 channels");
  const ModelConfig& cfg = ckpt.config;
  Inference<float> inf(cfg, ckpt.params);
  Rng rng(opt.seed);
  const auto frames = ds.frames_only();

  std::vector<std::vector<std::vector<double>>> groups;
  std::vector<Tensor<float>> seq_f;
  for (const auto& seq : frames) {
    std::vector<FrameSet<float>> sets;
    for (std::size_t k = 0; k < opt.frame_sets_per_sequence; ++k) sets.push_back(sample_frames(seq, cfg.n_frames, rng));
    const Tensor<float> mu = inf.static_means(sets);
    std::vector<std::vector<double>> g;
    Tensor<float> first({cfg.f_dim});
    for (std::size_t k = 0; k < sets.size(); ++k) {
      g.emplace_back(mu.row(k).begin(), mu.row(k).end());
    }
    std::copy_n(mu.data(), cfg.f_dim, first.data());
    groups.push_back(std::move(g));
    seq_f.push_back(std::move(first));
  }

  ProbeMetrics m;
  m.static_variance_ratio = static_variance_ratio(groups);

  std::vector<std::size_t> a_idx;
  std::vector<float> f_rows, z_rows;
  for (std::size_t a = 0; a < ds.size(); ++a) {
    const std::size_t color_a = ds.sequences[a].static_label->color;
    for (std::size_t k = 0; k < opt.swaps_per_sequence; ++k) {
      std::size_t b = a;
      for (int tries = 0; tries < 1000 && ds.sequences[b].static_label->color == color_a; ++tries) b = rng.below(ds.size());
      if (ds.sequences[b].static_label->color == color_a) continue;
      const std::size_t t = rng.below(ds.sequences[b].length());
      const FrameSet<float> one = select_frames(frames[b], {t});
      const Tensor<float> z = inf.dynamic_means(seq_f[b], one.frames);
      f_rows.insert(f_rows.end(), seq_f[a].span().begin(), seq_f[a].span().end());
      z_rows.insert(z_rows.end(), z.span().begin(), z.span().end());
      a_idx.push_back(a);
    }
  }
  if (a_idx.empty()) throw PreconditionError("disentanglement_probe: no pairs with differing colors");
  const std::size_t pairs = a_idx.size();
  const Tensor<float> images = inf.decode_means(Tensor<float>({pairs, cfg.f_dim}, f_rows),
                                                Tensor<float>({pairs, cfg.z_dim}, z_rows));
  const std::size_t pixels = cfg.image_size * cfg.image_size;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    if (dominant_color(images.data() + i * images.row_size(), pixels, opt.palette_size) ==
        ds.sequences[a_idx[i]].static_label->color) {
      ++hits;
    }
  }
  m.swap_pairs = pairs;
  m.swap_color_accuracy = static_cast<double>(hits) / static_cast<double>(pairs);
  return m;
}

}  // namespace dsvae
