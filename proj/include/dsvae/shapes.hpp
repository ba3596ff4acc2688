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
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "dsvae/dataset.hpp"
#include "dsvae/error.hpp"
#include "dsvae/keyvalues.hpp"
#include "dsvae/rng.hpp"

namespace dsvae {

enum class ShapeKind { square, circle, triangle };

inline std::string to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::square: return "square";
    case ShapeKind::circle: return "circle";
    case ShapeKind::triangle: return "triangle";
  }
  return "?";
}

inline ShapeKind parse_shape_kind(const std::string& s) {
  if (s == "square") return ShapeKind::square;
  if (s == "circle") return ShapeKind::circle;
  if (s == "triangle") return ShapeKind::triangle;
  throw ConfigError("unknown shape kind '" + s + "'");
}

using Color = std::array<float, 3>;

/// Fixed color table; a palette of size n uses the first n entries. The first
/// six are the saturated RGB corners so rendered pixels stay binary.
inline const std::array<Color, 12>& color_table() {
  static const std::array<Color, 12> table{{{1, 0, 0},
                                            {0, 1, 0},
                                            {0, 0, 1},
                                            {1, 1, 0},
                                            {1, 0, 1},
                                            {0, 1, 1},
                                            {1, 0.5f, 0},
                                            {0.5f, 0, 1},
                                            {0, 0.5f, 0},
                                            {0.5f, 0.5f, 0.5f},
                                            {1, 0.5f, 0.5f},
                                            {0.5f, 1, 0.5f}}};
  return table;
}

struct ShapeWorldConfig {
  std::size_t canvas = 32;
  std::vector<ShapeKind> shapes{ShapeKind::square, ShapeKind::circle, ShapeKind::triangle};
  std::size_t palette_size = 6;
  std::size_t length = 20;
  std::size_t max_length = 0;  // > length draws T uniformly from [length, max_length]
  double shape_size = 10.0;
  double min_speed = 1.0;
  double max_speed = 3.0;
  std::uint64_t seed = 0;

  std::size_t identities() const { return shapes.size() * palette_size; }

  void validate() const {
    if (canvas < 1) throw ConfigError("canvas must be >= 1");
    if (shapes.empty()) throw ConfigError("at least one shape kind is required");
    for (std::size_t i = 0; i < shapes.size(); ++i)
      for (std::size_t j = i + 1; j < shapes.size(); ++j)
        if (shapes[i] == shapes[j]) throw ConfigError("shape kinds must be distinct");
    if (palette_size < 1 || palette_size > color_table().size()) {
      throw ConfigError("palette_size must lie in [1," + std::to_string(color_table().size()) + "]");
    }
    if (!(shape_size >= 1.0) || shape_size > static_cast<double>(canvas)) {
      throw ConfigError("shape of size " + format_double(shape_size) + " does not fit a " +
                        std::to_string(canvas) + "px canvas");
    }
    if (length < 2) throw ConfigError("sequence length must be >= 2");
    if (max_length != 0 && max_length < length) throw ConfigError("max_length must be >= length");
    if (!(min_speed >= 0.0) || max_speed < min_speed) throw ConfigError("invalid speed range");
  }

  static ShapeWorldConfig from_keys(KeyValues& kv) { return from_keys(kv, ShapeWorldConfig()); }
  static ShapeWorldConfig from_keys(KeyValues& kv, ShapeWorldConfig base) {
    std::string s;
    kv.take_int("canvas", base.canvas);
    if (kv.take("shapes", s)) {
      base.shapes.clear();
      std::size_t start = 0;
      while (start <= s.size()) {
        const std::size_t comma = std::min(s.find(',', start), s.size());
        base.shapes.push_back(parse_shape_kind(KeyValues::trim(s.substr(start, comma - start))));
        start = comma + 1;
      }
    }
    kv.take_int("palette_size", base.palette_size);
    kv.take_int("length", base.length);
    kv.take_int("max_length", base.max_length);
    kv.take_double("shape_size", base.shape_size);
    kv.take_double("min_speed", base.min_speed);
    kv.take_double("max_speed", base.max_speed);
    kv.take_int("seed", base.seed);
    return base;
  }

  std::string to_text() const {
    KeyValues kv;
    kv.set("canvas", std::to_string(canvas));
    std::string names;
    for (std::size_t i = 0; i < shapes.size(); ++i) names += (i ? "," : "") + to_string(shapes[i]);
    kv.set("shapes", names);
    kv.set("palette_size", std::to_string(palette_size));
    kv.set("length", std::to_string(length));
    kv.set("max_length", std::to_string(max_length));
    kv.set("shape_size", format_double(shape_size));
    kv.set("min_speed", format_double(min_speed));
    kv.set("max_speed", format_double(max_speed));
    kv.set("seed", std::to_string(seed));
    return kv.to_text();
  }
};

/// True when the pixel centre (px+0.5, py+0.5) lies inside the shape centred at (cx, cy).
inline bool shape_covers(ShapeKind kind, double size, double cx, double cy, double px, double py) {
  const double dx = px + 0.5 - cx, dy = py + 0.5 - cy, r = size / 2;
  switch (kind) {
    case ShapeKind::square: return std::abs(dx) <= r && std::abs(dy) <= r;
    case ShapeKind::circle: return dx * dx + dy * dy <= r * r;
    case ShapeKind::triangle: return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) / 2;
  }
  return false;
}

/// Renders one frame [canvas, canvas, 3] with a single shape on black.
inline void render_shape(float* frame, std::size_t canvas, ShapeKind kind, const Color& color, double size,
                         double cx, double cy) {
  for (std::size_t y = 0; y < canvas; ++y) {
    for (std::size_t x = 0; x < canvas; ++x) {
      float* px = frame + (y * canvas + x) * 3;
      const bool on = shape_covers(kind, size, cx, cy, static_cast<double>(x), static_cast<double>(y));
      for (std::size_t c = 0; c < 3; ++c) px[c] = on ? color[c] : 0.0f;
    }
  }
}

/// Moving-shapes sequences: identity (shape kind, color) fixed per sequence,
/// position moving at constant speed and bouncing off the canvas walls.
/// Sequence i gets identity i mod identities(), so identities are balanced.
inline SequenceDataset gen_moving_shapes(const ShapeWorldConfig& cfg, std::size_t num_sequences) {
  cfg.validate();
  if (num_sequences < 1) throw PreconditionError("gen_moving_shapes: need at least one sequence");
  SequenceDataset ds;
  ds.generator_config = cfg.to_text() + "num_sequences = " + std::to_string(num_sequences) + "\n";
  const double lo = cfg.shape_size / 2, hi = static_cast<double>(cfg.canvas) - cfg.shape_size / 2;
  for (std::size_t i = 0; i < num_sequences; ++i) {
    Rng rng = Rng::for_stream(cfg.seed, i);
    const std::size_t identity = i % cfg.identities();
    const StaticLabel label{identity / cfg.palette_size, identity % cfg.palette_size};
    std::size_t t_len = cfg.length;
    if (cfg.max_length > cfg.length) t_len += rng.below(cfg.max_length - cfg.length + 1);

    double x = rng.uniform(lo, hi), y = rng.uniform(lo, hi);
    const double speed = rng.uniform(cfg.min_speed, cfg.max_speed);
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double vx = speed * std::cos(angle), vy = speed * std::sin(angle);

    Sequence s;
    s.id = std::to_string(i);
    s.static_label = label;
    s.frames = Tensor<float>({t_len, cfg.canvas, cfg.canvas, 3});
    const std::size_t frame_len = cfg.canvas * cfg.canvas * 3;
    for (std::size_t t = 0; t < t_len; ++t) {
      render_shape(s.frames.data() + t * frame_len, cfg.canvas, cfg.shapes[label.shape],
                   color_table()[label.color], cfg.shape_size, x, y);
      s.dynamic_labels.push_back({x, y});
      auto advance = [&](double& p, double& v) {
        p += v;
        if (hi <= lo) {
          p = lo;
          return;
        }
        while (p < lo || p > hi) {
          if (p < lo) p = 2 * lo - p;
          if (p > hi) p = 2 * hi - p;
          v = -v;
        }
      };
      advance(x, vx);
      advance(y, vy);
    }
    ds.sequences.push_back(std::move(s));
  }
  return ds;
}

}  // namespace dsvae
