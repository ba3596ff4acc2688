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
#include <string>

#include "dsvae/error.hpp"
#include "dsvae/keyvalues.hpp"

namespace dsvae {

enum class PairAggregation { concat, mean };

inline std::string to_string(PairAggregation a) { return a == PairAggregation::concat ? "concat" : "mean"; }

inline PairAggregation parse_pair_aggregation(const std::string& s) {
  if (s == "concat") return PairAggregation::concat;
  if (s == "mean") return PairAggregation::mean;
  throw ConfigError("pair_aggregation must be 'concat' or 'mean', got '" + s + "'");
}

/// Architecture hyperparameters. Defaults are the desk-scale preset; the
/// 64x64 presets reproduce the published network tables.
struct ModelConfig {
  std::size_t image_size = 32;
  std::size_t channels = 3;
  std::size_t f_dim = 16;
  std::size_t z_dim = 2;
  std::size_t n_frames = 3;
  std::size_t conv_layers = 4;
  std::size_t conv_filters = 32;
  std::size_t pair_filters = 64;
  std::size_t dense_units = 128;
  PairAggregation pair_aggregation = PairAggregation::concat;
  double leaky_slope = 0.2;

  /// Width of the final static-encoder layer: mean and log-variance of f.
  std::size_t static_head_units() const { return 2 * f_dim; }
  /// Spatial extent of the per-frame feature maps.
  std::size_t feature_size() const { return image_size >> conv_layers; }

  static ModelConfig desk() { return {}; }

  /// Published table: 64x64x3, 256/512 filters, 512 dense units, Conv_F head of 1024 (f_dim 512).
  static ModelConfig paper() {
    ModelConfig c;
    c.image_size = 64;
    c.channels = 3;
    c.f_dim = 512;
    c.conv_filters = 256;
    c.pair_filters = 512;
    c.dense_units = 512;
    return c;
  }
  static ModelConfig paper_mmnist() {
    ModelConfig c = paper();
    c.channels = 1;
    c.f_dim = 64;
    return c;
  }
  static ModelConfig paper_sprites() {
    ModelConfig c = paper();
    c.f_dim = 256;
    return c;
  }

  static ModelConfig preset(const std::string& name) {
    if (name == "desk") return desk();
    if (name == "paper") return paper();
    if (name == "paper_mmnist") return paper_mmnist();
    if (name == "paper_sprites") return paper_sprites();
    throw ConfigError("unknown preset '" + name + "'");
  }

  void validate() const {
    if (conv_layers < 1) throw ConfigError("conv_layers must be >= 1");
    const std::size_t step = std::size_t{1} << conv_layers;
    if (image_size < step || image_size % step != 0) {
      throw ConfigError("image_size " + std::to_string(image_size) + " must be a positive multiple of " +
                        std::to_string(step) + " (" + std::to_string(conv_layers) + " halvings)");
    }
    if (channels < 1) throw ConfigError("channels must be >= 1");
    if (z_dim < 1 || f_dim < 1) throw ConfigError("z_dim and f_dim must be >= 1");
    if (n_frames < 2) throw ConfigError("n_frames must be >= 2 (pairwise comparison needs a pair)");
    if (conv_filters < 1 || pair_filters < 1 || dense_units < 1) {
      throw ConfigError("filter and unit counts must be >= 1");
    }
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must lie in (0,1)");
  }

  /// Reads known keys (and `preset`, applied first) from `kv`, leaving the rest.
  static ModelConfig from_keys(KeyValues& kv) { return from_keys(kv, desk()); }
  static ModelConfig from_keys(KeyValues& kv, ModelConfig base) {
    std::string s;
    if (kv.take("preset", s)) base = preset(s);
    kv.take_int("image_size", base.image_size);
    kv.take_int("channels", base.channels);
    kv.take_int("f_dim", base.f_dim);
    kv.take_int("z_dim", base.z_dim);
    kv.take_int("n_frames", base.n_frames);
    kv.take_int("conv_layers", base.conv_layers);
    kv.take_int("conv_filters", base.conv_filters);
    kv.take_int("pair_filters", base.pair_filters);
    kv.take_int("dense_units", base.dense_units);
    if (kv.take("pair_aggregation", s)) base.pair_aggregation = parse_pair_aggregation(s);
    kv.take_double("leaky_slope", base.leaky_slope);
    std::size_t head = 0;
    if (kv.take_int("static_head_units", head) && head != base.static_head_units()) {
      throw ConfigError("static_head_units must equal 2*f_dim (" +
                        std::to_string(base.static_head_units()) + ")");
    }
    return base;
  }

  void to_keys(KeyValues& kv) const {
    kv.set("image_size", std::to_string(image_size));
    kv.set("channels", std::to_string(channels));
    kv.set("f_dim", std::to_string(f_dim));
    kv.set("z_dim", std::to_string(z_dim));
    kv.set("n_frames", std::to_string(n_frames));
    kv.set("conv_layers", std::to_string(conv_layers));
    kv.set("conv_filters", std::to_string(conv_filters));
    kv.set("pair_filters", std::to_string(pair_filters));
    kv.set("dense_units", std::to_string(dense_units));
    kv.set("pair_aggregation", to_string(pair_aggregation));
    kv.set("leaky_slope", format_double(leaky_slope));
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Defaults are the desk-scale run. The learning rate is 10x the published one:
/// with 16 sequences per step instead of 120, 1e-4 has not converged after 10k steps.
struct TrainConfig {
  std::uint64_t steps = 10000;
  std::size_t batch_sequences = 16;
  std::size_t n_frames = 3;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_interval = 0;  // 0 = only at the end
  std::string log_path;

  /// The published optimizer settings: 120 sequences per step, N = 3, ADAM at 1e-4.
  static TrainConfig paper() {
    TrainConfig t;
    t.batch_sequences = 120;
    t.lr = 1e-4;
    return t;
  }

  /// Optimizer settings matching ModelConfig::preset(name); the dataset
  /// presets carry the published iteration counts (60k MMNIST, 43k Sprites).
  static TrainConfig preset(const std::string& name) {
    if (name == "desk") return TrainConfig();
    TrainConfig t = paper();
    if (name == "paper") return t;
    if (name == "paper_mmnist") t.steps = 60000;
    else if (name == "paper_sprites") t.steps = 43000;
    else throw ConfigError("unknown preset '" + name + "'");
    return t;
  }

  void validate() const {
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (batch_sequences < 1) throw ConfigError("batch_sequences must be >= 1");
    if (n_frames < 2) throw ConfigError("n_frames must be >= 2");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  }

  static TrainConfig from_keys(KeyValues& kv) { return from_keys(kv, TrainConfig()); }
  static TrainConfig from_keys(KeyValues& kv, TrainConfig base) {
    kv.take_int("steps", base.steps);
    kv.take_int("batch_sequences", base.batch_sequences);
    kv.take_int("n_frames", base.n_frames);
    kv.take_double("lr", base.lr);
    kv.take_int("seed", base.seed);
    kv.take_int("checkpoint_interval", base.checkpoint_interval);
    kv.take("log_path", base.log_path);
    return base;
  }
};

}  // namespace dsvae
