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
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dsvae/autodiff.hpp"
#include "dsvae/config.hpp"
#include "dsvae/layers.hpp"
#include "dsvae/parameters.hpp"
#include "dsvae/rng.hpp"

namespace dsvae {

/// One entry of the layer inventory: what is applied, to which per-example
/// shape, and the parameter shapes it owns (`<name>.w`, `<name>.b`).
struct LayerInfo {
  std::string name;
  std::string group;
  LayerSpec spec;
  Shape input;
  Shape output;
  Shape weight;
  Shape bias;
};

/// Unordered index pairs (i < j) in lexicographic order.
inline std::vector<std::pair<std::size_t, std::size_t>> frame_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(i, j);
  return out;
}

namespace detail {

inline LayerInfo conv_layer(std::string name, std::string group, const LayerSpec& spec,
                            Shape input) {
  const std::size_t h = conv_out_extent(input[0], spec), w = conv_out_extent(input[1], spec);
  return {std::move(name), std::move(group), spec, input, {h, w, spec.filters},
          {spec.kernel, spec.kernel, input[2], spec.filters}, {spec.filters}};
}

inline LayerInfo deconv_layer(std::string name, std::string group, const LayerSpec& spec,
                              Shape input) {
  const std::size_t h = deconv_out_extent(input[0], spec), w = deconv_out_extent(input[1], spec);
  return {std::move(name), std::move(group), spec, input, {h, w, spec.filters},
          {spec.kernel, spec.kernel, spec.filters, input[2]}, {spec.filters}};
}

inline LayerInfo dense_layer(std::string name, std::string group, const LayerSpec& spec,
                             std::size_t in) {
  return {std::move(name), std::move(group), spec, {in}, {spec.filters}, {in, spec.filters},
          {spec.filters}};
}

}  // namespace detail

/// The complete network inventory for `cfg`, in evaluation order.
///
/// frame_encoder: conv_layers x (4x4, stride 2, pad 1, leaky ReLU), shared by all frames.
/// pair_conv:     one 3x3 conv over every channel-concatenated pair of frame features.
/// static_head:   3x3 conv over aggregated pair features, dense, dense(2 f_dim) -> [mu_f, logvar_f].
/// dynamic_encoder / dynamic_prior: dense, dense, dense(2 z_dim) on [f, h_i] and f.
/// decoder:       dense seed map, then conv_layers transposed convs, last one to `channels` logits.
inline std::vector<LayerInfo> architecture(const ModelConfig& cfg) {
  cfg.validate();
  using detail::conv_layer;
  using detail::deconv_layer;
  using detail::dense_layer;
  const auto lrelu = Activation::leaky_relu;
  auto with_slope = [&](LayerSpec s) {
    s.leaky_slope = cfg.leaky_slope;
    return s;
  };

  std::vector<LayerInfo> layers;
  Shape shape{cfg.image_size, cfg.image_size, cfg.channels};
  for (std::size_t i = 0; i < cfg.conv_layers; ++i) {
    layers.push_back(conv_layer("enc.conv" + std::to_string(i), "frame_encoder",
                                with_slope(LayerSpec::conv(4, cfg.conv_filters, 2, 1, lrelu)), shape));
    shape = layers.back().output;
  }
  const Shape feature = shape;
  const std::size_t s = feature[0];
  const std::size_t feature_len = shape_size(feature);

  layers.push_back(conv_layer("pair.conv", "pair_conv",
                              LayerSpec::conv(3, cfg.pair_filters, 1, 1, Activation::relu),
                              {s, s, 2 * cfg.conv_filters}));
  const std::size_t pairs = frame_pairs(cfg.n_frames).size();
  const std::size_t agg_channels =
      cfg.pair_aggregation == PairAggregation::concat ? pairs * cfg.pair_filters : cfg.pair_filters;
  layers.push_back(conv_layer("static.conv", "static_head",
                              LayerSpec::conv(3, cfg.pair_filters, 1, 1, Activation::relu),
                              {s, s, agg_channels}));
  layers.push_back(dense_layer("static.dense0", "static_head",
                               LayerSpec::dense(cfg.dense_units, Activation::relu),
                               s * s * cfg.pair_filters));
  layers.push_back(dense_layer("static.head", "static_head",
                               LayerSpec::dense(cfg.static_head_units(), Activation::none),
                               cfg.dense_units));

  for (const std::string prefix : {"dyn", "prior"}) {
    const std::string group = prefix == "dyn" ? "dynamic_encoder" : "dynamic_prior";
    const std::size_t in = prefix == "dyn" ? cfg.f_dim + feature_len : cfg.f_dim;
    layers.push_back(dense_layer(prefix + ".dense0", group,
                                 LayerSpec::dense(cfg.dense_units, Activation::relu), in));
    layers.push_back(dense_layer(prefix + ".dense1", group,
                                 LayerSpec::dense(cfg.dense_units, Activation::relu),
                                 cfg.dense_units));
    layers.push_back(dense_layer(prefix + ".head", group,
                                 LayerSpec::dense(2 * cfg.z_dim, Activation::none), cfg.dense_units));
  }

  layers.push_back(dense_layer("dec.proj", "decoder", with_slope(LayerSpec::dense(feature_len, lrelu)),
                               cfg.f_dim + cfg.z_dim));
  shape = feature;
  for (std::size_t i = 0; i < cfg.conv_layers; ++i) {
    const bool last = i + 1 == cfg.conv_layers;
    const LayerSpec spec = last ? LayerSpec::deconv(4, cfg.channels, 2, 1, Activation::none)
                                : with_slope(LayerSpec::deconv(4, cfg.conv_filters, 2, 1, lrelu));
    layers.push_back(deconv_layer("dec.deconv" + std::to_string(i), "decoder", spec, shape));
    shape = layers.back().output;
  }
  return layers;
}

/// Fan-in scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)); zero biases.
template <typename T>
ParameterSet<T> init_parameters(const ModelConfig& cfg, Rng& rng) {
  ParameterSet<T> params;
  for (const auto& layer : architecture(cfg)) {
    std::size_t fan_in = 0;
    switch (layer.spec.kind) {
      case LayerKind::conv2d: fan_in = layer.weight[0] * layer.weight[1] * layer.weight[2]; break;
      case LayerKind::deconv2d: fan_in = layer.weight[0] * layer.weight[1] * layer.weight[3]; break;
      case LayerKind::dense: fan_in = layer.weight[0]; break;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor<T> w(layer.weight);
    for (auto& v : w.span()) v = static_cast<T>(rng.uniform(-bound, bound));
    params.add(layer.name + ".w", std::move(w));
    params.add(layer.name + ".b", Tensor<T>(layer.bias));
  }
  return params;
}

/// Throws ConfigError unless `params` has exactly the layout `cfg` creates.
template <typename T>
void check_parameters(const ModelConfig& cfg, const ParameterSet<T>& params) {
  const auto layers = architecture(cfg);
  if (params.size() != 2 * layers.size()) {
    throw ConfigError("parameter set has " + std::to_string(params.size()) + " tensors, config expects " +
                      std::to_string(2 * layers.size()));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& w = params.entry(2 * i);
    const auto& b = params.entry(2 * i + 1);
    if (w.name != layers[i].name + ".w" || w.value.dims() != layers[i].weight ||
        b.name != layers[i].name + ".b" || b.value.dims() != layers[i].bias) {
      throw ConfigError("parameter '" + layers[i].name + "' does not match the config");
    }
  }
}

/// Posterior/prior head output split into mean and log-variance.
struct GaussianVars {
  Var mu;
  Var log_var;
};

/// Batched forward pieces recorded on a tape. Leading axis = examples.
template <typename T>
class Network {
 public:
  Network(const ModelConfig& cfg, Tape<T>& tape, const BoundParameters<T>& params)
      : cfg_(cfg), t_(tape), p_(params) {}

  /// [R,H,W,C] frames -> [R,s,s,conv_filters] features, one shared encoder.
  Var encode_frames(Var x) {
    const auto& dims = t_.value(x).dims();
    if (dims.size() != 4 || dims[1] != cfg_.image_size || dims[2] != cfg_.image_size ||
        dims[3] != cfg_.channels) {
      throw ConfigError("encode_frames: frames " + shape_string(dims) + " do not match config " +
                        std::to_string(cfg_.image_size) + "x" + std::to_string(cfg_.image_size) + "x" +
                        std::to_string(cfg_.channels));
    }
    Var h = x;
    for (std::size_t i = 0; i < cfg_.conv_layers; ++i) {
      const std::string name = "enc.conv" + std::to_string(i);
      h = ops::conv2d(t_, h, p_[name + ".w"], p_[name + ".b"], encoder_spec(), name);
      h = ops::leaky_relu(t_, h, cfg_.leaky_slope, name + ".act");
    }
    return h;
  }

  /// Features of `batch` frame sets of `n` frames each (row b*n+i) -> q(f | x_S).
  GaussianVars encode_static(Var h, std::size_t batch, std::size_t n) {
    if (n < 2) throw PreconditionError("encode_static: need at least 2 frames, got " + std::to_string(n));
    if (cfg_.pair_aggregation == PairAggregation::concat && n != cfg_.n_frames) {
      throw ConfigError("encode_static: concat aggregation was built for " +
                        std::to_string(cfg_.n_frames) + " frames, got " + std::to_string(n));
    }
    if (t_.value(h).rows() != batch * n) throw ConfigError("encode_static: feature rows != batch*n");
    // Mean mode feeds each unordered pair in both channel orders so the
    // pooled feature does not depend on frame order.
    auto pairs = frame_pairs(n);
    if (cfg_.pair_aggregation == PairAggregation::mean) {
      const std::size_t unordered = pairs.size();
      for (std::size_t k = 0; k < unordered; ++k) pairs.emplace_back(pairs[k].second, pairs[k].first);
    }
    std::vector<std::size_t> first, second;
    for (std::size_t b = 0; b < batch; ++b) {
      for (auto [i, j] : pairs) {
        first.push_back(b * n + i);
        second.push_back(b * n + j);
      }
    }
    Var hi = ops::gather_rows(t_, h, std::move(first), "pair.first");
    Var hj = ops::gather_rows(t_, h, std::move(second), "pair.second");
    Var cat = ops::concat_last(t_, hi, hj, "pair.concat");
    Var pf = ops::conv2d(t_, cat, p_["pair.conv.w"], p_["pair.conv.b"], pair_spec(), "pair.conv");
    pf = ops::relu(t_, pf, "pair.conv.act");
    Var agg = cfg_.pair_aggregation == PairAggregation::concat
                  ? ops::group_concat_last(t_, pf, pairs.size(), "pair.aggregate")
                  : ops::group_mean(t_, pf, pairs.size(), "pair.aggregate");
    Var s = ops::conv2d(t_, agg, p_["static.conv.w"], p_["static.conv.b"], pair_spec(), "static.conv");
    s = ops::relu(t_, s, "static.conv.act");
    s = ops::reshape(t_, s, {batch, t_.value(s).row_size()}, "static.flatten");
    s = dense(s, "static.dense0", Activation::relu);
    s = dense(s, "static.head", Activation::none);
    return split(s, cfg_.f_dim, "f");
  }

  /// q(z | f, x): f [R,f_dim] and features h [R,...] of the matching frames.
  GaussianVars encode_dynamic(Var f, Var h) {
    const std::size_t rows = t_.value(h).rows();
    Var hf = ops::reshape(t_, h, {rows, t_.value(h).row_size()}, "dyn.features");
    Var x = ops::concat_last(t_, f, hf, "dyn.input");
    x = dense(x, "dyn.dense0", Activation::relu);
    x = dense(x, "dyn.dense1", Activation::relu);
    x = dense(x, "dyn.head", Activation::none);
    return split(x, cfg_.z_dim, "z_post");
  }

  /// p(z | f) for f [R,f_dim].
  GaussianVars prior_dynamic(Var f) {
    Var x = dense(f, "prior.dense0", Activation::relu);
    x = dense(x, "prior.dense1", Activation::relu);
    x = dense(x, "prior.head", Activation::none);
    return split(x, cfg_.z_dim, "z_prior");
  }

  /// Bernoulli logits [R,H,W,C] for f [R,f_dim], z [R,z_dim].
  Var decode(Var f, Var z) {
    const std::size_t rows = t_.value(f).rows();
    Var x = ops::concat_last(t_, f, z, "dec.input");
    x = dense(x, "dec.proj", Activation::leaky_relu);
    const std::size_t s = cfg_.feature_size();
    x = ops::reshape(t_, x, {rows, s, s, cfg_.conv_filters}, "dec.seed");
    for (std::size_t i = 0; i < cfg_.conv_layers; ++i) {
      const bool last = i + 1 == cfg_.conv_layers;
      const std::string name = "dec.deconv" + std::to_string(i);
      const LayerSpec spec = LayerSpec::deconv(4, last ? cfg_.channels : cfg_.conv_filters, 2, 1,
                                               last ? Activation::none : Activation::leaky_relu);
      x = ops::deconv2d(t_, x, p_[name + ".w"], p_[name + ".b"], spec, name);
      if (!last) x = ops::leaky_relu(t_, x, cfg_.leaky_slope, name + ".act");
    }
    return x;
  }

  /// Repeats each row of x [B,...] `n` times: row b*n+i = x[b].
  Var repeat_rows(Var x, std::size_t n, std::string name) {
    std::vector<std::size_t> idx;
    for (std::size_t b = 0; b < t_.value(x).rows(); ++b)
      for (std::size_t i = 0; i < n; ++i) idx.push_back(b);
    return ops::gather_rows(t_, x, std::move(idx), std::move(name));
  }

  const ModelConfig& config() const { return cfg_; }

 private:
  LayerSpec encoder_spec() const { return LayerSpec::conv(4, cfg_.conv_filters, 2, 1, Activation::none); }
  LayerSpec pair_spec() const { return LayerSpec::conv(3, cfg_.pair_filters, 1, 1, Activation::none); }

  Var dense(Var x, const std::string& name, Activation act) {
    Var y = ops::dense(t_, x, p_[name + ".w"], p_[name + ".b"], name);
    return ops::activation(t_, y, act, cfg_.leaky_slope, name + ".act");
  }

  GaussianVars split(Var x, std::size_t d, const std::string& name) {
    return {ops::slice_last(t_, x, 0, d, name + ".mu"), ops::slice_last(t_, x, d, d, name + ".log_var")};
  }

  const ModelConfig& cfg_;
  Tape<T>& t_;
  const BoundParameters<T>& p_;
};

}  // namespace dsvae
