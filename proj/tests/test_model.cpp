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

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "dsvae/model.hpp"
#include "test_support.hpp"

namespace dsvae {
namespace {

using testing::random_tensor;

ModelConfig small_config(PairAggregation agg = PairAggregation::concat, std::size_t channels = 1) {
  ModelConfig c;
  c.image_size = 16;
  c.channels = channels;
  c.conv_layers = 2;
  c.conv_filters = 6;
  c.pair_filters = 5;
  c.dense_units = 12;
  c.f_dim = 3;
  c.z_dim = 2;
  c.pair_aggregation = agg;
  return c;
}

template <typename T>
Tensor<T> frames_for(const ModelConfig& c, std::size_t n, Rng& rng) {
  return random_tensor<T>({n, c.image_size, c.image_size, c.channels}, rng, 0, 1);
}

template <typename T>
void zero_layer(ParameterSet<T>& p, const std::string& layer) {
  p[layer + ".w"].fill(0);
  p[layer + ".b"].fill(0);
}

TEST(ModelConfig, Validation) {
  ModelConfig c;
  EXPECT_NO_THROW(c.validate());
  c.image_size = 40;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig{};
  c.n_frames = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig{};
  c.z_dim = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(ModelConfig::preset("nope"), ConfigError);
}

TEST(ModelConfig, KeysRoundTrip) {
  ModelConfig c = small_config(PairAggregation::mean);
  c.leaky_slope = 0.15;
  KeyValues kv;
  c.to_keys(kv);
  KeyValues back = KeyValues::parse(kv.to_text());
  EXPECT_EQ(ModelConfig::from_keys(back), c);
  back.expect_consumed("model");
}

TEST(ModelConfig, PresetKeyAppliedFirst) {
  KeyValues kv = KeyValues::parse("f_dim = 64\npreset = paper\n");
  const ModelConfig c = ModelConfig::from_keys(kv);
  EXPECT_EQ(c.image_size, 64u);
  EXPECT_EQ(c.f_dim, 64u);
}

TEST(ModelConfig, StaticHeadUnitsMustMatchFDim) {
  KeyValues ok = KeyValues::parse("preset = paper\nstatic_head_units = 1024\n");
  EXPECT_EQ(ModelConfig::from_keys(ok).static_head_units(), 1024u);
  KeyValues bad = KeyValues::parse("f_dim = 64\nstatic_head_units = 1024\n");
  EXPECT_THROW(ModelConfig::from_keys(bad), ConfigError);
}

TEST(ModelConfig, PaperPresets) {
  EXPECT_EQ(ModelConfig::paper_mmnist().f_dim, 64u);
  EXPECT_EQ(ModelConfig::paper_mmnist().channels, 1u);
  EXPECT_EQ(ModelConfig::paper_sprites().f_dim, 256u);
  EXPECT_EQ(ModelConfig::paper().static_head_units(), 1024u);
}

TEST(FramePairs, ThreeAndFour) {
  using P = std::vector<std::pair<std::size_t, std::size_t>>;
  EXPECT_EQ(frame_pairs(3), (P{{0, 1}, {0, 2}, {1, 2}}));
  EXPECT_EQ(frame_pairs(4).size(), 6u);
}

TEST(EncodeFrames, PaperShape) {
  const ModelConfig c = ModelConfig::paper();
  Rng rng(1);
  const auto p = init_parameters<float>(c, rng);
  EXPECT_EQ(encode_frames(c, p, frames_for<float>(c, 3, rng)).dims(), (Shape{3, 4, 4, 256}));
}

TEST(EncodeFrames, DeskScaleShape) {
  ModelConfig c;
  c.channels = 1;
  Rng rng(2);
  const auto p = init_parameters<float>(c, rng);
  EXPECT_EQ(encode_frames(c, p, frames_for<float>(c, 3, rng)).dims(), (Shape{3, 2, 2, c.conv_filters}));
}

TEST(EncodeFrames, SharedWeights) {
  const ModelConfig c = small_config();
  Rng rng(3);
  const auto p = init_parameters<double>(c, rng);
  const auto one = frames_for<double>(c, 1, rng);
  Tensor<double> two({2, c.image_size, c.image_size, c.channels});
  std::copy_n(one.data(), one.size(), two.data());
  std::copy_n(one.data(), one.size(), two.data() + one.size());
  const auto h = encode_frames(c, p, two);
  const auto a = h.row(0), b = h.row(1);
  EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
}

TEST(EncodeFrames, RejectsPixelsOutsideUnitInterval) {
  const ModelConfig c = small_config();
  Rng rng(4);
  const auto p = init_parameters<double>(c, rng);
  auto x = frames_for<double>(c, 3, rng);
  x[5] = 1.5;
  EXPECT_THROW(encode_frames(c, p, x), PreconditionError);
}

TEST(EncodeStatic, OutputDimsAndErrors) {
  Rng rng(5);
  const ModelConfig concat = small_config();
  const auto p = init_parameters<double>(concat, rng);
  const auto g = encode_static(concat, p, encode_frames(concat, p, frames_for<double>(concat, 3, rng)));
  EXPECT_EQ(g.mu.dims(), (Shape{3}));
  EXPECT_EQ(g.log_var.dims(), (Shape{3}));
  EXPECT_THROW(encode_static(concat, p, encode_frames(concat, p, frames_for<double>(concat, 4, rng))), ConfigError);
  EXPECT_THROW(encode_static(concat, p, encode_frames(concat, p, frames_for<double>(concat, 1, rng))),
               PreconditionError);
}

TEST(EncodeStatic, MeanModeAcceptsAnyN) {
  Rng rng(6);
  const ModelConfig c = small_config(PairAggregation::mean);
  const auto p = init_parameters<double>(c, rng);
  for (std::size_t n : {2u, 4u, 7u}) {
    const auto g = encode_static(c, p, encode_frames(c, p, frames_for<double>(c, n, rng)));
    EXPECT_EQ(g.mu.dims(), (Shape{c.f_dim}));
  }
}

Tensor<float> permute_rows(const Tensor<float>& x, const std::vector<std::size_t>& perm) {
  Tensor<float> y(x.dims());
  const std::size_t r = x.row_size();
  for (std::size_t i = 0; i < perm.size(); ++i) std::copy_n(x.data() + perm[i] * r, r, y.data() + i * r);
  return y;
}

TEST(EncodeStatic, MeanModePermutationInvariant) {
  Rng rng(7);
  ModelConfig c = small_config(PairAggregation::mean, 3);
  c.n_frames = 4;
  const auto p = init_parameters<float>(c, rng);
  for (int input = 0; input < 10; ++input) {
    const auto x = frames_for<float>(c, 4, rng);
    const auto ref = encode_static(c, p, encode_frames(c, p, x));
    std::vector<std::size_t> perm(4);
    std::iota(perm.begin(), perm.end(), 0);
    for (int k = 0; k < 10; ++k) {
      for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
      const auto g = encode_static(c, p, encode_frames(c, p, permute_rows(x, perm)));
      EXPECT_LE(max_abs_diff(g.mu, ref.mu), 1e-5);
      EXPECT_LE(max_abs_diff(g.log_var, ref.log_var), 1e-5);
    }
  }
}

TEST(EncodeStatic, ConcatModeIsOrderSensitive) {
  Rng rng(8);
  const ModelConfig c = small_config();
  const auto p = init_parameters<float>(c, rng);
  const auto x = frames_for<float>(c, 3, rng);
  const auto a = encode_static(c, p, encode_frames(c, p, x));
  const auto b = encode_static(c, p, encode_frames(c, p, permute_rows(x, {2, 0, 1})));
  EXPECT_GT(max_abs_diff(a.mu, b.mu), 0.0);
}

TEST(Heads, ZeroFinalLayerGivesStandardNormal) {
  Rng rng(9);
  const ModelConfig c = small_config();
  auto p = init_parameters<double>(c, rng);
  zero_layer(p, "dyn.head");
  zero_layer(p, "prior.head");
  const auto h = encode_frames(c, p, frames_for<double>(c, 3, rng));
  for (int k = 0; k < 3; ++k) {
    const auto f = random_tensor<double>({c.f_dim}, rng, -3, 3);
    const auto q = encode_dynamic(c, p, f, h.slice_rows(0, 1).reshaped({c.feature_size(), c.feature_size(), c.conv_filters}));
    const auto pr = prior_dynamic(c, p, f);
    const Tensor<double> zero({c.z_dim});
    EXPECT_EQ(q.mu, zero);
    EXPECT_EQ(q.log_var, zero);
    EXPECT_EQ(pr.mu, zero);
    EXPECT_EQ(pr.log_var, zero);
  }
}

TEST(Heads, WidthIsTwiceZDim) {
  for (const auto& c : {ModelConfig::paper(), ModelConfig::desk(), small_config()}) {
    for (const auto& l : architecture(c)) {
      if (l.name == "dyn.head" || l.name == "prior.head") {
        EXPECT_EQ(l.spec.filters, 2 * c.z_dim);
      }
    }
  }
}

TEST(Prior, DependsOnF) {
  Rng rng(10);
  const ModelConfig c = small_config();
  const auto p = init_parameters<double>(c, rng);
  const auto a = prior_dynamic(c, p, random_tensor<double>({c.f_dim}, rng, -2, 2));
  const auto b = prior_dynamic(c, p, random_tensor<double>({c.f_dim}, rng, -2, 2));
  EXPECT_GT(max_abs_diff(a.mu, b.mu), 0.0);
}

TEST(Decode, Shapes) {
  Rng rng(11);
  ModelConfig desk;
  desk.channels = 1;
  const auto p = init_parameters<float>(desk, rng);
  EXPECT_EQ(decode(desk, p, Tensor<float>({desk.f_dim}), Tensor<float>({desk.z_dim})).dims(), (Shape{32, 32, 1}));
  EXPECT_EQ(decode(desk, p, Tensor<float>({5, desk.f_dim}), Tensor<float>({5, desk.z_dim})).dims(),
            (Shape{5, 32, 32, 1}));
  const ModelConfig paper = ModelConfig::paper();
  const auto pp = init_parameters<float>(paper, rng);
  EXPECT_EQ(decode(paper, pp, Tensor<float>({paper.f_dim}), Tensor<float>({paper.z_dim})).dims(),
            (Shape{64, 64, 3}));
}

TEST(Decode, DependsOnZ) {
  Rng rng(12);
  const ModelConfig c = small_config();
  const auto p = init_parameters<double>(c, rng);
  const auto f = random_tensor<double>({c.f_dim}, rng);
  EXPECT_GT(max_abs_diff(decode(c, p, f, Tensor<double>::vector({-2, 0})), decode(c, p, f, Tensor<double>::vector({2, 1}))),
            0.0);
}

TEST(Elbo, IdentityIsExact) {
  Rng rng(13);
  for (auto agg : {PairAggregation::concat, PairAggregation::mean}) {
    const ModelConfig c = small_config(agg, 3);
    const auto p = init_parameters<float>(c, rng);
    for (int k = 0; k < 5; ++k) {
      const FrameSet<float> x{frames_for<float>(c, 3, rng), "s", {0, 1, 2}};
      const auto r = elbo(c, p, x, ElboNoise<float>::draw(c, 1, 3, rng));
      EXPECT_EQ(r.elbo, r.recon_loglik - r.kl_z - r.kl_f);
      EXPECT_GE(r.kl_z, 0.0f);
      EXPECT_GE(r.kl_f, 0.0f);
      EXPECT_LE(r.recon_loglik, 0.0f);
    }
  }
}

TEST(Elbo, ZeroedHeadsLeaveOnlyReconstruction) {
  Rng rng(14);
  const ModelConfig c = small_config();
  auto p = init_parameters<double>(c, rng);
  zero_layer(p, "static.head");
  zero_layer(p, "dyn.head");
  zero_layer(p, "prior.head");
  const FrameSet<double> x{frames_for<double>(c, 3, rng), "s", {0, 1, 2}};
  const auto r = elbo(c, p, x, ElboNoise<double>::draw(c, 1, 3, rng));
  EXPECT_EQ(r.kl_f, 0.0);
  EXPECT_EQ(r.kl_z, 0.0);
  EXPECT_EQ(r.elbo, r.recon_loglik);
}

TEST(Elbo, BatchRowsMatchSingleSetEvaluation) {
  Rng rng(15);
  const ModelConfig c = small_config();
  const auto p = init_parameters<double>(c, rng);
  const std::size_t batch = 3, n = 3;
  const auto frames = frames_for<double>(c, batch * n, rng);
  const auto noise = ElboNoise<double>::draw(c, batch, n, rng);
  Tape<double> tape;
  BoundParameters<double> bound(tape, p, false);
  const auto v = elbo_on_tape(c, tape, bound, frames, batch, n, noise);
  double mean = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    const FrameSet<double> x{frames.slice_rows(b * n, n), "s", {0, 1, 2}};
    const ElboNoise<double> nb{noise.eps_f.slice_rows(b, 1), noise.eps_z.slice_rows(b * n, n)};
    const auto single = elbo(c, p, x, nb);
    EXPECT_NEAR(report_row(tape, v, b).elbo, single.elbo, 1e-9);
    mean += single.elbo / batch;
  }
  EXPECT_NEAR(tape.value(v.loss).item(), -mean, 1e-9);
}

TEST(Elbo, TinyModelGradientsMatchFiniteDifferences) {
  ModelConfig c;
  c.image_size = 8;
  c.channels = 1;
  c.conv_layers = 3;
  c.conv_filters = 3;
  c.pair_filters = 3;
  c.dense_units = 5;
  c.f_dim = 2;
  c.z_dim = 2;
  Rng rng(16);
  auto p = init_parameters<double>(c, rng);
  testing::randomize_biases(p, rng);
  const auto frames = frames_for<double>(c, 3, rng);
  const auto noise = ElboNoise<double>::draw(c, 1, 3, rng);
  const auto rep = testing::finite_difference_check(p, [&](Tape<double>& t, const BoundParameters<double>& b) {
    return elbo_on_tape(c, t, b, frames, 1, 3, noise).loss;
  });
  EXPECT_LT(rep.max_rel_error, 1e-3) << rep.worst;
}

TEST(SampleGenerate, DeterministicAndInUnitInterval) {
  const ModelConfig c = small_config(PairAggregation::concat, 3);
  Rng init(17);
  const auto p = init_parameters<float>(c, init);
  Rng a(99), b(99);
  const auto x = sample_generate(c, p, a, 4);
  const auto y = sample_generate(c, p, b, 4);
  ASSERT_EQ(x.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(x[k], y[k]);
    EXPECT_EQ(x[k].dims(), (Shape{16, 16, 3}));
    for (float v : x[k].span()) {
      EXPECT_GT(v, 0.0f);
      EXPECT_LT(v, 1.0f);
    }
  }
}

TEST(SampleGenerate, SharedStaticCode) {
  const ModelConfig c = small_config();
  Rng init(18);
  auto p = init_parameters<double>(c, init);
  // with a z-independent decoder, images sharing f must coincide
  for (std::size_t i = c.f_dim; i < c.f_dim + c.z_dim; ++i) {
    for (std::size_t j = 0; j < p["dec.proj.w"].dims()[1]; ++j) p["dec.proj.w"][i * p["dec.proj.w"].dims()[1] + j] = 0;
  }
  Rng rng(5);
  const auto shared = sample_generate(c, p, rng, 3, true);
  EXPECT_EQ(shared[0], shared[1]);
  EXPECT_EQ(shared[0], shared[2]);
  const auto separate = sample_generate(c, p, rng, 2, false);
  EXPECT_GT(max_abs_diff(separate[0], separate[1]), 0.0);
}

TEST(Architecture, PaperInventory) {
  const ModelConfig c = ModelConfig::paper();
  const auto layers = architecture(c);
  std::vector<std::string> names;
  for (const auto& l : layers) names.push_back(l.name);
  const std::vector<std::string> expected{"enc.conv0",   "enc.conv1",   "enc.conv2",    "enc.conv3",
                                          "pair.conv",   "static.conv", "static.dense0", "static.head",
                                          "dyn.dense0",  "dyn.dense1",  "dyn.head",      "prior.dense0",
                                          "prior.dense1", "prior.head", "dec.proj",      "dec.deconv0",
                                          "dec.deconv1", "dec.deconv2", "dec.deconv3"};
  ASSERT_EQ(names, expected);
  std::size_t extent = 64;
  for (int i = 0; i < 4; ++i) {
    const auto& l = layers[i];
    EXPECT_EQ(l.spec.kind, LayerKind::conv2d);
    EXPECT_EQ(l.spec.kernel, 4u);
    EXPECT_EQ(l.spec.stride, 2u);
    EXPECT_EQ(l.spec.filters, 256u);
    EXPECT_EQ(l.input[0], extent);
    extent /= 2;
    EXPECT_EQ(l.output, (Shape{extent, extent, 256}));
  }
  EXPECT_EQ(extent, 4u);
  const auto& pair = layers[4];
  EXPECT_EQ(pair.spec.kernel, 3u);
  EXPECT_EQ(pair.spec.filters, 512u);
  EXPECT_EQ(pair.input, (Shape{4, 4, 512}));
  EXPECT_EQ(layers[5].input, (Shape{4, 4, 3 * 512}));
  EXPECT_EQ(layers[7].spec.filters, 1024u);
  EXPECT_EQ(layers[7].spec.activation, Activation::none);
  EXPECT_EQ(layers[8].input, (Shape{512 + 4 * 4 * 256}));
  EXPECT_EQ(layers[10].spec.filters, 4u);
  EXPECT_EQ(layers[13].spec.filters, 4u);
  EXPECT_EQ(layers[14].input, (Shape{512 + 2}));
  EXPECT_EQ(layers[14].output, (Shape{4 * 4 * 256}));
  for (int i = 15; i < 18; ++i) EXPECT_EQ(layers[i].spec.filters, 256u);
  EXPECT_EQ(layers[18].spec.filters, 3u);
  EXPECT_EQ(layers[18].spec.activation, Activation::none);
  EXPECT_EQ(layers[18].output, (Shape{64, 64, 3}));
}

TEST(Parameters, InitMatchesArchitecture) {
  const ModelConfig c = small_config();
  Rng rng(19);
  auto p = init_parameters<double>(c, rng);
  EXPECT_NO_THROW(check_parameters(c, p));
  EXPECT_EQ(p.size(), 2 * architecture(c).size());
  ModelConfig other = c;
  other.f_dim = 4;
  EXPECT_THROW(check_parameters(other, p), ConfigError);
}

TEST(Parameters, InitIsSeeded) {
  const ModelConfig c = small_config();
  Rng a(20), b(20), d(21);
  const auto pa = init_parameters<float>(c, a);
  EXPECT_EQ(pa, init_parameters<float>(c, b));
  EXPECT_NE(pa, init_parameters<float>(c, d));
}

TEST(Elbo, PaperConfigForwardBackward) {
  const ModelConfig c = ModelConfig::paper();
  Rng rng(22);
  const auto p = init_parameters<float>(c, rng);
  const auto frames = frames_for<float>(c, 3, rng);
  const auto noise = ElboNoise<float>::draw(c, 1, 3, rng);
  const auto g = gradients(p, [&](Tape<float>& t, const BoundParameters<float>& b) {
    return elbo_on_tape(c, t, b, frames, 1, 3, noise).loss;
  });
  EXPECT_TRUE(std::isfinite(g.loss));
  EXPECT_TRUE(g.grads.same_layout(p));
}

TEST(ImportanceWeighted, SingleSampleIsUnbiasedElbo) {
  // with K = 1 the bound is one draw of the ELBO's log-weight; its mean over
  // many draws should match the mean single-sample ELBO
  Rng rng(23);
  const ModelConfig c = small_config();
  const auto p = init_parameters<double>(c, rng);
  const FrameSet<double> x{frames_for<double>(c, 3, rng), "s", {0, 1, 2}};
  double iw = 0, el = 0;
  const int draws = 400;
  Rng a(1), b(2);
  for (int k = 0; k < draws; ++k) {
    iw += importance_weighted_bound(c, p, x, 1, a) / draws;
    el += elbo(c, p, x, ElboNoise<double>::draw(c, 1, 3, b)).elbo / draws;
  }
  EXPECT_NEAR(iw, el, 0.02 * std::abs(el));
  Rng d(3);
  EXPECT_THROW(importance_weighted_bound(c, p, x, 0, d), PreconditionError);
}

}  // namespace
}  // namespace dsvae
