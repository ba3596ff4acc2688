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

#include <cmath>

#include "dsvae/adam.hpp"
#include "dsvae/autodiff.hpp"
#include "dsvae/layers.hpp"
#include "test_support.hpp"

namespace dsvae {
namespace {

using testing::random_tensor;

TEST(Conv2d, PaperFirstLayerShape) {
  const LayerSpec spec = LayerSpec::conv(4, 256, 2, 1, Activation::leaky_relu);
  Rng rng(1);
  const auto x = random_tensor<float>({64, 64, 3}, rng, 0, 1);
  const auto y = conv2d_forward(x, spec, Tensor<float>({4, 4, 3, 256}), Tensor<float>({256}));
  EXPECT_EQ(y.dims(), (Shape{32, 32, 256}));
}

TEST(Conv2d, IdentityKernel) {
  const LayerSpec spec = LayerSpec::conv(1, 1, 1, 0, Activation::none);
  const auto x = Tensor<double>({1, 1, 1}, {0.37});
  const auto y = conv2d_forward(x, spec, Tensor<double>({1, 1, 1, 1}, 1.0), Tensor<double>({1}));
  EXPECT_EQ(y, x);
}

TEST(Conv2d, ThreeByThreeKeepsSize) {
  const LayerSpec spec = LayerSpec::conv(3, 512, 1, 1, Activation::relu);
  const auto y = conv2d_forward(Tensor<float>({4, 4, 512}), spec, Tensor<float>({3, 3, 512, 512}), Tensor<float>({512}));
  EXPECT_EQ(y.dims(), (Shape{4, 4, 512}));
}

TEST(Conv2d, ChannelMismatchIsConfigError) {
  const LayerSpec spec = LayerSpec::conv(3, 4, 1, 1, Activation::none);
  EXPECT_THROW(conv2d_forward(Tensor<float>({4, 4, 2}), spec, Tensor<float>({3, 3, 3, 4}), Tensor<float>({4})),
               ConfigError);
}

TEST(Conv2d, KernelLargerThanPaddedInput) {
  const LayerSpec spec = LayerSpec::conv(4, 1, 2, 1, Activation::none);
  EXPECT_THROW(conv2d_forward(Tensor<float>({1, 1, 1}), spec, Tensor<float>({4, 4, 1, 1}), Tensor<float>({1})),
               ConfigError);
}

TEST(Conv2d, HandComputedCrossCorrelation) {
  // 3x3 single channel, 2x2 kernel, stride 1, no padding.
  const auto x = Tensor<double>({3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto w = Tensor<double>({2, 2, 1, 1}, {1, 0, 0, -1});
  const auto y = conv2d_forward(x, LayerSpec::conv(2, 1, 1, 0, Activation::none), w, Tensor<double>({1}, 0.5));
  EXPECT_EQ(y, Tensor<double>({2, 2, 1}, {1 - 5 + 0.5, 2 - 6 + 0.5, 4 - 8 + 0.5, 5 - 9 + 0.5}));
}

TEST(Deconv2d, DoublesSpatialSize) {
  const LayerSpec spec = LayerSpec::deconv(4, 256, 2, 1, Activation::leaky_relu);
  const auto y = deconv2d_forward(Tensor<float>({4, 4, 32}), spec, Tensor<float>({4, 4, 256, 32}), Tensor<float>({256}));
  EXPECT_EQ(y.dims(), (Shape{8, 8, 256}));
}

TEST(Deconv2d, FinalLayerThreeFilters) {
  const LayerSpec spec = LayerSpec::deconv(4, 3, 2, 1, Activation::none);
  const auto y = deconv2d_forward(Tensor<float>({8, 8, 256}), spec, Tensor<float>({4, 4, 3, 256}), Tensor<float>({3}));
  EXPECT_EQ(y.dims(), (Shape{16, 16, 3}));
}

TEST(Deconv2d, ChannelMismatchIsConfigError) {
  const LayerSpec spec = LayerSpec::deconv(4, 3, 2, 1, Activation::none);
  EXPECT_THROW(deconv2d_forward(Tensor<float>({8, 8, 5}), spec, Tensor<float>({4, 4, 3, 4}), Tensor<float>({3})),
               ConfigError);
}

class Adjoint : public ::testing::TestWithParam<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> {};

TEST_P(Adjoint, ConvAndDeconvAreTransposes) {
  const auto [size, kernel, stride, padding] = GetParam();
  Rng rng(size * 31 + kernel);
  const std::size_t cin = 3, cout = 5;
  const LayerSpec conv = LayerSpec::conv(kernel, cout, stride, padding, Activation::none);
  const LayerSpec deconv = LayerSpec::deconv(kernel, cin, stride, padding, Activation::none);
  const auto x = random_tensor<double>({2, size, size, cin}, rng);
  const auto w = random_tensor<double>({kernel, kernel, cin, cout}, rng);
  const auto cx = conv2d_forward(x, conv, w, Tensor<double>({cout}));
  const auto y = random_tensor<double>(cx.dims(), rng);
  const auto dy = deconv2d_forward(y, deconv, w, Tensor<double>({cin}));
  ASSERT_EQ(dy.dims(), x.dims());
  const double lhs = dot(cx, y), rhs = dot(x, dy);
  EXPECT_LE(std::abs(lhs - rhs), 1e-5 * std::max(std::abs(lhs), 1.0));
}

INSTANTIATE_TEST_SUITE_P(Geometries, Adjoint,
                         ::testing::Values(std::make_tuple(8, 4, 2, 1), std::make_tuple(16, 4, 2, 1),
                                           std::make_tuple(4, 3, 1, 1), std::make_tuple(7, 3, 2, 0),
                                           std::make_tuple(5, 1, 1, 0)));

TEST(Dense, ZeroWeightsGiveActivatedBias) {
  const auto b = Tensor<double>::vector({-1.0, 2.0});
  const auto y = dense_forward(Tensor<double>::vector({3, 4, 5}), Tensor<double>({3, 2}), b, Activation::relu);
  EXPECT_EQ(y, Tensor<double>::vector({0.0, 2.0}));
}

TEST(Dense, IdentityWeights) {
  Tensor<double> eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1;
  const auto x = Tensor<double>::vector({0.5, -2, 7});
  EXPECT_EQ(dense_forward(x, eye, Tensor<double>({3})), x);
}

TEST(Dense, OnesWeightsRelu) {
  const auto y = dense_forward(Tensor<double>::vector({1, 2, 3}), Tensor<double>({3, 4}, 1.0), Tensor<double>({4}),
                               Activation::relu);
  EXPECT_EQ(y, Tensor<double>({4}, 6.0));
}

TEST(Dense, ShapeMismatch) {
  EXPECT_THROW(dense_forward(Tensor<double>({4}), Tensor<double>({3, 2}), Tensor<double>({2})), ConfigError);
}

TEST(LeakyRelu, Values) {
  const auto y = leaky_relu(Tensor<double>::vector({2, -1, 0}), 0.2);
  EXPECT_DOUBLE_EQ(y[0], 2);
  EXPECT_DOUBLE_EQ(y[1], -0.2);
  EXPECT_DOUBLE_EQ(y[2], 0);
  EXPECT_THROW(leaky_relu(y, 1.5), ConfigError);
}

TEST(ShapeAlgebra, FourConvsThenFourDeconvs) {
  std::size_t s = 64;
  const LayerSpec conv = LayerSpec::conv(4, 256, 2, 1, Activation::leaky_relu);
  const LayerSpec deconv = LayerSpec::deconv(4, 256, 2, 1, Activation::leaky_relu);
  std::vector<std::size_t> sizes;
  for (int i = 0; i < 4; ++i) sizes.push_back(s = conv_out_extent(s, conv));
  EXPECT_EQ(sizes, (std::vector<std::size_t>{32, 16, 8, 4}));
  for (int i = 0; i < 4; ++i) s = deconv_out_extent(s, deconv);
  EXPECT_EQ(s, 64u);
}

// Weighted sum of a layer's output, for gradient checks.
template <typename Build>
auto projected_loss(Build build, const Tensor<double>& weights_out) {
  return [=](Tape<double>& t, const BoundParameters<double>& p) {
    Var y = build(t, p);
    Var c = t.constant(weights_out, "proj");
    return ops::sum(t, ops::mul(t, y, c, "yc"), 1.0, "loss");
  };
}

TEST(Gradients, ConvDeconvDenseLeakyMatchFiniteDifferences) {
  Rng rng(7);
  ParameterSet<double> p;
  p.add("x", random_tensor<double>({2, 6, 6, 2}, rng));
  p.add("cw", random_tensor<double>({4, 4, 2, 3}, rng));
  p.add("cb", random_tensor<double>({3}, rng));
  p.add("dw", random_tensor<double>({4, 4, 2, 3}, rng));
  p.add("db", random_tensor<double>({2}, rng));
  p.add("w", random_tensor<double>({72, 5}, rng));
  p.add("b", random_tensor<double>({5}, rng));
  const LayerSpec conv = LayerSpec::conv(4, 3, 2, 1, Activation::none);
  const LayerSpec deconv = LayerSpec::deconv(4, 2, 2, 1, Activation::none);
  auto build = [=](Tape<double>& t, const BoundParameters<double>& b) {
    Var h = ops::conv2d(t, b["x"], b["cw"], b["cb"], conv, "conv");
    h = ops::leaky_relu(t, h, 0.2, "lrelu");
    h = ops::deconv2d(t, h, b["dw"], b["db"], deconv, "deconv");
    h = ops::reshape(t, h, {2, 72}, "flat");
    return ops::dense(t, h, b["w"], b["b"], "dense");
  };
  const auto proj = random_tensor<double>({2, 5}, rng);
  const auto rep = testing::finite_difference_check(p, projected_loss(build, proj));
  EXPECT_LT(rep.max_rel_error, 1e-6) << rep.worst;
}

TEST(Gradients, StructuralOpsMatchFiniteDifferences) {
  Rng rng(11);
  ParameterSet<double> p;
  p.add("a", random_tensor<double>({6, 2, 2, 3}, rng));
  p.add("b", random_tensor<double>({3, 2, 2, 1}, rng));
  auto build = [](Tape<double>& t, const BoundParameters<double>& bp) {
    Var g = ops::gather_rows(t, bp["a"], {0, 2, 1, 1, 5, 4}, "gather");
    Var gc = ops::group_concat_last(t, g, 2, "gcat");        // [3,2,2,6]
    Var cat = ops::concat_last(t, gc, bp["b"], "cat");        // [3,2,2,7]
    Var s = ops::slice_last(t, cat, 2, 4, "slice");           // [3,2,2,4]
    Var m = ops::group_mean(t, ops::relu(t, g, "r"), 3, "gmean");  // [2,2,2,3]
    Var sm = ops::sum(t, m, 0.5, "sm");
    Var ss = ops::sum(t, s, 1.0, "ss");
    return ops::axpby(t, 2.0, ss, -3.0, sm, "combo");
  };
  const auto rep = testing::finite_difference_check(p, build);
  EXPECT_LT(rep.max_rel_error, 1e-6) << rep.worst;
}

TEST(Gradients, SumGivesOnes) {
  ParameterSet<double> p;
  p.add("w", Tensor<double>::vector({1, -2, 3}));
  const auto g = gradients(p, [](Tape<double>& t, const BoundParameters<double>& b) {
    return ops::sum(t, b["w"], 1.0, "loss");
  });
  EXPECT_EQ(g.grads["w"], Tensor<double>({3}, 1.0));
}

TEST(Gradients, HalfSquaredNormGivesW) {
  ParameterSet<double> p;
  p.add("w", Tensor<double>::vector({1, -2, 3}));
  const auto g = gradients(p, [](Tape<double>& t, const BoundParameters<double>& b) {
    return ops::sum(t, ops::mul(t, b["w"], b["w"], "sq"), 0.5, "loss");
  });
  EXPECT_EQ(g.grads["w"], p["w"]);
  EXPECT_DOUBLE_EQ(g.loss, 7.0);
}

TEST(Gradients, NonFiniteIntermediateNamesTensor) {
  ParameterSet<double> p;
  p.add("w", Tensor<double>::vector({1e300}));
  try {
    gradients(p, [](Tape<double>& t, const BoundParameters<double>& b) {
      return ops::sum(t, ops::mul(t, b["w"], b["w"], "overflowing_square"), 1.0, "loss");
    });
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.tensor(), "overflowing_square");
  }
}

TEST(Gradients, Deterministic) {
  Rng rng(3);
  ParameterSet<float> p;
  p.add("x", random_tensor<float>({3, 8, 8, 2}, rng));
  p.add("w", random_tensor<float>({4, 4, 2, 4}, rng));
  p.add("b", random_tensor<float>({4}, rng));
  auto loss = [](Tape<float>& t, const BoundParameters<float>& b) {
    Var y = ops::conv2d(t, b["x"], b["w"], b["b"], LayerSpec::conv(4, 4, 2, 1, Activation::none), "c");
    return ops::sum(t, ops::mul(t, y, y, "sq"), 1.0f, "loss");
  };
  const auto a = gradients(p, loss), c = gradients(p, loss);
  EXPECT_EQ(a.grads, c.grads);
  EXPECT_EQ(a.loss, c.loss);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ParameterSet<double> p;
  p.add("w", Tensor<double>::vector({0.3, -0.7}));
  const auto before = p;
  auto s = AdamState<double>::for_parameters(p);
  adam_step(p, p.zeros_like(), s, 1e-4);
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterSet<double> p;
  p.add("w", Tensor<double>::vector({1.0}));
  ParameterSet<double> g;
  g.add("w", Tensor<double>::vector({0.5}));
  auto s = AdamState<double>::for_parameters(p);
  adam_step(p, g, s, 1e-4);
  // bias-corrected moments equal g and g^2 exactly after one step
  EXPECT_NEAR(p["w"][0] - 1.0, -1e-4 * 0.5 / (0.5 + 1e-8), 1e-15);
}

TEST(Adam, RepeatedGradientGivesSimilarStep) {
  ParameterSet<double> p;
  p.add("w", Tensor<double>::vector({1.0}));
  ParameterSet<double> g;
  g.add("w", Tensor<double>::vector({0.5}));
  auto s = AdamState<double>::for_parameters(p);
  adam_step(p, g, s, 1e-4);
  const double first = 1.0 - p["w"][0];
  const double mid = p["w"][0];
  adam_step(p, g, s, 1e-4);
  const double second = mid - p["w"][0];
  EXPECT_EQ(s.step, 2u);
  EXPECT_NEAR(second / first, 1.0, 0.05);
}

TEST(Adam, RejectsNonFiniteGradient) {
  ParameterSet<double> p;
  p.add("w", Tensor<double>::vector({1.0}));
  ParameterSet<double> g;
  g.add("w", Tensor<double>::vector({std::nan("")}));
  auto s = AdamState<double>::for_parameters(p);
  EXPECT_THROW(adam_step(p, g, s, 1e-4), NumericalError);
  EXPECT_EQ(s.step, 0u);
}

TEST(Adam, LayoutMismatch) {
  ParameterSet<double> p;
  p.add("w", Tensor<double>::vector({1.0}));
  ParameterSet<double> g;
  g.add("v", Tensor<double>::vector({1.0}));
  auto s = AdamState<double>::for_parameters(p);
  EXPECT_THROW(adam_step(p, g, s, 1e-4), ConfigError);
}

TEST(Tensor, InvariantsEnforced) {
  EXPECT_THROW(Tensor<float>({2, 0}), ConfigError);
  EXPECT_THROW(Tensor<float>({2, 2}, std::vector<float>(3)), ConfigError);
  EXPECT_THROW(Tensor<float>({2, 2}).reshaped({3}), ConfigError);
}

}  // namespace
}  // namespace dsvae
