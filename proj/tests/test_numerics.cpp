// Copyright 2026 The sda2e Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sda2e/numerics.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "sda2e/error.hpp"
#include "sda2e/rng.hpp"

namespace sda2e {
namespace {

std::vector<double> naive_affine(std::span<const double> x, const Matrix& w,
                                 std::span<const double> b) {
  std::vector<double> out(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < w.cols(); ++j) acc += w(i, j) * x[j];
    out[i] = acc + b[i];
  }
  return out;
}

TEST(Sigmoid, ClampedAtBothEnds) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(sigmoid(1000.0), kSigmoidCeil);
  EXPECT_EQ(sigmoid(-1000.0), kSigmoidFloor);
  EXPECT_EQ(activation_derivative(kSigmoidCeil, Activation::kSigmoid), 0.0);
  EXPECT_DOUBLE_EQ(activation_derivative(0.25, Activation::kSigmoid), 0.1875);
}

TEST(Relu, DerivativeIsZeroAtKink) {
  EXPECT_EQ(activation_derivative(0.0, Activation::kRelu), 0.0);
  EXPECT_EQ(activation_derivative(0.3, Activation::kRelu), 1.0);
  auto y = activation(std::vector<double>{-1.0, 0.0, 2.0}, Activation::kRelu);
  EXPECT_EQ(y, (std::vector<double>{0.0, 0.0, 2.0}));
}

TEST(Affine, DenseAndSparseInputsMatchNaiveSum) {
  Rng rng(5);
  for (std::size_t rows : {1u, 3u, 8u, 13u}) {
    for (std::size_t cols : {1u, 2u, 7u, 40u}) {
      Matrix w(rows, cols);
      for (double& v : w.values()) v = rng.uniform(-1, 1);
      std::vector<double> b(rows);
      for (double& v : b) v = rng.uniform(-1, 1);
      for (double density : {0.0, 0.1, 0.5, 1.0}) {
        std::vector<double> x(cols);
        for (double& v : x) v = rng.bernoulli(density) ? rng.uniform(-2, 2) : 0;
        EXPECT_EQ(affine_forward(x, w, b), naive_affine(x, w, b))
            << rows << "x" << cols << " density " << density;
      }
    }
  }
}

TEST(Affine, ShapeMismatchThrows) {
  Matrix w(2, 3);
  std::vector<double> x(2), b(2);
  EXPECT_THROW(affine_forward(x, w, b), DimensionError);
}

TEST(Mse, SquaredDistance) {
  EXPECT_DOUBLE_EQ(mse(std::vector<double>{1, 0, 1},
                       std::vector<double>{0.5, 0.5, 1}),
                   0.5);
}

TEST(DenseLayer, BackwardMatchesFiniteDifference) {
  Rng rng(9);
  for (Activation act : {Activation::kIdentity, Activation::kSigmoid,
                         Activation::kRelu}) {
    DenseLayer layer("l", 5, 4, act);
    layer.initialize(rng);
    std::vector<double> x(5), target(4);
    for (double& v : x) v = rng.uniform(-1, 1);
    for (double& v : target) v = rng.uniform(0, 1);
    auto loss = [&] {
      DenseLayer::Trace t;
      layer.forward(x, t);
      return mse(t.output, target);
    };
    DenseLayer::Trace t;
    layer.forward(x, t);
    std::vector<double> up(4), in_grad(5, 0.0);
    for (std::size_t i = 0; i < 4; ++i) up[i] = 2 * (t.output[i] - target[i]);
    layer.weight().zero_grad();
    layer.bias().zero_grad();
    layer.backward(t, up, in_grad);
    ParamList params{&layer.weight(), &layer.bias()};
    const auto fd = finite_difference_grad(loss, params, 1e-6);
    EXPECT_LT(max_relative_error(layer.weight().grad, fd[0], 1e-8), 1e-5);
    EXPECT_LT(max_relative_error(layer.bias().grad, fd[1], 1e-8), 1e-5);

    // Input gradient by central differences on x.
    for (std::size_t j = 0; j < 5; ++j) {
      const double keep = x[j];
      x[j] = keep + 1e-6;
      const double hi = loss();
      x[j] = keep - 1e-6;
      const double lo = loss();
      x[j] = keep;
      EXPECT_NEAR(in_grad[j], (hi - lo) / 2e-6, 1e-6);
    }
  }
}

TEST(DenseLayer, InitUsesSmallReluBias) {
  Rng rng(1);
  DenseLayer relu("r", 6, 3, Activation::kRelu);
  DenseLayer sig("s", 6, 3, Activation::kSigmoid);
  relu.initialize(rng);
  sig.initialize(rng);
  for (double v : relu.bias().value.values()) EXPECT_EQ(v, 0.01);
  for (double v : sig.bias().value.values()) EXPECT_EQ(v, 0.0);
  const double limit = std::sqrt(6.0 / 9.0);
  for (double v : relu.weight().value.values()) {
    EXPECT_LE(std::abs(v), limit);
  }
}

TEST(DenseLayer, SkippingParamGradsKeepsInputGrad) {
  Rng rng(2);
  DenseLayer layer("l", 6, 3, Activation::kRelu);
  layer.initialize(rng);
  std::vector<double> x{1, 0, 0, 1, 0, 1};
  DenseLayer::Trace t;
  layer.forward(x, t);
  std::vector<double> up{0.3, -0.2, 0.5}, g1(6, 0.0), g2(6, 0.0);
  layer.weight().zero_grad();
  layer.backward(t, up, g1, true);
  const Matrix with = layer.weight().grad;
  layer.weight().zero_grad();
  layer.backward(t, up, g2, false);
  EXPECT_EQ(g1, g2);
  EXPECT_EQ(layer.weight().grad, Matrix(3, 6));
  EXPECT_NE(with, Matrix(3, 6));
}

TEST(Optimizer, SgdStep) {
  ParamTensor p("p", 1, 2);
  p.value(0, 0) = 1.0;
  p.value(0, 1) = -1.0;
  p.grad(0, 0) = 0.5;
  p.grad(0, 1) = -2.0;
  Optimizer opt(OptimizerKind::kSgd, 0.1, {&p});
  opt.step();
  EXPECT_DOUBLE_EQ(p.value(0, 0), 0.95);
  EXPECT_DOUBLE_EQ(p.value(0, 1), -0.8);
}

TEST(Optimizer, AdamMatchesClosedForm) {
  ParamTensor p("p", 1, 1);
  Optimizer opt(OptimizerKind::kAdam, 0.01, {&p});
  double m = 0, v = 0, x = 0;
  const double grads[] = {1.0, -0.5, 0.25, 2.0};
  for (int t = 1; t <= 4; ++t) {
    const double g = grads[t - 1];
    p.grad(0, 0) = g;
    opt.step();
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    x -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(p.value(0, 0), x, 1e-15);
  }
  // First Adam step moves by about lr regardless of gradient scale.
  ParamTensor q("q", 1, 1);
  Optimizer o2(OptimizerKind::kAdam, 0.01, {&q});
  q.grad(0, 0) = 1e6;
  o2.step();
  EXPECT_NEAR(q.value(0, 0), -0.01, 1e-9);
}

TEST(Optimizer, NonFiniteGradientLeavesParamsAlone) {
  ParamTensor p("p", 1, 2);
  p.value(0, 0) = 3.0;
  p.grad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  Optimizer opt(OptimizerKind::kAdam, 0.1, {&p});
  EXPECT_THROW(opt.step(), TrainingError);
  EXPECT_EQ(p.value(0, 0), 3.0);
  EXPECT_EQ(opt.step_count(), 0u);
}

TEST(FiniteDifference, QuadraticIsExactAndRestoresValues) {
  ParamTensor p("p", 2, 2);
  p.value(0, 0) = 1;
  p.value(0, 1) = -2;
  p.value(1, 0) = 0.5;
  p.value(1, 1) = 3;
  const Matrix before = p.value;
  auto loss = [&] {
    double s = 0;
    for (double v : p.value.values()) s += v * v;
    return s;
  };
  const auto fd = finite_difference_grad(loss, {&p}, 1e-3);
  EXPECT_EQ(p.value, before);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(fd[0].values()[i], 2 * before.values()[i], 1e-9);
  }
}

TEST(FiniteDifference, KinkedCoordinatesAreMasked) {
  ParamTensor p("p", 1, 2);
  p.value(0, 0) = 1e-5;  // within eps of |x|'s kink
  p.value(0, 1) = 1.0;
  auto loss = [&] { return std::abs(p.value(0, 0)) + p.value(0, 1); };
  auto same = [&] { return p.value(0, 0) > 0; };
  KinkMask mask;
  const auto fd = finite_difference_grad(loss, {&p}, 1e-4, same, &mask);
  EXPECT_EQ(mask.count, 1u);
  EXPECT_TRUE(mask.kinked[0][0]);
  EXPECT_FALSE(mask.kinked[0][1]);
  EXPECT_EQ(fd[0](0, 0), 0.0);
  EXPECT_NEAR(fd[0](0, 1), 1.0, 1e-9);
}

TEST(MaxRelativeError, UsesFloorAndSkip) {
  Matrix a(1, 3), n(1, 3);
  a(0, 0) = 1.0;
  n(0, 0) = 1.1;
  a(0, 1) = 1e-12;
  n(0, 1) = 2e-12;
  a(0, 2) = 5;
  n(0, 2) = -5;
  const std::vector<char> skip{0, 0, 1};
  EXPECT_NEAR(max_relative_error(a, n, 1e-6, skip), 0.1 / 1.1, 1e-12);
  EXPECT_DOUBLE_EQ(max_relative_error(a, n, 1e-6), 2.0);
}

}  // namespace
}  // namespace sda2e
