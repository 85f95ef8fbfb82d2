// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "wogma/ad/grad_check.hpp"
#include "wogma/ad/ops.hpp"
#include "wogma/ad/random.hpp"
#include "wogma/ad/tape.hpp"
#include "wogma/error.hpp"
#include "test_util.hpp"

namespace wogma::ad {
namespace {

constexpr double kGradTol = 1e-5;
constexpr double kTightTol = 1e-6;

Tensor rand(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  return random_tensor(std::move(s), rng, lo, hi);
}

// Values kept away from the relu kink so central differences do not straddle it.
Tensor rand_off_zero(Shape s, std::uint64_t seed) {
  Tensor t = rand(std::move(s), seed);
  for (double& v : t.values()) v = v >= 0.0 ? v + 0.1 : v - 0.1;
  return t;
}

TEST(Tensor, ShapeMismatchThrows) {
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor::scalar(1.0).reshaped(Shape{2}), DimensionError);
}

TEST(Tensor, MatrixFactoryIsRowMajor) {
  const Tensor m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m.shape(), (Shape{2, 3}));
  EXPECT_EQ(m.at(1, 0), 4.0);
  EXPECT_EQ(m[2], 3.0);
}

TEST(Tape, GradientsAccumulateOverSharedInputs) {
  Tape tape;
  Var x = tape.variable(Tensor::vector({2.0, -3.0}));
  Var y = sum(add(x, x));
  tape.backward(y);
  EXPECT_EQ(tape.grad(x), Tensor::vector({2.0, 2.0}));
}

TEST(Tape, ConstantsReceiveNoGradient) {
  Tape tape;
  Var c = tape.constant(Tensor::vector({1.0}));
  Var x = tape.variable(Tensor::vector({3.0}));
  tape.backward(sum(add(c, x)));
  EXPECT_FALSE(c.requires_grad());
  EXPECT_EQ(tape.grad_target(c), nullptr);
  EXPECT_EQ(tape.grad(x), Tensor::vector({1.0}));
}

TEST(Tape, ParameterGradientGoesToSinkWhenGiven) {
  ParameterStore store;
  Parameter& p = store.add("w", Tensor::vector({1.0, 2.0}));
  GradBuffers sink;
  {
    Tape tape;
    tape.backward(sum(scale(tape.parameter(p), 3.0)), &sink);
  }
  EXPECT_EQ(p.grad, Tensor(Shape{2}));
  EXPECT_EQ(sink.at(&p), Tensor::vector({3.0, 3.0}));
}

TEST(Tape, OneNodePerParameter) {
  ParameterStore store;
  Parameter& p = store.add("w", Tensor::vector({1.0}));
  Tape tape;
  EXPECT_EQ(tape.parameter(p).id(), tape.parameter(p).id());
  EXPECT_THROW(store.add("w", Tensor::vector({0.0})), ConfigError);
}

TEST(Ops, SoftmaxRowsSumToOneAndResistOverflow) {
  Tape tape;
  Var p = softmax(tape.constant(Tensor::matrix({{1000.0, 1000.0}, {-5.0, 5.0}})));
  EXPECT_DOUBLE_EQ(p.value().at(0, 0), 0.5);
  EXPECT_NEAR(p.value().at(1, 0) + p.value().at(1, 1), 1.0, 1e-15);
}

TEST(Ops, AffineShapeErrorNamesBothShapes) {
  Tape tape;
  Var x = tape.constant(Tensor(Shape{2, 3}));
  Var w = tape.constant(Tensor(Shape{4, 5}));
  Var b = tape.constant(Tensor(Shape{5}));
  try {
    affine(x, w, b);
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
  }
}

TEST(Ops, TemporalConvRejectsEvenKernel) {
  Tape tape;
  Var f = tape.constant(Tensor(Shape{5, 2}));
  Var w = tape.constant(Tensor(Shape{2, 2, 2}));
  Var b = tape.constant(Tensor(Shape{2}));
  EXPECT_THROW(temporal_conv1d(f, w, b), ConfigError);
}

TEST(Ops, TemporalConvKeepsLength) {
  Tape tape;
  // Identity kernel centered: output equals input.
  Tensor w(Shape{2, 2, 3});
  w[(0 * 2 + 0) * 3 + 1] = 1.0;
  w[(1 * 2 + 1) * 3 + 1] = 1.0;
  const Tensor f = rand(Shape{6, 2}, 3);
  Var out = temporal_conv1d(tape.constant(f), tape.constant(w), tape.constant(Tensor(Shape{2})));
  EXPECT_EQ(out.value(), f);
}

TEST(Ops, TopKCountFormula) {
  for (std::size_t len = 1; len <= 50; ++len) {
    for (std::size_t kappa = 1; kappa <= 10; ++kappa) {
      EXPECT_EQ(topk_count(len, kappa), std::max<std::size_t>(1, len / kappa));
    }
  }
  EXPECT_THROW(topk_count(5, 0), ConfigError);
}

TEST(Ops, TopKIndicesPreferLowerIndexOnTies) {
  const std::vector<double> v = {0.5, 0.9, 0.5, 0.9, 0.1};
  EXPECT_EQ(topk_indices(v, 3), (std::vector<std::size_t>{1, 3, 0}));
}

TEST(Ops, BinaryCrossEntropyHalfIsLn2) {
  Tape tape;
  const std::vector<double> y1 = {1.0}, y0 = {0.0};
  EXPECT_NEAR(binary_cross_entropy(tape.constant(Tensor::vector({0.5})), y1).value()[0], std::log(2.0), 1e-15);
  EXPECT_NEAR(binary_cross_entropy(tape.constant(Tensor::vector({0.5})), y0).value()[0], std::log(2.0), 1e-15);
}

TEST(Ops, BinaryCrossEntropyClampsAtZero) {
  Tape tape;
  const std::vector<double> y = {1.0};
  const double v = binary_cross_entropy(tape.constant(Tensor::vector({0.0})), y).value()[0];
  EXPECT_NEAR(v, -std::log(kProbClamp), 1e-12);
}

TEST(Ops, CollapseTiledEqualsCollapseOfTiledInput) {
  Tape tape;
  Var y = tape.variable(rand(Shape{3, 4, 5}, 11));
  Var w = tape.variable(rand(Shape{6, 7, 5}, 12));
  const Tensor a = collapse_tiled(y, w).value();
  const Tensor b = collapse_time(tile_window(y, 7), w).value();
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Ops, CollapseTimeUniformDiagonalAverages) {
  const std::size_t tau = 4, c = 3;
  Tensor w(Shape{c, tau, c});
  for (std::size_t o = 0; o < c; ++o)
    for (std::size_t t = 0; t < tau; ++t) w[(o * tau + t) * c + o] = 1.0 / static_cast<double>(tau);
  const Tensor x = rand(Shape{2, tau, 5, c}, 9);
  Tape tape;
  const Tensor out = collapse_time(tape.constant(x), tape.constant(w)).value();
  const Tensor mean = window_mean(tape.constant(x)).value();
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], mean[i], 1e-15);
}

TEST(Ops, AffineExamples) {
  Tape tape;
  const Tensor a = affine(tape.constant(Tensor::matrix({{1, 2}})), tape.constant(Tensor::matrix({{1, 0}, {0, 1}})),
                          tape.constant(Tensor::vector({0, 0})))
                       .value();
  EXPECT_EQ(a, Tensor::matrix({{1, 2}}));
  const Tensor b = affine(tape.constant(Tensor::matrix({{1, 1}})), tape.constant(Tensor::matrix({{2}, {3}})),
                          tape.constant(Tensor::vector({1})))
                       .value();
  EXPECT_EQ(b, Tensor::matrix({{6}}));
}

TEST(Ops, ActivationExamples) {
  Tape tape;
  EXPECT_EQ(relu(tape.constant(Tensor::vector({-1, 0, 2}))).value(), Tensor::vector({0, 0, 2}));
  EXPECT_EQ(softmax(tape.constant(Tensor::vector({0, 0}))).value(), Tensor::vector({0.5, 0.5}));
  EXPECT_EQ(sigmoid(tape.constant(Tensor::vector({0}))).value(), Tensor::vector({0.5}));
  EXPECT_EQ(activation(tape.constant(Tensor::vector({-3})), Activation::relu).value(), Tensor::vector({0}));
}

TEST(Ops, ReluSubgradientAtZeroIsZero) {
  Tape tape;
  Var x = tape.variable(Tensor::vector({0.0, 1.0}));
  tape.backward(sum(relu(x)));
  EXPECT_EQ(tape.grad(x), Tensor::vector({0.0, 1.0}));
}

TEST(Ops, TemporalConvExamples) {
  Tape tape;
  const Tensor f = Tensor::matrix({{1}, {2}, {3}});
  const Tensor id = temporal_conv1d(tape.constant(f), tape.constant(Tensor(Shape{1, 1, 1}, 1.0)),
                                    tape.constant(Tensor(Shape{1})))
                        .value();
  EXPECT_EQ(id, f);
  const Tensor ones = temporal_conv1d(tape.constant(Tensor::matrix({{1}, {1}, {1}})),
                                      tape.constant(Tensor(Shape{1, 1, 3}, 1.0)), tape.constant(Tensor(Shape{1})))
                          .value();
  EXPECT_EQ(ones, Tensor::matrix({{2}, {3}, {2}}));
}

TEST(Ops, LstmZeroWeightsGiveZeroState) {
  Tape tape;
  const std::size_t h = 4, f = 3;
  const LstmWeights w{tape.constant(Tensor(Shape{f, 4 * h})), tape.constant(Tensor(Shape{h, 4 * h})),
                      tape.constant(Tensor(Shape{4 * h}))};
  const LstmState s = lstm_cell(tape.constant(Tensor(Shape{h})), tape.constant(Tensor(Shape{h})),
                                tape.constant(rand(Shape{f}, 30)), w);
  EXPECT_EQ(s.h.value(), Tensor(Shape{h}));
  EXPECT_EQ(s.c.value(), Tensor(Shape{h}));
}

TEST(Ops, LstmHiddenStaysInOpenUnitInterval) {
  Tape tape;
  const std::size_t h = 8, f = 6;
  const LstmWeights w{tape.constant(rand(Shape{f, 4 * h}, 31, -3, 3)), tape.constant(rand(Shape{h, 4 * h}, 32, -3, 3)),
                      tape.constant(rand(Shape{4 * h}, 33, -3, 3))};
  LstmState s{tape.constant(Tensor(Shape{h})), tape.constant(Tensor(Shape{h}))};
  for (int step = 0; step < 20; ++step) {
    s = lstm_cell(s.h, s.c, tape.constant(rand(Shape{f}, 40 + step, -5, 5)), w);
    for (double v : s.h.value().values()) EXPECT_LT(std::abs(v), 1.0);
  }
}

TEST(Ops, ForwardIsBitwiseDeterministic) {
  const Tensor x = rand(Shape{4, 5}, 50), w = rand(Shape{5, 3}, 51);
  Tape a, b;
  EXPECT_EQ(softmax(matmul(a.constant(x), a.constant(w))).value(),
            softmax(matmul(b.constant(x), b.constant(w))).value());
}

TEST(Tape, FanOutAccumulatesExactly) {
  const Tensor x0 = rand(Shape{3}, 52);
  Tape tape;
  Var x = tape.variable(x0);
  tape.backward(add(sum(sigmoid(x)), sum(scale(x, 2.0))));
  Tape tf, tg;
  Var xf = tf.variable(x0), xg = tg.variable(x0);
  tf.backward(sum(sigmoid(xf)));
  tg.backward(sum(scale(xg, 2.0)));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(tape.grad(x)[i], tf.grad(xf)[i] + tg.grad(xg)[i]);
}

// Gradient checks of each primitive against central differences.

TEST(GradCheck, Matmul) {
  const auto op = [](Tape&, std::span<const Var> v) { return matmul(v[0], v[1]); };
  EXPECT_LT(grad_check_op(op, {rand(Shape{3, 4}, 1), rand(Shape{4, 2}, 2)}), kTightTol);
}

TEST(GradCheck, Affine) {
  const auto op = [](Tape&, std::span<const Var> v) { return affine(v[0], v[1], v[2]); };
  EXPECT_LT(grad_check_op(op, {rand(Shape{3, 4}, 1), rand(Shape{4, 2}, 2), rand(Shape{2}, 3)}), kTightTol);
}

TEST(GradCheck, Relu) {
  const auto op = [](Tape&, std::span<const Var> v) { return relu(v[0]); };
  EXPECT_LT(grad_check_op(op, {rand_off_zero(Shape{3, 4}, 4)}), kGradTol);
}

TEST(GradCheck, Sigmoid) {
  const auto op = [](Tape&, std::span<const Var> v) { return sigmoid(v[0]); };
  EXPECT_LT(grad_check_op(op, {rand(Shape{3, 4}, 5, -3, 3)}), kGradTol);
}

TEST(GradCheck, Softmax) {
  const auto op = [](Tape&, std::span<const Var> v) { return softmax(v[0]); };
  EXPECT_LT(grad_check_op(op, {rand(Shape{3, 4}, 6, -2, 2)}), kGradTol);
}

TEST(GradCheck, AddScaleSum) {
  const auto op = [](Tape&, std::span<const Var> v) { return sum(scale(add(v[0], v[1]), -1.5)); };
  EXPECT_LT(grad_check_op(op, {rand(Shape{2, 3}, 7), rand(Shape{2, 3}, 8)}), kGradTol);
}

TEST(GradCheck, RowColumnSliceStack) {
  const auto op = [](Tape&, std::span<const Var> v) {
    const std::vector<Var> rows = {column(v[0], 1), slice(row(v[0], 2), 0, 3), row(v[0], 0)};
    return stack_rows(rows);
  };
  EXPECT_LT(grad_check_op(op, {rand(Shape{3, 3}, 9)}), kGradTol);
}

TEST(GradCheck, TemporalConv) {
  const auto op = [](Tape&, std::span<const Var> v) { return temporal_conv1d(v[0], v[1], v[2]); };
  EXPECT_LT(grad_check_op(op, {rand(Shape{7, 3}, 10), rand(Shape{2, 3, 3}, 11), rand(Shape{2}, 12)}), kTightTol);
}

TEST(GradCheck, LstmCell) {
  const auto op = [](Tape&, std::span<const Var> v) {
    const LstmState s = lstm_cell(v[0], v[1], v[2], LstmWeights{v[3], v[4], v[5]});
    const std::vector<Var> parts = {s.h, s.c};
    return stack_rows(parts);
  };
  const std::size_t h = 8, f = 5;
  EXPECT_LT(grad_check_op(op, {rand(Shape{h}, 13), rand(Shape{h}, 14), rand(Shape{f}, 15), rand(Shape{f, 4 * h}, 16),
                               rand(Shape{h, 4 * h}, 17), rand(Shape{4 * h}, 18)}),
            kGradTol);
}

TEST(GradCheck, TopKMean) {
  const auto op = [](Tape&, std::span<const Var> v) { return topk_mean(v[0], 2); };
  // Distinct values so the selected set is stable under the probe step.
  EXPECT_LT(grad_check_op(op, {Tensor::matrix({{0.1, 0.9}, {0.7, 0.2}, {0.4, 0.5}, {0.8, 0.3}, {0.3, 0.6}})}),
            kGradTol);
}

TEST(GradCheck, BinaryCrossEntropy) {
  const std::vector<double> y = {1.0, 0.0};
  const auto fn = [&](Tape&, std::span<const Var> v) { return binary_cross_entropy(v[0], y); };
  EXPECT_LT(grad_check(fn, {Tensor::vector({0.3, 0.6})}), kGradTol);
}

TEST(GradCheck, CrossEntropy) {
  const std::vector<int> labels = {0, 1, 1};
  const auto fn = [&](Tape&, std::span<const Var> v) { return cross_entropy(softmax(v[0]), labels); };
  EXPECT_LT(grad_check(fn, {rand(Shape{3, 2}, 19)}), kTightTol);
}

TEST(GradCheck, WindowMeanTileBlockMatmul) {
  const Tensor a = rand(Shape{3, 3}, 20);
  const auto op = [&](Tape&, std::span<const Var> v) { return tile_window(block_matmul(a, window_mean(v[0])), 2); };
  EXPECT_LT(grad_check_op(op, {rand(Shape{2, 4, 3, 2}, 21)}), kGradTol);
}

TEST(GradCheck, CollapseTime) {
  const auto op = [](Tape&, std::span<const Var> v) { return collapse_time(v[0], v[1]); };
  EXPECT_LT(grad_check_op(op, {rand(Shape{2, 3, 4, 2}, 22), rand(Shape{3, 3, 2}, 23)}), 1e-6);
}

TEST(GradCheck, CollapseTiled) {
  const auto op = [](Tape&, std::span<const Var> v) { return collapse_tiled(v[0], v[1]); };
  EXPECT_LT(grad_check_op(op, {rand(Shape{2, 4, 2}, 24), rand(Shape{3, 5, 2}, 25)}), 1e-6);
}

TEST(GradCheck, Reshape) {
  const auto op = [](Tape&, std::span<const Var> v) { return reshape(v[0], Shape{3, 2}); };
  EXPECT_LT(grad_check_op(op, {rand(Shape{2, 3}, 26)}), kGradTol);
}

TEST(GradCheck, RelativeErrorUsesFloor) {
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(relative_error(1e-9, 0.0), 1e-9 / 1e-8);
}

TEST(GradCheck, ResolutionDiscountsOnlyRoundingNoise) {
  EXPECT_EQ(relative_error(5e-9, 4.8e-9, 1e-9), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0, 0.25), 0.75);
  // Four ulps of a loss near 2 spread over a step of 2e-6.
  EXPECT_DOUBLE_EQ(difference_resolution(2.0, -1.0, 1e-6), 4.0 * std::numeric_limits<double>::epsilon() / 1e-6);
}

TEST(GradCheck, DetectsASlightlyWrongBackward) {
  // Backward of x -> 3x that reports 3.003; the check must see the 1e-3 error.
  const auto bad = [](Tape& tape, std::span<const Var> v) {
    const std::size_t xid = v[0].id();
    Var y = tape.record(scale(v[0], 3.0).value(), true, [xid](Tape& t, std::size_t self) {
      const Tensor& g = t.grad(self);
      Tensor* gx = t.grad_target(xid);
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += 3.003 * g[i];
    });
    return sum(y);
  };
  EXPECT_NEAR(grad_check(bad, {rand(Shape{4}, 27)}), 1e-3, 1e-6);
}

TEST(Rng, SeededStreamsRepeat) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.uniform(), b.uniform());
  Rng c(5);
  for (int i = 0; i < 1000; ++i) {
    const auto k = c.integer(-2, 3);
    EXPECT_GE(k, -2);
    EXPECT_LE(k, 3);
  }
}

TEST(Rng, UniformInitBound) {
  Rng rng(1);
  const Tensor t = uniform_init(Shape{50, 4}, 16, rng);
  for (double v : t.values()) EXPECT_LE(std::abs(v), 0.25);
}

}  // namespace
}  // namespace wogma::ad
