// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "test_util.hpp"
#include "wogma/ad/grad_check.hpp"
#include "wogma/ad/ops.hpp"
#include "wogma/ad/random.hpp"
#include "wogma/error.hpp"
#include "wogma/model/model.hpp"

namespace wogma::model {
namespace {

using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

const double kLn2 = std::numbers::ln2;

graph::SkeletonGraph path3() {
  const std::vector<graph::Edge> e = {{1, 2}, {2, 3}};
  return graph::build_spatial_graph(e, 3);
}

// Small configuration on the three-joint path used across these tests.
ModelConfig tiny_config() {
  ModelConfig c;
  c.joints = 3;
  c.channels = 2;
  c.tau = 4;
  c.stride = 4;
  c.scales = 2;
  c.g3d_channels = 4;
  c.feature_dim = 8;
  c.hidden = 8;
  return c;
}

Tensor random_frames(std::size_t frames, std::size_t joints, std::size_t channels, std::uint64_t seed) {
  ad::Rng rng(seed);
  return ad::random_tensor(Shape{frames, joints, channels}, rng);
}

Tensor row_of(const Tensor& t, std::size_t i) {
  const std::size_t w = t.size() / t.dim(0);
  Tensor r(Shape{w});
  std::copy_n(t.data() + i * w, w, r.data());
  return r;
}

std::vector<Var> theta_vars(Tape& tape, const std::vector<Tensor>& theta) {
  std::vector<Var> vars;
  for (const Tensor& t : theta) vars.push_back(tape.constant(t));
  return vars;
}

// ---------------------------------------------------------------- windowing

TEST(SplitClips, PartitionOfFortyFrames) {
  const Tensor frames = random_frames(40, 3, 2, 1);
  const Tensor clips = split_clips(frames, ClipWindowing{20, 20});
  ASSERT_EQ(clips.shape(), (Shape{2, 20, 3, 2}));
  EXPECT_TRUE(std::equal(frames.data(), frames.data() + frames.size(), clips.data()));
  const ClipWindowing w{20, 20};
  EXPECT_EQ(w.start_frame(0), 1u);
  EXPECT_EQ(w.end_frame(0), 20u);
  EXPECT_EQ(w.start_frame(1), 21u);
  EXPECT_EQ(w.end_frame(1), 40u);
}

TEST(SplitClips, CountsFollowTheFloorFormula) {
  const ClipWindowing w{20, 20};
  EXPECT_EQ(w.clip_count(6000), 300u);
  EXPECT_EQ(w.clip_count(25), 1u);
  EXPECT_EQ(split_clips(random_frames(25, 2, 3, 2), w).dim(0), 1u);
  EXPECT_THROW(w.clip_count(19), DataError);
  for (std::size_t tau = 1; tau <= 6; ++tau)
    for (std::size_t s = 1; s <= 6; ++s)
      for (std::size_t t = tau; t < 40; ++t) {
        const ClipWindowing ws{tau, s};
        const std::size_t len = ws.clip_count(t);
        EXPECT_LE(ws.end_frame(len - 1), t);
        EXPECT_GT(ws.end_frame(len - 1) + s, t);
      }
}

TEST(SplitClips, OverlappingStride) {
  const Tensor frames = random_frames(10, 1, 1, 3);
  const Tensor clips = split_clips(frames, ClipWindowing{4, 2});
  ASSERT_EQ(clips.dim(0), 4u);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(clips.data()[i * 4 + t], frames.data()[i * 2 + t]);
}

// ---------------------------------------------------------------- G3D

TEST(G3d, IdentityGraphAndWeightsIsRelu) {
  const auto g = graph::build_spatial_graph(std::vector<graph::Edge>{}, 1);
  const auto adj = graph::build_multiscale(g, 0, 1);
  Tape tape;
  const Var x = tape.constant(Tensor(Shape{1, 1, 1, 2}, std::vector<double>{1.5, -2.0}));
  const std::vector<Var> theta = {tape.constant(Tensor::matrix({{1, 0}, {0, 1}}))};
  EXPECT_EQ(g3d_conv(x, adj, theta).value(), Tensor(Shape{1, 1, 1, 2}, std::vector<double>{1.5, 0.0}));
}

TEST(G3d, ZeroInputGivesZeroOutput) {
  ad::Rng rng(4);
  const auto adj = graph::build_multiscale(path3(), 2, 4);
  std::vector<Tensor> theta;
  for (int m = 0; m < 3; ++m) theta.push_back(ad::random_tensor(Shape{2, 5}, rng));
  Tape tape;
  const Var out = g3d_conv(tape.constant(Tensor(Shape{3, 4, 3, 2})), adj, theta_vars(tape, theta));
  EXPECT_EQ(out.value(), Tensor(Shape{3, 4, 3, 5}));
}

TEST(G3d, FactoredEqualsDenseTiledMatrices) {
  ad::Rng rng(5);
  for (std::size_t tau : {1u, 3u, 4u}) {
    const auto adj = graph::build_multiscale(path3(), 2, tau);
    std::vector<Tensor> theta;
    for (int m = 0; m < 3; ++m) theta.push_back(ad::random_tensor(Shape{2, 4}, rng));
    const Tensor clips = ad::random_tensor(Shape{5, tau, 3, 2}, rng);
    Tape tape;
    const auto th = theta_vars(tape, theta);
    const Var fast = g3d_conv(tape.constant(clips), adj, th);
    const Var dense = g3d_conv_dense(tape.constant(clips), adj, th);
    EXPECT_TRUE(test::tensors_near(fast.value(), dense.value(), 1e-12)) << "tau " << tau;
  }
}

TEST(G3d, DefaultSkeletonFactoredEqualsDense) {
  ad::Rng rng(6);
  const auto adj = graph::build_multiscale(graph::default_skeleton(), 3, 5);
  std::vector<Tensor> theta;
  for (int m = 0; m < 4; ++m) theta.push_back(ad::random_tensor(Shape{3, 6}, rng));
  const Tensor clips = ad::random_tensor(Shape{2, 5, 18, 3}, rng);
  Tape tape;
  const auto th = theta_vars(tape, theta);
  const Tensor fast = g3d_conv(tape.constant(clips), adj, th).value();
  const Tensor dense = g3d_conv_dense(tape.constant(clips), adj, th).value();
  EXPECT_TRUE(test::tensors_near(fast, dense, 1e-12));
}

TEST(G3d, AutomorphismPermutesOutputJoints) {
  // Swapping the two ends of the path is a graph automorphism.
  ad::Rng rng(8);
  const auto adj = graph::build_multiscale(path3(), 2, 3);
  std::vector<Tensor> theta;
  for (int m = 0; m < 3; ++m) theta.push_back(ad::random_tensor(Shape{2, 3}, rng));
  const Tensor clips = ad::random_tensor(Shape{2, 3, 3, 2}, rng);
  Tensor swapped = clips;
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t c = 0; c < 2; ++c) std::swap(swapped.at(l, t, 0, c), swapped.at(l, t, 2, c));
  Tape tape;
  const auto th = theta_vars(tape, theta);
  const Tensor a = g3d_conv(tape.constant(clips), adj, th).value();
  const Tensor b = g3d_conv(tape.constant(swapped), adj, th).value();
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_NEAR(a.at(l, t, 0, c), b.at(l, t, 2, c), 1e-14);
        EXPECT_NEAR(a.at(l, t, 1, c), b.at(l, t, 1, c), 1e-14);
        EXPECT_NEAR(a.at(l, t, 2, c), b.at(l, t, 0, c), 1e-14);
      }
}

TEST(G3d, OutputIsConstantOverTheWindow) {
  ad::Rng rng(9);
  const auto adj = graph::build_multiscale(path3(), 2, 4);
  std::vector<Tensor> theta;
  for (int m = 0; m < 3; ++m) theta.push_back(ad::random_tensor(Shape{2, 3}, rng));
  Tape tape;
  const Tensor out = g3d_conv(tape.constant(ad::random_tensor(Shape{2, 4, 3, 2}, rng)), adj, theta_vars(tape, theta)).value();
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t t = 1; t < 4; ++t)
      for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.at(l, t, n, c), out.at(l, 0, n, c));
}

TEST(G3d, RejectsScaleCountMismatch) {
  const auto adj = graph::build_multiscale(path3(), 2, 4);
  Tape tape;
  const std::vector<Var> theta = {tape.constant(Tensor(Shape{2, 3}))};
  EXPECT_THROW(g3d_conv(tape.constant(Tensor(Shape{1, 4, 3, 2})), adj, theta), ConfigError);
}

// ---------------------------------------------------------------- collapse and aggregation

TEST(Collapse, UniformDiagonalWeightsAverageTheWindow) {
  const std::size_t tau = 5, c = 3;
  ad::Rng rng(10);
  Tensor w(Shape{c, tau, c});
  for (std::size_t o = 0; o < c; ++o)
    for (std::size_t t = 0; t < tau; ++t) w.at(o, t, o) = 1.0 / static_cast<double>(tau);
  const Tensor x = ad::random_tensor(Shape{2, tau, 4, c}, rng);
  Tape tape;
  const Var out = ad::collapse_time(tape.constant(x), tape.constant(w));
  EXPECT_TRUE(test::tensors_near(out.value(), ad::window_mean(tape.constant(x)).value(), 1e-15));
}

TEST(Collapse, TauOneIdentityIsPassthrough) {
  ad::Rng rng(11);
  const Tensor x = ad::random_tensor(Shape{3, 1, 4, 2}, rng);
  Tape tape;
  const Var out = ad::collapse_time(tape.constant(x), tape.constant(Tensor(Shape{2, 1, 2}, std::vector<double>{1, 0, 0, 1})));
  EXPECT_EQ(out.value(), ad::reshape(tape.constant(x), Shape{3, 4, 2}).value());
}

TEST(Aggregate, ZeroInputAndZeroBiasGivesZero) {
  ad::Rng rng(12);
  Tape tape;
  const Var out = aggregate_joints(tape.constant(Tensor(Shape{2, 3, 4})), tape.constant(ad::random_tensor(Shape{12, 5}, rng)),
                                   tape.constant(Tensor(Shape{5})));
  EXPECT_EQ(out.value(), Tensor(Shape{2, 5}));
}

TEST(Aggregate, IdenticalClipsGiveIdenticalRows) {
  ad::Rng rng(13);
  const Tensor one = ad::random_tensor(Shape{1, 3, 4}, rng);
  Tensor both(Shape{2, 3, 4});
  std::copy_n(one.data(), 12, both.data());
  std::copy_n(one.data(), 12, both.data() + 12);
  Tape tape;
  const Tensor out = aggregate_joints(tape.constant(both), tape.constant(ad::random_tensor(Shape{12, 5}, rng)),
                                      tape.constant(ad::random_tensor(Shape{5}, rng)))
                         .value();
  EXPECT_EQ(row_of(out, 0), row_of(out, 1));
}

// ---------------------------------------------------------------- feature extractor

TEST(Features, RowCountMatchesClipCount) {
  ModelConfig c = tiny_config();
  Model m(c, path3(), 1);
  EXPECT_EQ(m.clip_features(m.clips(random_frames(40, 3, 2, 2))).shape(), (Shape{10, 8}));
}

TEST(Features, DefaultInputYieldsThreeHundredRows) {
  ModelConfig c;
  c.hidden = 8;
  c.g3d_channels = 4;
  c.feature_dim = 4;
  Model m(c, graph::default_skeleton(), 1);
  EXPECT_EQ(m.clips(Tensor(Shape{6000, 18, 3})).dim(0), 300u);
}

TEST(Features, RowDependsOnlyOnItsOwnClip) {
  for (bool ablate : {false, true}) {
    ModelConfig c = tiny_config();
    c.ablate_local = ablate;
    Model m(c, path3(), 3);
    Tensor frames = random_frames(24, 3, 2, 4);
    const Tensor before = m.clip_features(m.clips(frames));
    for (std::size_t t = 8; t < 12; ++t) frames.at(t, 1, 0) += 0.75;  // clip 2 only
    const Tensor after = m.clip_features(m.clips(frames));
    for (std::size_t i = 0; i < 6; ++i) {
      if (i != 2) {
        EXPECT_EQ(row_of(before, i), row_of(after, i)) << "clip " << i;
      }
    }
  }
}

TEST(Features, BatchEqualsClipAtATime) {
  ModelConfig c = tiny_config();
  Model m(c, path3(), 5);
  const Tensor clips = m.clips(random_frames(28, 3, 2, 6));
  const Tensor batch = m.clip_features(clips);
  const std::size_t clip_size = clips.size() / clips.dim(0);
  for (std::size_t i = 0; i < clips.dim(0); ++i) {
    Tensor single(Shape{1, 4, 3, 2});
    std::copy_n(clips.data() + i * clip_size, clip_size, single.data());
    EXPECT_EQ(row_of(m.clip_features(single), 0), row_of(batch, i));
  }
}

TEST(Features, PermutingClipsPermutesRows) {
  ModelConfig c = tiny_config();
  Model m(c, path3(), 7);
  const Tensor clips = m.clips(random_frames(12, 3, 2, 8));
  Tensor reversed(clips.shape());
  const std::size_t clip_size = clips.size() / 3;
  for (std::size_t i = 0; i < 3; ++i) std::copy_n(clips.data() + i * clip_size, clip_size, reversed.data() + (2 - i) * clip_size);
  const Tensor a = m.clip_features(clips), b = m.clip_features(reversed);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(row_of(a, i), row_of(b, 2 - i));
}

TEST(Features, ModuleGradientMatchesFiniteDifferences) {
  ModelConfig c = tiny_config();
  c.g3d_layers = 2;
  ad::ParameterStore store;
  ad::Rng rng(21);
  LocalFeatureExtractor lfem(c, path3(), store, rng);
  const Tensor clips = split_clips(random_frames(12, 3, 2, 22), ClipWindowing{4, 4});
  ad::Rng wrng(23);
  const Tensor weights = ad::random_tensor(Shape{3, 8}, wrng);
  const double err = ad::grad_check_params(
      [&](Tape& tape) {
        const Var f = lfem.forward(tape, clips);
        Var acc;
        for (std::size_t i = 0; i < 3; ++i) {
          for (std::size_t j = 0; j < 8; ++j) {
            const Var term = ad::scale(ad::slice(ad::row(f, i), j, 1), weights.at(i, j));
            acc = acc.valid() ? ad::add(acc, term) : term;
          }
        }
        return ad::sum(acc);
      },
      store);
  EXPECT_LT(err, 1e-5);
}

// ---------------------------------------------------------------- pseudo-label branch

TEST(Cpgb, AblatedLongRangeIsIdentity) {
  ModelConfig c = tiny_config();
  c.ablate_longrange = true;
  ad::ParameterStore store;
  ad::Rng rng(30);
  PseudoLabelBranch b(c, store, rng);
  ad::Rng drng(31);
  const Tensor f = ad::random_tensor(Shape{6, 8}, drng);
  Tape tape;
  EXPECT_EQ(b.temporal_stack(tape, tape.constant(f)).value(), f);
}

TEST(Cpgb, ReceptiveFieldIsTwoClipsEachSide) {
  ModelConfig c = tiny_config();
  ad::ParameterStore store;
  ad::Rng rng(32);
  PseudoLabelBranch b(c, store, rng);
  ad::Rng drng(33);
  const Tensor f = ad::random_tensor(Shape{9, 8}, drng, 0.1, 1.0);
  Tape tape;
  const Tensor base = b.temporal_stack(tape, tape.constant(f)).value();
  for (std::size_t j = 0; j < 9; ++j) {
    Tensor g = f;
    for (std::size_t k = 0; k < 8; ++k) g.at(j, k) += 5.0;
    const Tensor out = b.temporal_stack(tape, tape.constant(g)).value();
    for (std::size_t i = 0; i < 9; ++i) {
      const std::size_t dist = i > j ? i - j : j - i;
      if (dist > 2) {
        EXPECT_EQ(row_of(out, i), row_of(base, i)) << "clip " << i << " perturbed " << j;
      }
    }
  }
}

TEST(Cpgb, IdentityKernelsPassNonNegativeInputThrough) {
  ModelConfig c = tiny_config();
  ad::ParameterStore store;
  ad::Rng rng(34);
  PseudoLabelBranch b(c, store, rng);
  for (std::size_t layer = 0; layer < c.temporal_layers; ++layer) {
    ad::Parameter* w = store.find("cpgb.conv" + std::to_string(layer) + ".weight");
    ASSERT_NE(w, nullptr);
    w->value.fill(0.0);
    for (std::size_t o = 0; o < 8; ++o) w->value.at(o, o, c.temporal_kernel / 2) = 1.0;
  }
  ad::Rng drng(35);
  const Tensor f = ad::random_tensor(Shape{5, 8}, drng, 0.0, 1.0);
  Tape tape;
  EXPECT_EQ(b.temporal_stack(tape, tape.constant(f)).value(), f);
}

TEST(Cpgb, ZeroScoreWeightsGiveHalfProbabilities) {
  ModelConfig c = tiny_config();
  ad::ParameterStore store;
  ad::Rng rng(36);
  PseudoLabelBranch b(c, store, rng);
  store.find("cpgb.score.weight")->value.fill(0.0);
  ad::Rng drng(37);
  Tape tape;
  const Var s = b.clip_scores(tape, tape.constant(ad::random_tensor(Shape{7, 8}, drng)));
  ASSERT_EQ(s.value().shape(), (Shape{7, 1}));
  EXPECT_EQ(ad::sigmoid(s).value(), Tensor(Shape{7, 1}, 0.5));
}

TEST(TopK, Examples) {
  Tape tape;
  const Var s = tape.constant(Tensor(Shape{4, 1}, std::vector<double>{0.9, 0.1, 0.5, 0.7}));
  const VideoScore v = topk_video_score(s, 2);
  EXPECT_NEAR(v.score.value()[0], 0.8, 1e-15);
  EXPECT_NEAR(v.prob.value()[0], 1.0 / (1.0 + std::exp(-0.8)), 1e-15);
  const Var five = tape.constant(Tensor(Shape{5, 1}, std::vector<double>{0.2, -1.0, 3.0, 0.4, 2.9}));
  EXPECT_EQ(topk_video_score(five, 8).score.value()[0], 3.0);
  EXPECT_EQ(ad::topk_count(300, 8), 37u);
}

TEST(TopK, ShiftMovesScoreAndKeepsSelection) {
  ad::Rng rng(38);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t len = 1 + static_cast<std::size_t>(rng.integer(0, 40));
    const std::size_t kappa = 1 + static_cast<std::size_t>(rng.integer(0, 9));
    const Tensor s = ad::random_tensor(Shape{len, 1}, rng);
    const double shift = rng.uniform(-3.0, 3.0);
    Tensor shifted = s;
    for (std::size_t i = 0; i < len; ++i) shifted.data()[i] += shift;
    std::vector<double> a(s.data(), s.data() + len), b(shifted.data(), shifted.data() + len);
    const std::size_t k = ad::topk_count(len, kappa);
    EXPECT_EQ(ad::topk_indices(a, k), ad::topk_indices(b, k));
    Tape tape;
    EXPECT_NEAR(topk_video_score(tape.constant(shifted), kappa).score.value()[0],
                topk_video_score(tape.constant(s), kappa).score.value()[0] + shift, 1e-12);
  }
}

TEST(MilLoss, Examples) {
  Tape tape;
  const std::vector<double> pos = {1.0}, neg = {0.0};
  EXPECT_NEAR(mil_loss(tape.constant(Tensor(Shape{1}, 1.0)), pos).value()[0], 0.0, 1e-6);
  EXPECT_NEAR(mil_loss(tape.constant(Tensor(Shape{1}, 0.5)), pos).value()[0], kLn2, 1e-15);
  EXPECT_NEAR(mil_loss(tape.constant(Tensor(Shape{1}, 0.5)), neg).value()[0], kLn2, 1e-15);
  const double clamped = mil_loss(tape.constant(Tensor(Shape{1}, 0.0)), pos).value()[0];
  EXPECT_TRUE(std::isfinite(clamped));
  EXPECT_NEAR(clamped, -std::log(1e-7), 1e-9);
}

TEST(PseudoLabels, Examples) {
  const std::vector<double> pos = {1.0}, neg = {0.0};
  const Tensor clips = Tensor(Shape{3, 1}, std::vector<double>{0.2, 0.5, 0.9});
  EXPECT_EQ(generate_pseudo_labels(clips, Tensor(Shape{1}, 0.8), 0.4, 0.3, pos), (PseudoLabels{0, 1, 1}));
  EXPECT_EQ(generate_pseudo_labels(clips, Tensor(Shape{1}, 0.35), 0.4, 0.3, pos), (PseudoLabels{0, 0, 0}));
  EXPECT_EQ(generate_pseudo_labels(clips, Tensor(Shape{1}, 0.99), 0.4, 0.3, neg), (PseudoLabels{0, 0, 0}));
}

TEST(PseudoLabels, NegativeVideosAreAllBackground) {
  ad::Rng rng(40);
  const std::vector<double> neg = {0.0};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t len = 1 + static_cast<std::size_t>(rng.integer(0, 60));
    const Tensor clips = ad::random_tensor(Shape{len, 1}, rng, 0.0, 1.0);
    const Tensor video(Shape{1}, rng.uniform());
    const PseudoLabels labels =
        generate_pseudo_labels(clips, video, rng.uniform(0.0, 0.5), rng.uniform(0.0, 0.5), neg);
    ASSERT_EQ(labels.size(), len);
    EXPECT_TRUE(std::all_of(labels.begin(), labels.end(), [](int l) { return l == 0; }));
  }
}

TEST(PseudoLabels, RaisingScoreThresholdNeverAddsLabels) {
  ad::Rng rng(41);
  const std::vector<double> pos = {1.0};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t len = 1 + static_cast<std::size_t>(rng.integer(0, 60));
    const Tensor clips = ad::random_tensor(Shape{len, 1}, rng, 0.0, 1.0);
    const Tensor video(Shape{1}, rng.uniform());
    std::size_t previous = len + 1;
    for (double theta = 0.0; theta <= 1.0; theta += 0.05) {
      const PseudoLabels labels = generate_pseudo_labels(clips, video, 0.4, theta, pos);
      const auto count = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
      EXPECT_LE(count, previous);
      previous = count;
    }
  }
}

TEST(PseudoLabels, MultiClassTakesTheMostProbableSurvivor) {
  const Tensor clips = Tensor::matrix({{0.5, 0.7}, {0.9, 0.2}, {0.1, 0.2}});
  const Tensor video(Shape{2}, std::vector<double>{0.6, 0.6});
  const std::vector<double> both = {1.0, 1.0}, second_only = {0.0, 1.0};
  EXPECT_EQ(generate_pseudo_labels(clips, video, 0.4, 0.3, both), (PseudoLabels{2, 1, 0}));
  EXPECT_EQ(generate_pseudo_labels(clips, video, 0.4, 0.3, second_only), (PseudoLabels{2, 0, 0}));
}

// ---------------------------------------------------------------- online branch

TEST(Oamb, ZeroRecurrentWeightsGiveSoftmaxOfBias) {
  ModelConfig c = tiny_config();
  ad::ParameterStore store;
  ad::Rng rng(50);
  OnlineBranch b(c, store, rng);
  for (const char* name : {"oamb.lstm.input_weight", "oamb.lstm.hidden_weight", "oamb.lstm.bias"}) {
    store.find(name)->value.fill(0.0);
  }
  store.find("oamb.out.bias")->value = Tensor(Shape{2}, std::vector<double>{0.3, -0.2});
  ad::Rng drng(51);
  Tape tape;
  const Tensor a = b.forward(tape, tape.constant(ad::random_tensor(Shape{6, 8}, drng))).value();
  const double e0 = std::exp(0.3), e1 = std::exp(-0.2);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(a.at(i, 0), e0 / (e0 + e1), 1e-15);
    EXPECT_NEAR(a.at(i, 1), e1 / (e0 + e1), 1e-15);
  }
}

TEST(Oamb, RowsSumToOne) {
  ModelConfig c = tiny_config();
  c.classes = 3;
  ad::ParameterStore store;
  ad::Rng rng(52);
  OnlineBranch b(c, store, rng);
  ad::Rng drng(53);
  Tape tape;
  const Tensor a = b.forward(tape, tape.constant(ad::random_tensor(Shape{10, 8}, drng, -3.0, 3.0))).value();
  for (std::size_t i = 0; i < 10; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) s += a.at(i, j);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Oamb, PrefixIsUnchangedByLaterClips) {
  ModelConfig c = tiny_config();
  ad::ParameterStore store;
  ad::Rng rng(54);
  OnlineBranch b(c, store, rng);
  ad::Rng drng(55);
  const Tensor longer = ad::random_tensor(Shape{15, 8}, drng);
  Tensor shorter(Shape{5, 8});
  std::copy_n(longer.data(), shorter.size(), shorter.data());
  Tape tape;
  const Tensor a = b.forward(tape, tape.constant(longer)).value();
  const Tensor s = b.forward(tape, tape.constant(shorter)).value();
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(row_of(a, i), row_of(s, i));
}

TEST(Oamb, StreamingStepEqualsBatchForward) {
  ModelConfig c = tiny_config();
  ad::ParameterStore store;
  ad::Rng rng(56);
  OnlineBranch b(c, store, rng);
  ad::Rng drng(57);
  const Tensor f = ad::random_tensor(Shape{7, 8}, drng);
  Tape tape;
  const Tensor batch = b.forward(tape, tape.constant(f)).value();
  OnlineState state = b.initial_state();
  for (std::size_t i = 0; i < 7; ++i) {
    const Tensor a = b.online_step(state, std::span<const double>(f.data() + i * 8, 8));
    EXPECT_EQ(state.clips_seen, i + 1);
    EXPECT_EQ(a, row_of(batch, i));
  }
}

TEST(FrameLoss, Examples) {
  Tape tape;
  const Var onehot = tape.constant(Tensor::matrix({{1, 0}, {0, 1}, {0, 1}}));
  EXPECT_EQ(frame_loss(onehot, std::vector<int>{0, 1, 1}).value()[0], 0.0);
  const Var uniform = tape.constant(Tensor(Shape{4, 2}, 0.5));
  EXPECT_NEAR(frame_loss(uniform, std::vector<int>{0, 1, 1, 0}).value()[0], kLn2, 1e-15);
  EXPECT_THROW(frame_loss(uniform, std::vector<int>{0, 1}), DimensionError);
}

TEST(FrameLoss, GradientThroughSoftmax) {
  ad::Rng rng(58);
  const std::vector<int> labels = {0, 1, 1, 0, 1};
  const double err = ad::grad_check(
      [&](Tape&, std::span<const Var> in) { return frame_loss(ad::softmax(in[0]), labels); },
      {ad::random_tensor(Shape{5, 2}, rng, -2.0, 2.0)});
  EXPECT_LT(err, 1e-6);
}

TEST(OnlineMil, Examples) {
  Tape tape;
  const std::vector<double> pos = {1.0};
  const Var certain = tape.constant(Tensor::matrix({{0, 1}, {0, 1}, {0, 1}}));
  EXPECT_NEAR(mil_loss_online(certain, pos, 8).value()[0], 0.0, 1e-6);
  const Var half = tape.constant(Tensor(Shape{9, 2}, 0.5));
  EXPECT_NEAR(mil_loss_online(half, pos, 8).value()[0], kLn2, 1e-15);
  const Var five = tape.constant(Tensor::matrix({{0.9, 0.1}, {0.3, 0.7}, {0.6, 0.4}, {0.2, 0.8}, {0.5, 0.5}}));
  EXPECT_EQ(online_video_prob(five, 8).value()[0], 0.8);
}

TEST(PrefixProb, Examples) {
  const Tensor a = Tensor::matrix({{0.9, 0.1}, {0.3, 0.7}, {0.6, 0.4}, {0.2, 0.8}, {0.5, 0.5}});
  Tape tape;
  EXPECT_EQ(prefix_video_prob(a, 5, 2), online_video_prob(tape.constant(a), 2).value()[0]);
  EXPECT_EQ(prefix_video_prob(a, 1, 8), 0.1);
  EXPECT_EQ(prefix_video_prob(a, 4, 2), 0.75);  // K = 2 of {0.1, 0.7, 0.4, 0.8}
  EXPECT_THROW(prefix_video_prob(a, 0, 8), DimensionError);
  EXPECT_THROW(prefix_video_prob(a, 6, 8), DimensionError);
}

TEST(Instances, Examples) {
  const ClipWindowing w{20, 20};
  const std::vector<double> probs = {0.1, 0.8, 0.9, 0.2, 0.7};
  const auto inst = extract_instances(probs, 0.5, w);
  ASSERT_EQ(inst.size(), 2u);
  EXPECT_EQ(inst[0].first_clip, 1u);
  EXPECT_EQ(inst[0].last_clip, 2u);
  EXPECT_EQ(inst[0].start_frame, 21u);
  EXPECT_EQ(inst[0].end_frame, 60u);
  EXPECT_NEAR(inst[0].score, 0.85, 1e-15);
  EXPECT_EQ(inst[1].first_clip, 4u);
  EXPECT_EQ(inst[1].last_clip, 4u);
  EXPECT_EQ(inst[1].start_frame, 81u);
  EXPECT_EQ(inst[1].end_frame, 100u);
  EXPECT_TRUE(extract_instances(std::vector<double>{0.1, 0.2}, 0.5, w).empty());
  const auto all = extract_instances(std::vector<double>{0.6, 0.7, 0.9}, 0.5, w);
  ASSERT_EQ(all.size(), 1u);
  EXPECT_EQ(all[0].start_frame, 1u);
  EXPECT_EQ(all[0].end_frame, 60u);
}

TEST(Instances, CoverExactlyTheAboveThresholdClips) {
  ad::Rng rng(60);
  const ClipWindowing w{4, 4};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t len = 1 + static_cast<std::size_t>(rng.integer(0, 40));
    std::vector<double> probs(len);
    for (double& p : probs) p = rng.uniform();
    std::size_t previous_cover = 0;
    for (double thr : {0.9, 0.7, 0.5, 0.3, 0.1}) {
      const auto inst = extract_instances(probs, thr, w);
      std::set<std::size_t> covered;
      std::size_t frames = 0;
      for (std::size_t k = 0; k < inst.size(); ++k) {
        if (k > 0) {
          EXPECT_GE(inst[k - 1].score, inst[k].score);
        }
        for (std::size_t i = inst[k].first_clip; i <= inst[k].last_clip; ++i) EXPECT_TRUE(covered.insert(i).second);
        frames += inst[k].end_frame - inst[k].start_frame + 1;
      }
      std::set<std::size_t> above;
      for (std::size_t i = 0; i < len; ++i)
        if (probs[i] >= thr) above.insert(i);
      EXPECT_EQ(covered, above);
      EXPECT_GE(frames, previous_cover);
      previous_cover = frames;
    }
  }
}

}  // namespace
}  // namespace wogma::model
