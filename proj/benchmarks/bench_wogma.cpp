// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <vector>

#include "wogma/ad/random.hpp"
#include "wogma/data/preprocess.hpp"
#include "wogma/data/synth.hpp"
#include "wogma/eval/metrics.hpp"
#include "wogma/graph/skeleton_graph.hpp"
#include "wogma/model/model.hpp"
#include "wogma/train/trainer.hpp"

namespace {

using namespace wogma;

// 600-frame synthetic videos at window and stride 20, so 30 clips each.
constexpr std::size_t kFrames = 600;

train::TrainConfig bench_config(std::size_t hidden) {
  train::TrainConfig c;
  c.model.hidden = hidden;
  c.max_frames = kFrames;
  c.epochs = 1;
  c.seed = 3;
  return c;
}

data::Dataset bench_videos(std::size_t n) {
  data::SynthParams p;
  p.n_videos = n;
  p.frames = kFrames;
  p.seed = 1;
  return data::synthesize(p);
}

ad::Tensor first_clips(const model::Model& m) {
  return m.clips(data::preprocess(bench_videos(1).front(), kFrames).frames);
}

// Local feature extraction (G3D plus temporal collapse) for one video.
void BM_ClipFeatures(benchmark::State& state) {
  const model::Model m(bench_config(128).model, graph::default_skeleton(), 3);
  const ad::Tensor clips = first_clips(m);
  for (auto _ : state) benchmark::DoNotOptimize(m.clip_features(clips));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(clips.dim(0)));
}
BENCHMARK(BM_ClipFeatures)->Unit(benchmark::kMillisecond);

// Inference over a whole video without gradients; argument is the LSTM width.
void BM_OnlineTimeline(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const model::Model m(bench_config(hidden).model, graph::default_skeleton(), 3);
  const ad::Tensor clips = first_clips(m);
  for (auto _ : state) benchmark::DoNotOptimize(m.online_timeline(clips));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(clips.dim(0)));
}
BENCHMARK(BM_OnlineTimeline)->Arg(128)->Arg(1024)->Unit(benchmark::kMillisecond);

// Latency of one streaming update given a precomputed clip feature.
void BM_OnlineStep(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const model::Model m(bench_config(hidden).model, graph::default_skeleton(), 3);
  const ad::Tensor features = m.clip_features(first_clips(m));
  const std::size_t width = features.dim(1);
  model::OnlineState s = m.oamb().initial_state();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(m.oamb().online_step(s, {features.data() + (i % features.dim(0)) * width, width}));
    ++i;
  }
}
BENCHMARK(BM_OnlineStep)->Arg(128)->Arg(1024)->Unit(benchmark::kMicrosecond);

// Forward and backward of the joint loss on one video.
void BM_JointLossBackward(benchmark::State& state) {
  const train::TrainConfig c = bench_config(static_cast<std::size_t>(state.range(0)));
  model::Model m(c.model, graph::default_skeleton(), 3);
  const ad::Tensor clips = first_clips(m);
  const std::vector<double> label = {1.0};
  for (auto _ : state) {
    ad::Tape tape;
    const train::LossTerms terms = train::joint_loss(tape, m, clips, label, c);
    tape.backward(terms.total);
    m.params().zero_grad();
  }
}
BENCHMARK(BM_JointLossBackward)->Arg(128)->Unit(benchmark::kMillisecond);

// One training epoch over eight videos, optimizer included.
void BM_TrainEpoch(benchmark::State& state) {
  const data::Dataset videos = bench_videos(8);
  train::Trainer trainer(bench_config(128), graph::default_skeleton());
  trainer.set_data(videos);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.run_epoch());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(videos.size()));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

// Greedy-matching AP with `range(0)` predictions against half as many gt.
void BM_AveragePrecision(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ad::Rng rng(7);
  std::vector<eval::ScoredInterval> preds;
  std::vector<eval::GroundTruth> truth;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t start = static_cast<std::size_t>(rng.integer(1, 5000));
    preds.push_back({{start, start + static_cast<std::size_t>(rng.integer(20, 100))}, rng.uniform(0.0, 1.0), i % 10});
    if (i % 2 == 0) truth.push_back({{start + 5, start + 60}, i % 10});
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::average_precision(preds, truth, 0.3));
}
BENCHMARK(BM_AveragePrecision)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
