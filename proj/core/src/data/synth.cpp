// SPDX-License-Identifier: Apache-2.0
#include "wogma/data/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "wogma/ad/random.hpp"
#include "wogma/error.hpp"
#include "wogma/graph/skeleton_graph.hpp"

namespace wogma::data {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Supine infant seen from above, neck at the origin, y pointing down.
constexpr std::array<std::array<double, 2>, graph::kDefaultJoints> kRestPose = {{
    {0, -35},   {0, 0},     {-30, 0},  {-45, 40}, {-55, 80}, {30, 0},    {45, 40},  {55, 80},  {-18, 100},
    {-22, 150}, {-25, 200}, {18, 100}, {22, 150}, {25, 200}, {-8, -42},  {8, -42},  {-16, -38}, {16, -38},
}};

struct Wave {
  double amplitude;
  double frequency;
  double phase;
  double dir_x;
  double dir_y;

  double at(double seconds) const { return amplitude * std::sin(kTwoPi * frequency * seconds + phase); }
};

Wave random_wave(ad::Rng& rng, double amp_lo, double amp_hi, double f_lo, double f_hi) {
  const double angle = rng.uniform(0.0, kTwoPi);
  return Wave{rng.uniform(amp_lo, amp_hi), rng.uniform(f_lo, f_hi), rng.uniform(0.0, kTwoPi), std::cos(angle),
              std::sin(angle)};
}

bool is_limb(std::size_t joint) {
  return std::find(std::begin(kLimbJoints), std::end(kLimbJoints), joint) != std::end(kLimbJoints);
}

// Smooth 0 -> 1 -> 0 envelope with `ramp` frames at each end.
double envelope(std::size_t t, const Segment& s, std::size_t ramp) {
  const std::size_t frame = t + 1;
  if (frame < s.start_frame || frame > s.end_frame) return 0.0;
  const double in = static_cast<double>(frame - s.start_frame) / static_cast<double>(ramp);
  const double out = static_cast<double>(s.end_frame - frame) / static_cast<double>(ramp);
  const double r = std::min({1.0, in, out});
  return 0.5 - 0.5 * std::cos(std::numbers::pi * r);
}

std::vector<Segment> place_segments(const SynthParams& p, ad::Rng& rng) {
  const auto count = static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(p.segments_min),
                                                          static_cast<std::int64_t>(p.segments_max)));
  std::vector<Segment> segs;
  const std::size_t stratum = p.frames / count;
  for (std::size_t k = 0; k < count; ++k) {
    const auto len = static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(p.segment_min_frames),
                                                          static_cast<std::int64_t>(p.segment_max_frames)));
    const std::size_t lo = k * stratum + p.segment_margin;
    const std::size_t hi = (k + 1) * stratum - p.segment_margin - len;  // last admissible 0-based start
    const auto start = static_cast<std::size_t>(
        rng.integer(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(std::max(lo, hi))));
    segs.push_back(Segment{start + 1, start + len, 1});
  }
  return segs;
}

SkeletonSequence make_video(const SynthParams& p, std::size_t index, bool positive, ad::Rng& rng) {
  constexpr std::size_t joints = graph::kDefaultJoints;
  SkeletonSequence seq;
  seq.video_id = p.id_prefix + "_" + std::to_string(index);
  seq.fps = p.fps;
  seq.labels = {positive ? 1.0 : 0.0};

  const double body_scale = rng.uniform(0.8, 1.2);
  const double cx = rng.uniform(250.0, 390.0), cy = rng.uniform(150.0, 250.0);
  std::array<std::array<double, 2>, joints> rest{};
  for (std::size_t n = 0; n < joints; ++n) {
    rest[n][0] = kRestPose[n][0] + (n == graph::kNeck ? 0.0 : rng.normal(0.0, p.pose_jitter));
    rest[n][1] = kRestPose[n][1] + (n == graph::kNeck ? 0.0 : rng.normal(0.0, p.pose_jitter));
  }
  const Wave drift_x = random_wave(rng, p.drift * 0.5, p.drift, 0.005, 0.02);
  const Wave drift_y = random_wave(rng, p.drift * 0.5, p.drift, 0.005, 0.02);

  std::vector<Segment> segments;
  std::vector<std::vector<Wave>> fidget(joints);
  std::vector<Wave> swings;
  std::vector<std::size_t> swing_joint;
  if (positive) {
    segments = place_segments(p, rng);
    for (std::size_t n = 0; n < joints; ++n) {
      // limbs carry the full motion, the trunk and head a damped share of it
      const double gain = is_limb(n) ? 1.0 : 0.3;
      for (std::size_t k = 0; k < p.components; ++k) {
        Wave w = random_wave(rng, p.amplitude_min, p.amplitude_max, p.frequency_min, p.frequency_max);
        w.amplitude *= gain;
        fidget[n].push_back(w);
      }
    }
  } else {
    const auto count = rng.integer(2, 4);
    for (std::int64_t k = 0; k < count; ++k) {
      swing_joint.push_back(kLimbJoints[static_cast<std::size_t>(rng.integer(0, std::size(kLimbJoints) - 1))]);
      swings.push_back(random_wave(rng, p.distractor_amplitude_min, p.distractor_amplitude_max,
                                   p.distractor_frequency_min, p.distractor_frequency_max));
    }
  }
  seq.gt_segments = segments;

  seq.frames = ad::Tensor(ad::Shape{p.frames, joints, 3});
  for (std::size_t t = 0; t < p.frames; ++t) {
    const double sec = static_cast<double>(t) / p.fps;
    double active = 0.0;
    for (const Segment& s : segments) active = std::max(active, envelope(t, s, 8));
    for (std::size_t n = 0; n < joints; ++n) {
      double x = rest[n][0] + drift_x.at(sec);
      double y = rest[n][1] + drift_y.at(sec);
      if (active > 0.0) {
        for (const Wave& w : fidget[n]) {
          x += active * w.at(sec) * w.dir_x;
          y += active * w.at(sec) * w.dir_y;
        }
      }
      for (std::size_t k = 0; k < swings.size(); ++k) {
        if (swing_joint[k] != n) continue;
        x += swings[k].at(sec) * swings[k].dir_x;
        y += swings[k].at(sec) * swings[k].dir_y;
      }
      x = cx + body_scale * x + rng.normal(0.0, p.noise);
      y = cy + body_scale * y + rng.normal(0.0, p.noise);
      double conf = rng.uniform(0.7, 1.0);
      if (n != graph::kNeck && rng.uniform() < p.dropout) x = y = conf = 0.0;
      double* j = seq.frames.data() + (t * joints + n) * 3;
      j[0] = x;
      j[1] = y;
      j[2] = conf;
    }
  }
  return seq;
}

}  // namespace

void SynthParams::validate() const {
  if (n_videos == 0) throw ConfigError("n_videos must be >= 1");
  if (fps <= 0.0) throw ConfigError("fps must be positive");
  if (positive_fraction < 0.0 || positive_fraction > 1.0) throw ConfigError("positive_fraction must be in [0, 1]");
  if (segments_min < 1 || segments_max < segments_min) throw ConfigError("segment count range is empty");
  if (segment_min_frames < 1 || segment_max_frames < segment_min_frames) {
    throw ConfigError("segment length range is empty");
  }
  if (segments_max * (segment_max_frames + 2 * segment_margin) > frames) {
    throw ConfigError("segments do not fit: " + std::to_string(segments_max) + " x (" +
                      std::to_string(segment_max_frames) + " + margins) frames exceed T = " + std::to_string(frames));
  }
  if (amplitude_min < 0.0 || amplitude_max < amplitude_min) throw ConfigError("amplitude range is empty");
  if (frequency_min <= 0.0 || frequency_max < frequency_min) throw ConfigError("frequency range is empty");
  if (noise < 0.0) throw ConfigError("noise must be >= 0");
}

Dataset synthesize(const SynthParams& params) {
  params.validate();
  ad::Rng rng(params.seed);
  const auto positives = static_cast<std::size_t>(std::llround(params.positive_fraction * static_cast<double>(params.n_videos)));
  std::vector<bool> is_positive(params.n_videos, false);
  std::fill_n(is_positive.begin(), positives, true);
  for (std::size_t i = is_positive.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i - 1)));
    std::swap(is_positive[i - 1], is_positive[j]);
  }
  Dataset out;
  out.reserve(params.n_videos);
  for (std::size_t i = 0; i < params.n_videos; ++i) out.push_back(make_video(params, i, is_positive[i], rng));
  return out;
}

}  // namespace wogma::data
