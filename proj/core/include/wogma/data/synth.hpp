// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "wogma/data/sequence.hpp"

namespace wogma::data {

/// Knobs of the synthetic skeleton generator. Lengths are in frames,
/// amplitudes in pixels of a body whose neck-to-hip distance is about 100 px.
///
/// Positive videos carry segments in which limb joints oscillate with a small
/// multi-frequency, multi-direction motion. Segments are placed one per equal
/// stratum of the video, so every stretch of the recording contains one.
/// Negative videos carry large slow limb swings and no such segments.
struct SynthParams {
  std::size_t n_videos = 200;
  std::size_t frames = 600;
  double fps = 20.0;
  double positive_fraction = 0.5;
  std::size_t segments_min = 5;
  std::size_t segments_max = 5;
  std::size_t segment_min_frames = 50;
  std::size_t segment_max_frames = 90;
  std::size_t segment_margin = 10;  // minimum distance from a stratum edge
  double amplitude_min = 12.0;
  double amplitude_max = 20.0;
  double frequency_min = 0.2;  // Hz
  double frequency_max = 0.5;
  std::size_t components = 3;  // sinusoids per joint inside a segment
  double distractor_amplitude_min = 15.0;
  double distractor_amplitude_max = 30.0;
  double distractor_frequency_min = 0.03;
  double distractor_frequency_max = 0.08;
  double noise = 0.2;        // per-joint Gaussian jitter, px
  double drift = 4.0;        // amplitude of slow whole-body drift, px
  double pose_jitter = 6.0;  // per-video perturbation of the rest pose, px
  double dropout = 0.002;    // probability that a joint is missed in a frame
  std::uint64_t seed = 7;
  std::string id_prefix = "syn";

  /// Throws ConfigError for infeasible settings.
  void validate() const;
};

/// Deterministic in `params.seed`. Output is raw pixel coordinates in the
/// 18-joint order; run preprocess() before feeding a model.
Dataset synthesize(const SynthParams& params);

/// Limb joints that carry the oscillation (elbows, wrists, knees, ankles).
inline constexpr std::size_t kLimbJoints[] = {3, 4, 6, 7, 9, 10, 12, 13};

}  // namespace wogma::data
