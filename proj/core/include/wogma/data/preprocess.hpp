// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "wogma/data/sequence.hpp"

namespace wogma::data {

/// Truncates or zero-pads to exactly `max_frames` frames, then per frame
/// subtracts the neck position and divides coordinates by the median
/// neck-to-mid-hip distance of the real (non-padded) frames. Joints with zero
/// confidence, and padded frames, stay at the origin. Throws DataError when no
/// frame has a usable neck and hip.
SkeletonSequence preprocess(const SkeletonSequence& seq, std::size_t max_frames);

/// Causal counterpart for streams: the scale is the median trunk length over
/// all frames received so far.
class StreamNormalizer {
 public:
  /// Normalizes a block of frames [F x N x C] in place after absorbing them.
  void normalize(ad::Tensor& frames);

 private:
  std::vector<double> trunk_lengths_;  // sorted
  bool has_neck_ = false;
  double neck_x_ = 0.0;
  double neck_y_ = 0.0;
};

}  // namespace wogma::data
