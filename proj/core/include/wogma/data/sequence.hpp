// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wogma/ad/tensor.hpp"

namespace wogma::data {

/// Annotated action interval, 1-indexed inclusive frames.
struct Segment {
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;
  int action = 1;

  bool operator==(const Segment&) const = default;
};

struct SkeletonSequence {
  std::string video_id;
  double fps = 20.0;
  std::vector<double> labels;                      // y_c in {0, 1}, one per action class
  std::optional<std::vector<Segment>> gt_segments;  // absent for weakly labeled videos
  ad::Tensor frames;                               // [T x N x C], C = (x, y, confidence)

  std::size_t frame_count() const { return frames.rank() ? frames.dim(0) : 0; }
  bool positive(std::size_t action = 1) const { return labels.size() >= action && labels[action - 1] > 0.5; }

  bool operator==(const SkeletonSequence&) const = default;
};

using Dataset = std::vector<SkeletonSequence>;

/// JSON Lines: one object per video with keys video_id, fps, label,
/// gt_segments ([[start, end, class], ...] or null) and frames ([T][N][3]).
Dataset read_sequences(std::istream& in, std::size_t joints = 18, std::size_t channels = 3);
void write_sequences(std::ostream& out, const Dataset& dataset);
Dataset load_sequences(const std::filesystem::path& path, std::size_t joints = 18, std::size_t channels = 3);
void save_sequences(const std::filesystem::path& path, const Dataset& dataset);

std::string sequence_to_json_line(const SkeletonSequence& seq);
/// Throws DataError with a message naming the offending field.
SkeletonSequence sequence_from_json_line(const std::string& line, std::size_t joints = 18, std::size_t channels = 3);

/// Parses frames given as [[[x, y, conf] x N] x T] into a [T x N x C] tensor.
ad::Tensor frames_from_json_text(const std::string& text, std::size_t joints = 18, std::size_t channels = 3);

}  // namespace wogma::data
