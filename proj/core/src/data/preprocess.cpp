// SPDX-License-Identifier: Apache-2.0
#include "wogma/data/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "wogma/error.hpp"
#include "wogma/graph/skeleton_graph.hpp"

namespace wogma::data {
namespace {

struct Point {
  double x;
  double y;
};

class FrameView {
 public:
  FrameView(double* base, std::size_t joints, std::size_t channels) : base_(base), joints_(joints), ch_(channels) {}
  double conf(std::size_t n) const { return base_[n * ch_ + 2]; }
  Point at(std::size_t n) const { return {base_[n * ch_], base_[n * ch_ + 1]}; }
  double* joint(std::size_t n) { return base_ + n * ch_; }
  std::size_t joints() const { return joints_; }

 private:
  double* base_;
  std::size_t joints_;
  std::size_t ch_;
};

std::optional<Point> neck_of(const FrameView& f) {
  if (f.conf(graph::kNeck) <= 0.0) return std::nullopt;
  return f.at(graph::kNeck);
}

std::optional<double> trunk_length(const FrameView& f) {
  auto neck = neck_of(f);
  if (!neck) return std::nullopt;
  const bool r = f.conf(graph::kRightHip) > 0.0, l = f.conf(graph::kLeftHip) > 0.0;
  if (!r && !l) return std::nullopt;
  Point hip{0.0, 0.0};
  if (r && l) {
    hip = {(f.at(graph::kRightHip).x + f.at(graph::kLeftHip).x) / 2.0,
           (f.at(graph::kRightHip).y + f.at(graph::kLeftHip).y) / 2.0};
  } else {
    hip = f.at(r ? graph::kRightHip : graph::kLeftHip);
  }
  const double len = std::hypot(hip.x - neck->x, hip.y - neck->y);
  return len > 0.0 ? std::optional<double>(len) : std::nullopt;
}

// Lower median: an element of the sample, so rescaling is exact on it.
double lower_median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

void normalize_frame(FrameView f, Point origin, double scale) {
  for (std::size_t n = 0; n < f.joints(); ++n) {
    double* j = f.joint(n);
    if (j[2] <= 0.0) {
      j[0] = j[1] = j[2] = 0.0;
      continue;
    }
    j[0] = (j[0] - origin.x) / scale;
    j[1] = (j[1] - origin.y) / scale;
  }
}

void require_layout(const ad::Tensor& frames) {
  if (frames.rank() != 3 || frames.dim(2) < 3) throw DataError("frames must be [T x N x 3]");
  if (frames.dim(1) <= std::max(graph::kNeck, std::max(graph::kRightHip, graph::kLeftHip))) {
    throw DataError("skeleton lacks the neck/hip joints needed for normalization");
  }
}

}  // namespace

SkeletonSequence preprocess(const SkeletonSequence& seq, std::size_t max_frames) {
  if (seq.frame_count() < 1) throw DataError("video " + seq.video_id + " has no frames");
  if (max_frames < 1) throw ConfigError("max_frames must be >= 1");
  require_layout(seq.frames);
  const std::size_t joints = seq.frames.dim(1), ch = seq.frames.dim(2);
  const std::size_t frame_size = joints * ch;
  const std::size_t kept = std::min(seq.frame_count(), max_frames);

  SkeletonSequence out = seq;
  out.frames = ad::Tensor(ad::Shape{max_frames, joints, ch});
  std::copy_n(seq.frames.data(), kept * frame_size, out.frames.data());
  if (seq.gt_segments) {
    std::vector<Segment> segs;
    for (Segment s : *seq.gt_segments) {
      if (s.start_frame > max_frames) continue;
      s.end_frame = std::min(s.end_frame, max_frames);
      segs.push_back(s);
    }
    out.gt_segments = std::move(segs);
  }

  std::vector<double> lengths;
  std::optional<Point> first_neck;
  for (std::size_t t = 0; t < kept; ++t) {
    FrameView f(out.frames.data() + t * frame_size, joints, ch);
    if (auto len = trunk_length(f)) lengths.push_back(*len);
    if (!first_neck) first_neck = neck_of(f);
  }
  if (lengths.empty()) throw DataError("video " + seq.video_id + " has no valid joints to normalize");
  const double scale = lower_median(lengths);

  Point origin = *first_neck;
  for (std::size_t t = 0; t < kept; ++t) {
    FrameView f(out.frames.data() + t * frame_size, joints, ch);
    if (auto neck = neck_of(f)) origin = *neck;
    normalize_frame(f, origin, scale);
  }
  return out;
}

void StreamNormalizer::normalize(ad::Tensor& frames) {
  require_layout(frames);
  const std::size_t joints = frames.dim(1), ch = frames.dim(2);
  const std::size_t frame_size = joints * ch;
  for (std::size_t t = 0; t < frames.dim(0); ++t) {
    FrameView f(frames.data() + t * frame_size, joints, ch);
    if (auto len = trunk_length(f)) trunk_lengths_.insert(std::upper_bound(trunk_lengths_.begin(), trunk_lengths_.end(), *len), *len);
    if (!has_neck_) {
      if (auto neck = neck_of(f)) {
        has_neck_ = true;
        neck_x_ = neck->x;
        neck_y_ = neck->y;
      }
    }
  }
  if (trunk_lengths_.empty()) {
    // Nothing usable yet: the stream is treated like padding.
    frames.fill(0.0);
    return;
  }
  const double scale = trunk_lengths_[(trunk_lengths_.size() - 1) / 2];
  for (std::size_t t = 0; t < frames.dim(0); ++t) {
    FrameView f(frames.data() + t * frame_size, joints, ch);
    if (auto neck = neck_of(f)) {
      neck_x_ = neck->x;
      neck_y_ = neck->y;
    }
    normalize_frame(f, Point{neck_x_, neck_y_}, scale);
  }
}

}  // namespace wogma::data
