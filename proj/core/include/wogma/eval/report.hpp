// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wogma/data/sequence.hpp"
#include "wogma/model/model.hpp"
#include "wogma/model/oamb.hpp"

namespace wogma::eval {

struct EvalOptions {
  std::size_t kappa = 8;
  std::size_t max_frames = 6000;
  double instance_threshold = 0.5;
  std::vector<double> fractions = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};

  /// Throws ConfigError for fractions outside (0, 1] or a threshold outside [0, 1].
  void validate() const;
};

struct CurvePoint {
  double fraction = 0.0;
  std::optional<double> auc;

  bool operator==(const CurvePoint&) const = default;
};

/// Online outputs of one video for plotting and inspection.
struct VideoTimeline {
  std::string video_id;
  int label = 0;
  double video_prob = 0.0;
  std::size_t tau = 0;
  std::size_t stride = 0;
  std::vector<double> probs;  // action-class probability per clip
  std::vector<data::Segment> gt_segments;
  std::vector<model::DetectionInstance> instances;

  bool operator==(const VideoTimeline&) const;
};

/// Video-level classification and detection metrics. Classification and the
/// early curve cover every video; detection AP pools the positive videos that
/// carry ground-truth segments; instance_count counts instances in all videos.
struct EvalReport {
  std::size_t videos = 0;
  std::size_t detection_videos = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;
  std::map<double, double> map_at;  // IoU threshold -> AP
  double mean_map = 0.0;
  std::size_t instance_count = 0;
  std::vector<CurvePoint> early_curve;
  std::vector<VideoTimeline> timelines;

  bool operator==(const EvalReport&) const;
};

/// Number of clips observed at fraction p of L clips: ceil(p L), at least 1.
std::size_t observed_clips(double fraction, std::size_t clips);

/// Online probability table [L x (n_c + 1)] for every video after preprocessing.
std::vector<ad::Tensor> online_timelines(const model::Model& model, const data::Dataset& dataset,
                                         std::size_t max_frames);

std::vector<CurvePoint> early_observation_curve(const model::Model& model, const data::Dataset& dataset,
                                                std::span<const double> fractions, const EvalOptions& options);

EvalReport evaluate(const model::Model& model, const data::Dataset& dataset, const EvalOptions& options);

/// Instances and ground truth of positive videos with annotations, pooled for AP.
double detection_ap(std::span<const VideoTimeline> timelines, double iou_threshold);

std::string report_to_json(const EvalReport& report);
/// Parses report_to_json output; throws DataError on malformed input.
EvalReport report_from_json(const std::string& text);

/// fraction,auc rows; an undefined AUC is written as an empty field.
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve);
/// video_id,clip,start_frame,end_frame,prob,in_gt,in_instance rows.
void write_timeline_csv(std::ostream& out, std::span<const VideoTimeline> timelines);

}  // namespace wogma::eval
