// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace wogma::eval {

struct ClassificationMetrics {
  double accuracy = 0.0;
  double f1 = 0.0;               // positive class
  std::optional<double> auc;     // undefined when only one class is present
};

/// Accuracy and F1 at `threshold` (prob > threshold is positive); AUC as the
/// Mann-Whitney rank statistic with tied ranks averaged.
ClassificationMetrics classification_metrics(std::span<const double> probs, std::span<const int> labels,
                                             double threshold = 0.5);
std::optional<double> roc_auc(std::span<const double> probs, std::span<const int> labels);

/// Inclusive frame interval.
struct Interval {
  std::size_t start = 0;
  std::size_t end = 0;
};

/// |a n b| / |a u b| counted in frames.
double temporal_iou(Interval a, Interval b);

struct ScoredInterval {
  Interval interval;
  double score = 0.0;
  std::size_t video = 0;
};

struct GroundTruth {
  Interval interval;
  std::size_t video = 0;
};

/// Greedy one-to-one matching in descending score order (stable for equal
/// scores). A prediction is a true positive when the unmatched ground truth of
/// its video with the highest IoU (lowest index on ties) reaches `iou_threshold`.
/// AP = sum of precision at true-positive ranks / number of ground truths.
/// With no ground truth: 1 if there are no predictions either, else 0.
double average_precision(std::span<const ScoredInterval> predictions, std::span<const GroundTruth> truth,
                         double iou_threshold);

inline constexpr double kIouThresholds[] = {0.1, 0.2, 0.3, 0.4, 0.5};

}  // namespace wogma::eval
