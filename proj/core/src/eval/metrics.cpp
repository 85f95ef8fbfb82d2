// SPDX-License-Identifier: Apache-2.0
#include "wogma/eval/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "wogma/error.hpp"

namespace wogma::eval {

std::optional<double> roc_auc(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw DimensionError("roc_auc: probabilities and labels differ in length");
  const std::size_t n = probs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && probs[order[j + 1]] == probs[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double pos = 0.0, neg = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == 1) {
      pos += 1.0;
      rank_sum += rank[i];
    } else {
      neg += 1.0;
    }
  }
  if (pos == 0.0 || neg == 0.0) return std::nullopt;
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

ClassificationMetrics classification_metrics(std::span<const double> probs, std::span<const int> labels,
                                             double threshold) {
  if (probs.size() != labels.size()) {
    throw DimensionError("classification_metrics: probabilities and labels differ in length");
  }
  if (probs.empty()) throw DataError("classification_metrics: no samples");
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("classification_metrics: labels must be 0 or 1");
    const bool pred = probs[i] > threshold;
    const bool truth = labels[i] == 1;
    correct += pred == truth;
    tp += pred && truth;
    fp += pred && !truth;
    fn += !pred && truth;
  }
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(probs.size());
  const std::size_t denom = 2 * tp + fp + fn;
  m.f1 = denom ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
  m.auc = roc_auc(probs, labels);
  return m;
}

double temporal_iou(Interval a, Interval b) {
  const std::size_t lo = std::max(a.start, b.start);
  const std::size_t hi = std::min(a.end, b.end);
  const std::size_t inter = hi >= lo ? hi - lo + 1 : 0;
  const std::size_t uni = (a.end - a.start + 1) + (b.end - b.start + 1) - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double average_precision(std::span<const ScoredInterval> predictions, std::span<const GroundTruth> truth,
                         double iou_threshold) {
  if (truth.empty()) return predictions.empty() ? 1.0 : 0.0;
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return predictions[a].score > predictions[b].score; });
  std::vector<bool> used(truth.size(), false);
  std::size_t tp = 0;
  double precision_sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const ScoredInterval& p = predictions[order[rank]];
    double best = -1.0;
    std::size_t best_gt = truth.size();
    for (std::size_t g = 0; g < truth.size(); ++g) {
      if (used[g] || truth[g].video != p.video) continue;
      const double iou = temporal_iou(p.interval, truth[g].interval);
      if (iou > best) {
        best = iou;
        best_gt = g;
      }
    }
    if (best_gt < truth.size() && best >= iou_threshold) {
      used[best_gt] = true;
      ++tp;
      precision_sum += static_cast<double>(tp) / static_cast<double>(rank + 1);
    }
  }
  return precision_sum / static_cast<double>(truth.size());
}

}  // namespace wogma::eval
