// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wogma/ad/random.hpp"
#include "wogma/ad/tape.hpp"
#include "wogma/model/config.hpp"

namespace wogma::model {

/// Video-level top-K pooled score s^c and its probability p_c = sigmoid(s^c).
struct VideoScore {
  ad::Var score;  // [n_c]
  ad::Var prob;   // [n_c]
};

/// Per-clip class assignment: 0 is background, c >= 1 an action class.
using PseudoLabels = std::vector<int>;

/// Branch that looks at the whole sequence (past and future clips) to score
/// clips and derive pseudo labels for the online branch.
class PseudoLabelBranch {
 public:
  PseudoLabelBranch(const ModelConfig& config, ad::ParameterStore& store, ad::Rng& rng);

  /// Stack of same-length temporal convolutions + relu; identity when
  /// long-range modeling is ablated.
  ad::Var temporal_stack(ad::Tape& tape, const ad::Var& features) const;
  /// One affine layer per clip: [L x C_f] -> raw scores [L x n_c].
  ad::Var clip_scores(ad::Tape& tape, const ad::Var& features) const;

 private:
  ModelConfig config_;
  std::vector<ad::Parameter*> conv_w_;
  std::vector<ad::Parameter*> conv_b_;
  ad::Parameter* score_w_ = nullptr;
  ad::Parameter* score_b_ = nullptr;
};

VideoScore topk_video_score(const ad::Var& scores, std::size_t kappa);

/// Multiple-instance loss on video probabilities. For the positive-label term
/// this is -sum_c y_c log p_c; negative labels add -(1 - y_c) log(1 - p_c).
ad::Var mil_loss(const ad::Var& video_prob, std::span<const double> labels);

/// Two-stage thresholding: a class survives iff its video probability is at
/// least theta_class and the video label is positive; a clip takes a surviving
/// class iff its clip probability is at least theta_score (highest probability
/// wins among several). Everything else is background.
PseudoLabels generate_pseudo_labels(const ad::Tensor& clip_probs, const ad::Tensor& video_probs, double theta_class,
                                    double theta_score, std::span<const double> labels);

}  // namespace wogma::model
