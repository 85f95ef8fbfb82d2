// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wogma/ad/ops.hpp"
#include "wogma/ad/random.hpp"
#include "wogma/ad/tape.hpp"
#include "wogma/model/config.hpp"
#include "wogma/model/lfem.hpp"

namespace wogma::model {

/// Recurrent state carried across clips of one stream.
struct OnlineState {
  ad::Tensor h;
  ad::Tensor c;
  std::size_t clips_seen = 0;
};

struct DetectionInstance {
  std::size_t start_frame = 0;  // 1-indexed, inclusive
  std::size_t end_frame = 0;
  double score = 0.0;
  int action = 1;
  std::size_t first_clip = 0;  // 0-based member clip range
  std::size_t last_clip = 0;
};

/// Causal branch: an LSTM over clip features followed by a softmax over
/// n_c action classes plus background (index 0).
class OnlineBranch {
 public:
  OnlineBranch(const ModelConfig& config, ad::ParameterStore& store, ad::Rng& rng);

  /// Probabilities for every clip, row i computed from clips 0..i only:
  /// [L x C_f] -> [L x (n_c + 1)].
  ad::Var forward(ad::Tape& tape, const ad::Var& features) const;

  OnlineState initial_state() const;
  /// Advances the state by one clip and returns that clip's probabilities.
  ad::Tensor online_step(OnlineState& state, std::span<const double> feature) const;

 private:
  ad::LstmState step(ad::Tape& tape, const ad::LstmState& prev, const ad::Var& feature) const;

  ModelConfig config_;
  ad::Parameter* lstm_wx_ = nullptr;
  ad::Parameter* lstm_wh_ = nullptr;
  ad::Parameter* lstm_b_ = nullptr;
  ad::Parameter* out_w_ = nullptr;
  ad::Parameter* out_b_ = nullptr;
};

/// -(1/L) sum_i log A[i, label_i].
ad::Var frame_loss(const ad::Var& probs, std::span<const int> labels);

/// Top-K pooled action-class probabilities of the online branch, [n_c].
ad::Var online_video_prob(const ad::Var& probs, std::size_t kappa);
/// Binary cross-entropy of online_video_prob against the video labels.
ad::Var mil_loss_online(const ad::Var& probs, std::span<const double> labels, std::size_t kappa);

/// Video probability of `action` from the first k clips only.
double prefix_video_prob(const ad::Tensor& probs, std::size_t k, std::size_t kappa, std::size_t action = 1);

/// Maximal runs of clips with probability >= threshold, sorted by mean
/// probability, highest first (ties keep temporal order).
std::vector<DetectionInstance> extract_instances(std::span<const double> action_probs, double threshold,
                                                 const ClipWindowing& windowing, int action = 1);
std::vector<DetectionInstance> extract_instances(const ad::Tensor& probs, double threshold,
                                                 const ClipWindowing& windowing, std::size_t action = 1);

}  // namespace wogma::model
