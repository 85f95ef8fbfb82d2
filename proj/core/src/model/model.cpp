// SPDX-License-Identifier: Apache-2.0
#include "wogma/model/model.hpp"

#include "wogma/ad/ops.hpp"

namespace wogma::model {

Model::Model(const ModelConfig& config, const graph::SkeletonGraph& skeleton, std::uint64_t seed)
    : config_(config),
      rng_(seed),
      lfem_(config, skeleton, store_, rng_),
      cpgb_(config, store_, rng_),
      oamb_(config, store_, rng_) {}

Outputs Model::forward(ad::Tape& tape, const ad::Tensor& clips, std::size_t kappa) const {
  Outputs out;
  out.features = lfem_.forward(tape, clips);
  out.scores = cpgb_.clip_scores(tape, cpgb_.temporal_stack(tape, out.features));
  out.clip_probs = ad::sigmoid(out.scores);
  out.video = topk_video_score(out.scores, kappa);
  out.online = oamb_.forward(tape, out.features);
  return out;
}

ad::Var Model::online_forward(ad::Tape& tape, const ad::Tensor& clips) const {
  return oamb_.forward(tape, lfem_.forward(tape, clips));
}

ad::Tensor Model::online_timeline(const ad::Tensor& clips) const {
  ad::Tape tape;
  return online_forward(tape, clips).value();
}

ad::Tensor Model::clip_features(const ad::Tensor& clips) const {
  ad::Tape tape;
  return lfem_.forward(tape, clips).value();
}

}  // namespace wogma::model
