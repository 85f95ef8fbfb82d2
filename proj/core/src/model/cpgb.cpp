// SPDX-License-Identifier: Apache-2.0
#include "wogma/model/cpgb.hpp"

#include <string>

#include "wogma/ad/ops.hpp"
#include "wogma/error.hpp"

namespace wogma::model {

using ad::Shape;
using ad::Tensor;
using ad::Var;

PseudoLabelBranch::PseudoLabelBranch(const ModelConfig& config, ad::ParameterStore& store, ad::Rng& rng)
    : config_(config) {
  const std::size_t cf = config.feature_dim, k = config.temporal_kernel;
  if (!config.ablate_longrange) {
    for (std::size_t layer = 0; layer < config.temporal_layers; ++layer) {
      const std::string prefix = "cpgb.conv" + std::to_string(layer);
      conv_w_.push_back(&store.add(prefix + ".weight", ad::uniform_init(Shape{cf, cf, k}, cf * k, rng)));
      conv_b_.push_back(&store.add(prefix + ".bias", Tensor(Shape{cf})));
    }
  }
  score_w_ = &store.add("cpgb.score.weight", ad::uniform_init(Shape{cf, config.classes}, cf, rng));
  score_b_ = &store.add("cpgb.score.bias", Tensor(Shape{config.classes}));
}

Var PseudoLabelBranch::temporal_stack(ad::Tape& tape, const Var& features) const {
  Var x = features;
  for (std::size_t layer = 0; layer < conv_w_.size(); ++layer)
    x = ad::relu(ad::temporal_conv1d(x, tape.parameter(*conv_w_[layer]), tape.parameter(*conv_b_[layer])));
  return x;
}

Var PseudoLabelBranch::clip_scores(ad::Tape& tape, const Var& features) const {
  return ad::affine(features, tape.parameter(*score_w_), tape.parameter(*score_b_));
}

VideoScore topk_video_score(const Var& scores, std::size_t kappa) {
  Var s = ad::topk_mean(scores, kappa);
  return VideoScore{s, ad::sigmoid(s)};
}

Var mil_loss(const Var& video_prob, std::span<const double> labels) {
  return ad::binary_cross_entropy(video_prob, labels);
}

PseudoLabels generate_pseudo_labels(const Tensor& clip_probs, const Tensor& video_probs, double theta_class,
                                    double theta_score, std::span<const double> labels) {
  if (clip_probs.rank() != 2) throw DimensionError("generate_pseudo_labels: clip probabilities must be [L x n_c]");
  const std::size_t len = clip_probs.dim(0), classes = clip_probs.dim(1);
  if (video_probs.size() != classes || labels.size() != classes) {
    throw DimensionError("generate_pseudo_labels: " + std::to_string(classes) + " classes but " +
                         std::to_string(video_probs.size()) + " video probabilities and " +
                         std::to_string(labels.size()) + " labels");
  }
  std::vector<bool> survives(classes);
  for (std::size_t c = 0; c < classes; ++c) survives[c] = video_probs[c] >= theta_class && labels[c] > 0.5;

  PseudoLabels out(len, 0);
  for (std::size_t i = 0; i < len; ++i) {
    double best = -1.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = clip_probs.at(i, c);
      if (survives[c] && p >= theta_score && p > best) {
        best = p;
        out[i] = static_cast<int>(c) + 1;
      }
    }
  }
  return out;
}

}  // namespace wogma::model
