// SPDX-License-Identifier: Apache-2.0
#include "wogma/model/oamb.hpp"

#include <algorithm>
#include <string>

#include "wogma/ad/ops.hpp"
#include "wogma/error.hpp"

namespace wogma::model {

using ad::Shape;
using ad::Tensor;
using ad::Var;

OnlineBranch::OnlineBranch(const ModelConfig& config, ad::ParameterStore& store, ad::Rng& rng) : config_(config) {
  const std::size_t h = config.hidden, cf = config.feature_dim, out = config.classes + 1;
  lstm_wx_ = &store.add("oamb.lstm.input_weight", ad::uniform_init(Shape{cf, 4 * h}, h, rng));
  lstm_wh_ = &store.add("oamb.lstm.hidden_weight", ad::uniform_init(Shape{h, 4 * h}, h, rng));
  lstm_b_ = &store.add("oamb.lstm.bias", Tensor(Shape{4 * h}));
  out_w_ = &store.add("oamb.out.weight", ad::uniform_init(Shape{h, out}, h, rng));
  out_b_ = &store.add("oamb.out.bias", Tensor(Shape{out}));
}

ad::LstmState OnlineBranch::step(ad::Tape& tape, const ad::LstmState& prev, const Var& feature) const {
  return ad::lstm_cell(prev.h, prev.c, feature,
                       ad::LstmWeights{tape.parameter(*lstm_wx_), tape.parameter(*lstm_wh_), tape.parameter(*lstm_b_)});
}

Var OnlineBranch::forward(ad::Tape& tape, const Var& features) const {
  if (features.value().rank() != 2 || features.shape()[1] != config_.feature_dim) {
    throw DimensionError("OnlineBranch: features " + ad::shape_string(features.shape()) + " do not match C_f " +
                         std::to_string(config_.feature_dim));
  }
  const std::size_t len = features.shape()[0];
  ad::LstmState state{tape.constant(Tensor(Shape{config_.hidden})), tape.constant(Tensor(Shape{config_.hidden}))};
  std::vector<Var> hidden;
  hidden.reserve(len);
  for (std::size_t i = 0; i < len; ++i) {
    state = step(tape, state, ad::row(features, i));
    hidden.push_back(state.h);
  }
  Var h = ad::stack_rows(hidden);
  return ad::softmax(ad::affine(h, tape.parameter(*out_w_), tape.parameter(*out_b_)));
}

OnlineState OnlineBranch::initial_state() const {
  return OnlineState{Tensor(Shape{config_.hidden}), Tensor(Shape{config_.hidden}), 0};
}

Tensor OnlineBranch::online_step(OnlineState& state, std::span<const double> feature) const {
  if (feature.size() != config_.feature_dim) throw DimensionError("online_step: feature width mismatch");
  ad::Tape tape;
  Var f = tape.constant(Tensor(Shape{feature.size()}, std::vector<double>(feature.begin(), feature.end())));
  ad::LstmState next = step(tape, ad::LstmState{tape.constant(state.h), tape.constant(state.c)}, f);
  Var logits = ad::affine(ad::reshape(next.h, Shape{1, config_.hidden}), tape.parameter(*out_w_),
                          tape.parameter(*out_b_));
  Tensor probs = ad::softmax(logits).value().reshaped(Shape{config_.classes + 1});
  state.h = next.h.value();
  state.c = next.c.value();
  ++state.clips_seen;
  return probs;
}

Var frame_loss(const Var& probs, std::span<const int> labels) { return ad::cross_entropy(probs, labels); }

Var online_video_prob(const Var& probs, std::size_t kappa) {
  const std::size_t len = probs.shape().at(0), width = probs.shape().at(1);
  // background column 0 is not pooled
  std::vector<Var> pooled;
  for (std::size_t c = 1; c < width; ++c) {
    Var col = ad::reshape(ad::column(probs, c), Shape{len, 1});
    pooled.push_back(ad::topk_mean(col, kappa));
  }
  if (pooled.size() == 1) return pooled[0];
  return ad::reshape(ad::stack_rows(pooled), Shape{pooled.size()});
}

Var mil_loss_online(const Var& probs, std::span<const double> labels, std::size_t kappa) {
  return ad::binary_cross_entropy(online_video_prob(probs, kappa), labels);
}

double prefix_video_prob(const Tensor& probs, std::size_t k, std::size_t kappa, std::size_t action) {
  if (probs.rank() != 2) throw DimensionError("prefix_video_prob: probabilities must be [L x (n_c + 1)]");
  const std::size_t len = probs.dim(0), width = probs.dim(1);
  if (k < 1 || k > len) {
    throw DimensionError("prefix_video_prob: prefix " + std::to_string(k) + " outside 1.." + std::to_string(len));
  }
  if (action < 1 || action >= width) throw DimensionError("prefix_video_prob: action class out of range");
  std::vector<double> col(k);
  for (std::size_t i = 0; i < k; ++i) col[i] = probs.at(i, action);
  const std::size_t top = ad::topk_count(k, kappa);
  double acc = 0.0;
  for (std::size_t i : ad::topk_indices(col, top)) acc += col[i];
  return acc / static_cast<double>(top);
}

std::vector<DetectionInstance> extract_instances(std::span<const double> action_probs, double threshold,
                                                 const ClipWindowing& windowing, int action) {
  std::vector<DetectionInstance> out;
  const std::size_t len = action_probs.size();
  std::size_t i = 0;
  while (i < len) {
    if (action_probs[i] < threshold) {
      ++i;
      continue;
    }
    std::size_t j = i;
    double acc = 0.0;
    while (j < len && action_probs[j] >= threshold) acc += action_probs[j++];
    DetectionInstance inst;
    inst.first_clip = i;
    inst.last_clip = j - 1;
    inst.start_frame = windowing.start_frame(i);
    inst.end_frame = windowing.end_frame(j - 1);
    inst.score = acc / static_cast<double>(j - i);
    inst.action = action;
    out.push_back(inst);
    i = j;
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const DetectionInstance& a, const DetectionInstance& b) { return a.score > b.score; });
  return out;
}

std::vector<DetectionInstance> extract_instances(const Tensor& probs, double threshold, const ClipWindowing& windowing,
                                                 std::size_t action) {
  if (probs.rank() != 2 || action >= probs.dim(1)) throw DimensionError("extract_instances: bad probability table");
  std::vector<double> col(probs.dim(0));
  for (std::size_t i = 0; i < col.size(); ++i) col[i] = probs.at(i, action);
  return extract_instances(col, threshold, windowing, static_cast<int>(action));
}

}  // namespace wogma::model
