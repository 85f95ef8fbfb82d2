// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wogma/ad/random.hpp"
#include "wogma/ad/tape.hpp"
#include "wogma/graph/skeleton_graph.hpp"
#include "wogma/model/config.hpp"

namespace wogma::model {

/// Sliding-window layout of clips over a frame sequence.
struct ClipWindowing {
  std::size_t tau = 20;
  std::size_t stride = 20;

  /// floor((T - tau) / stride) + 1; throws DataError when T < tau.
  std::size_t clip_count(std::size_t frames) const;
  /// 1-indexed inclusive frame range of clip i (0-based index).
  std::size_t start_frame(std::size_t clip) const { return clip * stride + 1; }
  std::size_t end_frame(std::size_t clip) const { return clip * stride + tau; }
};

/// Cuts frames [T x N x C] into clips [L x tau x N x C]; a trailing remainder
/// shorter than a window is dropped.
ad::Tensor split_clips(const ad::Tensor& frames, const ClipWindowing& windowing);

/// Multi-scale graph convolution on a batch of clips [L x tau x N x C_in]:
/// relu(sum_m norm(A_(tau,m)) X Theta_m), Theta_m [C_in x C_out].
/// Uses the Kronecker factors of the tiled adjacency.
ad::Var g3d_conv(const ad::Var& clips, const graph::MultiScaleAdjacency& adjacency, std::span<const ad::Var> theta);
/// The window-constant value of g3d_conv for per-clip poses [L x N x C_in]
/// (the window mean of the clips): [L x N x C_out].
ad::Var g3d_conv_window(const ad::Var& pose, const graph::MultiScaleAdjacency& adjacency,
                        std::span<const ad::Var> theta);
/// Same result through the dense [tau N x tau N] matrices.
ad::Var g3d_conv_dense(const ad::Var& clips, const graph::MultiScaleAdjacency& adjacency,
                       std::span<const ad::Var> theta);

/// relu(flatten(x) W + b) per clip: [L x N x C_out] -> [L x C_f].
ad::Var aggregate_joints(const ad::Var& x, const ad::Var& w, const ad::Var& b);

/// Local feature extraction: clips -> one feature vector per clip.
class LocalFeatureExtractor {
 public:
  LocalFeatureExtractor(const ModelConfig& config, const graph::SkeletonGraph& skeleton, ad::ParameterStore& store,
                        ad::Rng& rng);

  /// [L x tau x N x C] -> [L x C_f]
  ad::Var forward(ad::Tape& tape, const ad::Tensor& clips) const;

  const graph::MultiScaleAdjacency& adjacency() const { return adjacency_; }

 private:
  ModelConfig config_;
  graph::MultiScaleAdjacency adjacency_;
  std::vector<std::vector<ad::Parameter*>> theta_;  // [layer][scale]
  ad::Parameter* collapse_ = nullptr;
  ad::Parameter* agg_w_ = nullptr;
  ad::Parameter* agg_b_ = nullptr;
  ad::Parameter* proj_w_ = nullptr;  // w/o local: raw-clip projection
  ad::Parameter* proj_b_ = nullptr;
};

}  // namespace wogma::model
