// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "wogma/ad/tape.hpp"
#include "wogma/graph/skeleton_graph.hpp"
#include "wogma/model/config.hpp"
#include "wogma/model/cpgb.hpp"
#include "wogma/model/lfem.hpp"
#include "wogma/model/oamb.hpp"

namespace wogma::model {

/// Forward values of both branches for one video.
struct Outputs {
  ad::Var features;    // F0 [L x C_f]
  ad::Var scores;      // S [L x n_c]
  ad::Var clip_probs;  // sigmoid(S)
  VideoScore video;    // top-K pooled
  ad::Var online;      // A [L x (n_c + 1)]
};

/// Local feature extractor feeding a pseudo-label branch (training only) and
/// an online branch (training and inference). Parameters are shared by all
/// clips; the object owns them and is neither copyable nor movable.
class Model {
 public:
  Model(const ModelConfig& config, const graph::SkeletonGraph& skeleton, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  ad::ParameterStore& params() { return store_; }
  const ad::ParameterStore& params() const { return store_; }
  ClipWindowing windowing() const { return ClipWindowing{config_.tau, config_.stride}; }

  /// [T x N x C] frames -> [L x tau x N x C] clips.
  ad::Tensor clips(const ad::Tensor& frames) const { return split_clips(frames, windowing()); }

  Outputs forward(ad::Tape& tape, const ad::Tensor& clips, std::size_t kappa) const;
  /// Feature extractor and online branch only, as used at inference.
  ad::Var online_forward(ad::Tape& tape, const ad::Tensor& clips) const;
  ad::Tensor online_timeline(const ad::Tensor& clips) const;
  ad::Tensor clip_features(const ad::Tensor& clips) const;

  const LocalFeatureExtractor& lfem() const { return lfem_; }
  const PseudoLabelBranch& cpgb() const { return cpgb_; }
  const OnlineBranch& oamb() const { return oamb_; }

 private:
  ModelConfig config_;
  ad::ParameterStore store_;
  ad::Rng rng_;
  LocalFeatureExtractor lfem_;
  PseudoLabelBranch cpgb_;
  OnlineBranch oamb_;
};

}  // namespace wogma::model
