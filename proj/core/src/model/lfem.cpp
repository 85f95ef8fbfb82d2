// SPDX-License-Identifier: Apache-2.0
#include "wogma/model/lfem.hpp"

#include <algorithm>
#include <string>

#include "wogma/ad/ops.hpp"
#include "wogma/error.hpp"

namespace wogma::model {

using ad::Shape;
using ad::Tensor;
using ad::Var;

void ModelConfig::validate() const {
  if (joints == 0 || channels == 0) throw ConfigError("joints and channels must be positive");
  if (tau == 0 || stride == 0) throw ConfigError("tau and stride must be >= 1");
  if (g3d_layers == 0) throw ConfigError("g3d_layers must be >= 1");
  if (g3d_channels == 0 || feature_dim == 0 || hidden == 0) throw ConfigError("layer widths must be positive");
  if (classes == 0) throw ConfigError("classes must be >= 1");
  if (temporal_kernel % 2 == 0) {
    throw ConfigError("temporal_kernel must be odd, got " + std::to_string(temporal_kernel));
  }
}

std::size_t ClipWindowing::clip_count(std::size_t frames) const {
  if (tau == 0 || stride == 0) throw ConfigError("tau and stride must be >= 1");
  if (frames < tau) {
    throw DataError("sequence of " + std::to_string(frames) + " frames is shorter than one window (" +
                    std::to_string(tau) + ")");
  }
  return (frames - tau) / stride + 1;
}

Tensor split_clips(const Tensor& frames, const ClipWindowing& windowing) {
  if (frames.rank() != 3) throw DimensionError("split_clips: frames must be [T x N x C]");
  const std::size_t len = windowing.clip_count(frames.dim(0));
  const std::size_t frame_size = frames.dim(1) * frames.dim(2);
  const std::size_t clip_size = windowing.tau * frame_size;
  Tensor clips(Shape{len, windowing.tau, frames.dim(1), frames.dim(2)});
  for (std::size_t i = 0; i < len; ++i)
    std::copy_n(frames.data() + i * windowing.stride * frame_size, clip_size, clips.data() + i * clip_size);
  return clips;
}

namespace {

void check_theta(const Var& clips, const graph::MultiScaleAdjacency& adj, std::span<const Var> theta) {
  if (clips.value().rank() != 4) throw DimensionError("g3d_conv: clips must be [L x tau x N x C]");
  if (theta.size() != adj.scales + 1) {
    throw ConfigError("g3d_conv: " + std::to_string(theta.size()) + " weight blocks for " +
                      std::to_string(adj.scales + 1) + " scales");
  }
  if (clips.shape()[1] != adj.tau || clips.shape()[2] != adj.joints) {
    throw DimensionError("g3d_conv: clips " + ad::shape_string(clips.shape()) + " do not match window " +
                         std::to_string(adj.tau) + " x " + std::to_string(adj.joints));
  }
}

}  // namespace

Var g3d_conv_window(const Var& pose, const graph::MultiScaleAdjacency& adj, std::span<const Var> theta) {
  if (pose.value().rank() != 3 || pose.shape()[1] != adj.joints) {
    throw DimensionError("g3d_conv_window: input " + ad::shape_string(pose.shape()) + " is not [L x " +
                         std::to_string(adj.joints) + " x C]");
  }
  if (theta.size() != adj.scales + 1) {
    throw ConfigError("g3d_conv: " + std::to_string(theta.size()) + " weight blocks for " +
                      std::to_string(adj.scales + 1) + " scales");
  }
  const std::size_t len = pose.shape()[0], n = adj.joints, cin = pose.shape()[2];
  Var acc;
  for (std::size_t m = 0; m < theta.size(); ++m) {
    Var mixed = ad::block_matmul(adj.spatial[m], pose);
    Var term = ad::matmul(ad::reshape(mixed, Shape{len * n, cin}), theta[m]);
    acc = m == 0 ? term : ad::add(acc, term);
  }
  const std::size_t cout = acc.shape()[1];
  return ad::relu(ad::reshape(acc, Shape{len, n, cout}));
}

Var g3d_conv(const Var& clips, const graph::MultiScaleAdjacency& adj, std::span<const Var> theta) {
  check_theta(clips, adj, theta);
  // norm(A_(tau,m)) X = 1_tau (x) S_m mean_t(X_t)
  return ad::tile_window(g3d_conv_window(ad::window_mean(clips), adj, theta), adj.tau);
}

Var g3d_conv_dense(const Var& clips, const graph::MultiScaleAdjacency& adj, std::span<const Var> theta) {
  check_theta(clips, adj, theta);
  const std::size_t len = clips.shape()[0], n = adj.joints, tau = adj.tau, cin = clips.shape()[3];
  Var flat = ad::reshape(clips, Shape{len, tau * n, cin});
  Var acc;
  for (std::size_t m = 0; m < theta.size(); ++m) {
    Var mixed = ad::block_matmul(adj.dense[m], flat);
    Var term = ad::matmul(ad::reshape(mixed, Shape{len * tau * n, cin}), theta[m]);
    acc = m == 0 ? term : ad::add(acc, term);
  }
  const std::size_t cout = acc.shape()[1];
  return ad::relu(ad::reshape(acc, Shape{len, tau, n, cout}));
}

Var aggregate_joints(const Var& x, const Var& w, const Var& b) {
  if (x.value().rank() != 3) throw DimensionError("aggregate_joints: input must be [L x N x C]");
  const std::size_t len = x.shape()[0];
  return ad::relu(ad::affine(ad::reshape(x, Shape{len, x.shape()[1] * x.shape()[2]}), w, b));
}

LocalFeatureExtractor::LocalFeatureExtractor(const ModelConfig& config, const graph::SkeletonGraph& skeleton,
                                             ad::ParameterStore& store, ad::Rng& rng)
    : config_(config) {
  config_.validate();
  if (skeleton.joints != config.joints) {
    throw ConfigError("skeleton has " + std::to_string(skeleton.joints) + " joints, config expects " +
                      std::to_string(config.joints));
  }
  const std::size_t n = config.joints, tau = config.tau, cf = config.feature_dim, c = config.g3d_channels;
  if (config.ablate_local) {
    const std::size_t raw = tau * n * config.channels;
    proj_w_ = &store.add("lfem.proj.weight", ad::uniform_init(Shape{raw, cf}, raw, rng));
    proj_b_ = &store.add("lfem.proj.bias", Tensor(Shape{cf}));
    return;
  }
  adjacency_ = graph::build_multiscale(skeleton, config.scales, tau);
  std::size_t cin = config.channels;
  for (std::size_t layer = 0; layer < config.g3d_layers; ++layer) {
    auto& blocks = theta_.emplace_back();
    for (std::size_t m = 0; m <= config.scales; ++m) {
      const std::string name = "lfem.g3d" + std::to_string(layer) + ".theta" + std::to_string(m);
      blocks.push_back(&store.add(name, ad::uniform_init(Shape{cin, c}, cin * (config.scales + 1), rng)));
    }
    cin = c;
  }
  collapse_ = &store.add("lfem.collapse.weight", ad::uniform_init(Shape{c, tau, c}, tau * c, rng));
  agg_w_ = &store.add("lfem.agg.weight", ad::uniform_init(Shape{n * c, cf}, n * c, rng));
  agg_b_ = &store.add("lfem.agg.bias", Tensor(Shape{cf}));
}

Var LocalFeatureExtractor::forward(ad::Tape& tape, const Tensor& clips) const {
  if (clips.rank() != 4 || clips.dim(1) != config_.tau || clips.dim(2) != config_.joints ||
      clips.dim(3) != config_.channels) {
    throw DimensionError("LocalFeatureExtractor: clips " + ad::shape_string(clips.shape()) + " do not match config");
  }
  const std::size_t len = clips.dim(0);
  Var x = tape.constant(clips);
  if (config_.ablate_local) {
    Var flat = ad::reshape(x, Shape{len, config_.tau * config_.joints * config_.channels});
    return ad::affine(flat, tape.parameter(*proj_w_), tape.parameter(*proj_b_));
  }
  // Every G3D output is constant over its window, so the layers run on one
  // pose per clip and the window is only re-expanded inside collapse_tiled.
  Var pose = ad::window_mean(x);
  for (const auto& blocks : theta_) {
    std::vector<Var> theta;
    for (ad::Parameter* p : blocks) theta.push_back(tape.parameter(*p));
    pose = g3d_conv_window(pose, adjacency_, theta);
  }
  Var skeleton = ad::collapse_tiled(pose, tape.parameter(*collapse_));
  return aggregate_joints(skeleton, tape.parameter(*agg_w_), tape.parameter(*agg_b_));
}

}  // namespace wogma::model
