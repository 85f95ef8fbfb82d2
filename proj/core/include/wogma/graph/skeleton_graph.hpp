// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "wogma/ad/tensor.hpp"

namespace wogma::graph {

/// Undirected edge between two 1-indexed joints.
using Edge = std::pair<std::size_t, std::size_t>;

/// Spatial skeleton: N joints and a symmetric 0/1 adjacency with zero diagonal.
struct SkeletonGraph {
  std::size_t joints = 0;
  std::vector<Edge> edges;
  ad::Tensor adjacency;  // [N x N]
};

SkeletonGraph build_spatial_graph(std::span<const Edge> edges, std::size_t joints);

/// The 18-joint pose skeleton (nose, neck, shoulders, elbows, wrists, hips,
/// knees, ankles, eyes, ears); identical to the shipped skeleton18.edges file.
SkeletonGraph default_skeleton();
std::vector<Edge> default_edges();
inline constexpr std::size_t kDefaultJoints = 18;
inline constexpr std::size_t kNeck = 1;
inline constexpr std::size_t kRightHip = 8;
inline constexpr std::size_t kLeftHip = 11;

/// Parses `i j` pairs, one per line; blank lines and `#` comments are skipped.
std::vector<Edge> parse_edge_list(std::istream& in);
std::vector<Edge> load_edge_file(const std::filesystem::path& path);

/// Shortest-path hop counts; unreachable pairs get SIZE_MAX.
std::vector<std::vector<std::size_t>> hop_distances(const ad::Tensor& adjacency);

/// A_(m)[i][j] = 1 iff d(i, j) == m, for m = 0..max_scale. A_(0) is the identity.
std::vector<ad::Tensor> disentangle_multiscale(const ad::Tensor& adjacency, std::size_t max_scale);

/// tau x tau block matrix whose every block is A_(m) + I clipped to {0, 1}.
ad::Tensor tile_window(const ad::Tensor& scale_adjacency, std::size_t tau);

/// D^-1/2 A D^-1/2 with D the row sums; zero-degree rows stay zero.
ad::Tensor normalize(const ad::Tensor& adjacency);

/// Normalized spatio-temporal adjacency for each scale m = 0..M.
///
/// Because every block of a tiled matrix is the same A_(m) + I, its normalized
/// form factors as (1/tau) J_tau (x) S_m with S_m = normalize(A_(m) + I). Both the
/// dense [tau N x tau N] matrices and the N x N factors are kept; the model
/// uses the factors and tests hold them against the dense form.
struct MultiScaleAdjacency {
  std::size_t scales = 0;  // M
  std::size_t tau = 0;
  std::size_t joints = 0;
  std::vector<ad::Tensor> dense;    // M + 1 matrices [tau N x tau N]
  std::vector<ad::Tensor> spatial;  // M + 1 matrices [N x N]
};

MultiScaleAdjacency build_multiscale(const SkeletonGraph& g, std::size_t max_scale, std::size_t tau);

}  // namespace wogma::graph
