// SPDX-License-Identifier: Apache-2.0
#include "wogma/graph/skeleton_graph.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <queue>
#include <sstream>
#include <string>

#include "wogma/error.hpp"

namespace wogma::graph {

using ad::Shape;
using ad::Tensor;

SkeletonGraph build_spatial_graph(std::span<const Edge> edges, std::size_t joints) {
  if (joints == 0) throw ConfigError("skeleton graph needs at least one joint");
  SkeletonGraph g;
  g.joints = joints;
  g.adjacency = Tensor(Shape{joints, joints});
  for (const auto& [i, j] : edges) {
    if (i < 1 || j < 1 || i > joints || j > joints) {
      throw ConfigError("edge (" + std::to_string(i) + ", " + std::to_string(j) + ") outside joints 1.." +
                        std::to_string(joints));
    }
    if (i == j) throw ConfigError("self-loop on joint " + std::to_string(i) + " in edge list");
    g.adjacency.at(i - 1, j - 1) = 1.0;
    g.adjacency.at(j - 1, i - 1) = 1.0;
    g.edges.emplace_back(i, j);
  }
  return g;
}

std::vector<Edge> default_edges() {
  // 0-based layout: 0 nose, 1 neck, 2-4 right arm, 5-7 left arm, 8-10 right leg,
  // 11-13 left leg, 14/15 eyes, 16/17 ears. Stored 1-indexed.
  return {{2, 3},  {2, 6},  {3, 4},   {4, 5},   {6, 7},   {7, 8},   {2, 9},   {9, 10}, {10, 11},
          {2, 12}, {12, 13}, {13, 14}, {2, 1}, {1, 15}, {15, 17}, {1, 16}, {16, 18}};
}

SkeletonGraph default_skeleton() {
  const auto edges = default_edges();
  return build_spatial_graph(edges, kDefaultJoints);
}

std::vector<Edge> parse_edge_list(std::istream& in) {
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    long long i = 0, j = 0;
    if (!(ss >> i)) continue;
    std::string rest;
    if (!(ss >> j) || (ss >> rest) || i < 1 || j < 1) {
      throw DataError("edge list line " + std::to_string(lineno) + ": expected two positive joint indices");
    }
    edges.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  }
  return edges;
}

std::vector<Edge> load_edge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edge file " + path.string());
  return parse_edge_list(in);
}

std::vector<std::vector<std::size_t>> hop_distances(const Tensor& adjacency) {
  const std::size_t n = adjacency.dim(0);
  constexpr auto kInf = std::numeric_limits<std::size_t>::max();
  std::vector<std::vector<std::size_t>> dist(n, std::vector<std::size_t>(n, kInf));
  for (std::size_t s = 0; s < n; ++s) {
    std::queue<std::size_t> frontier;
    dist[s][s] = 0;
    frontier.push(s);
    while (!frontier.empty()) {
      const std::size_t u = frontier.front();
      frontier.pop();
      for (std::size_t v = 0; v < n; ++v) {
        if (adjacency.at(u, v) != 0.0 && dist[s][v] == kInf) {
          dist[s][v] = dist[s][u] + 1;
          frontier.push(v);
        }
      }
    }
  }
  return dist;
}

std::vector<Tensor> disentangle_multiscale(const Tensor& adjacency, std::size_t max_scale) {
  const std::size_t n = adjacency.dim(0);
  const auto dist = hop_distances(adjacency);
  std::vector<Tensor> scales(max_scale + 1, Tensor(Shape{n, n}));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (dist[i][j] <= max_scale) scales[dist[i][j]].at(i, j) = 1.0;
  return scales;
}

Tensor tile_window(const Tensor& scale_adjacency, std::size_t tau) {
  if (tau == 0) throw ConfigError("window length tau must be >= 1");
  const std::size_t n = scale_adjacency.dim(0);
  const std::size_t big = tau * n;
  Tensor out(Shape{big, big});
  for (std::size_t p = 0; p < tau; ++p)
    for (std::size_t q = 0; q < tau; ++q)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          out.at(p * n + i, q * n + j) = (i == j || scale_adjacency.at(i, j) != 0.0) ? 1.0 : 0.0;
  return out;
}

Tensor normalize(const Tensor& adjacency) {
  const std::size_t n = adjacency.dim(0);
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += adjacency.at(i, j);
    inv_sqrt[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  Tensor out(adjacency.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = inv_sqrt[i] * adjacency.at(i, j) * inv_sqrt[j];
  return out;
}

MultiScaleAdjacency build_multiscale(const SkeletonGraph& g, std::size_t max_scale, std::size_t tau) {
  MultiScaleAdjacency ms;
  ms.scales = max_scale;
  ms.tau = tau;
  ms.joints = g.joints;
  for (const Tensor& a : disentangle_multiscale(g.adjacency, max_scale)) {
    ms.dense.push_back(normalize(tile_window(a, tau)));
    ms.spatial.push_back(normalize(tile_window(a, 1)));
  }
  return ms;
}

}  // namespace wogma::graph
