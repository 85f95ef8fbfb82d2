// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wogma/ad/tape.hpp"

// Differentiable primitives. Every function records exactly one node on the
// tape of its first Var argument; all inputs must live on the same tape.
namespace wogma::ad {

enum class Activation { relu, sigmoid, softmax };

Var activation(const Var& x, Activation kind);
Var relu(const Var& x);
Var sigmoid(const Var& x);
/// Softmax over the last dimension, computed with max-subtraction.
Var softmax(const Var& x);

/// [m x k] * [k x n]
Var matmul(const Var& a, const Var& b);
/// x W + b with x [m x k], W [k x n], b [n].
Var affine(const Var& x, const Var& w, const Var& b);

Var add(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
/// Sum of all elements as a scalar.
Var sum(const Var& x);
Var reshape(const Var& x, Shape shape);

/// Row i of a matrix as a rank-1 tensor.
Var row(const Var& x, std::size_t i);
/// Column j of a matrix as a rank-1 tensor.
Var column(const Var& x, std::size_t j);
/// Contiguous range [begin, begin + count) of a rank-1 tensor.
Var slice(const Var& x, std::size_t begin, std::size_t count);
/// Stacks equally sized rank-1 tensors into a matrix.
Var stack_rows(std::span<const Var> rows);

/// Same-length 1D convolution over the first axis of F [L x C_in] with kernel
/// W [C_out x C_in x k] (k odd) and bias b [C_out]; zero padding (k-1)/2.
Var temporal_conv1d(const Var& f, const Var& w, const Var& b);

struct LstmWeights {
  Var input;   // [C_f x 4H], gate blocks ordered input, forget, candidate, output
  Var hidden;  // [H x 4H]
  Var bias;    // [4H]
};

struct LstmState {
  Var h;
  Var c;
};

/// One step of the standard gated recurrence.
LstmState lstm_cell(const Var& h_prev, const Var& c_prev, const Var& f, const LstmWeights& w);

/// K = max(1, floor(L / kappa)).
std::size_t topk_count(std::size_t length, std::size_t kappa);
/// Indices of the K largest entries; ties go to the lower index.
std::vector<std::size_t> topk_indices(std::span<const double> values, std::size_t k);
/// Per-column mean of the K largest entries of x [L x n] -> [n]; the gradient
/// reaches only the selected entries.
Var topk_mean(const Var& x, std::size_t kappa);

inline constexpr double kProbClamp = 1e-7;

/// -sum_c [y_c log p_c + (1 - y_c) log(1 - p_c)], p clamped to
/// [kProbClamp, 1 - kProbClamp].
Var binary_cross_entropy(const Var& p, std::span<const double> targets);
/// -(1/L) sum_i log probs[i, labels[i]], probabilities clamped below at kProbClamp.
Var cross_entropy(const Var& probs, std::span<const int> labels);

/// out[b] = A x[b] for a constant A [P x P] and x [B x P x C].
Var block_matmul(const Tensor& a, const Var& x);
/// Mean over the window axis: [L x tau x N x C] -> [L x N x C].
Var window_mean(const Var& x);
/// Repeats each row block tau times: [L x N x C] -> [L x tau x N x C].
Var tile_window(const Var& x, std::size_t tau);
/// Learned weighted sum over the window axis, no mixing across joints:
/// out[l, n, o] = sum_t sum_i W[o, t, i] x[l, t, n, i].
Var collapse_time(const Var& x, const Var& w);
/// collapse_time of tile_window(y, tau) for y [L x N x C_in], computed through
/// the time-summed kernel sum_t W[o, t, i].
Var collapse_tiled(const Var& y, const Var& w);

}  // namespace wogma::ad
