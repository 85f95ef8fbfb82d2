// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "wogma/ad/tape.hpp"

namespace wogma::ad {

/// Builds a scalar on `tape` from leaf variables holding `inputs`.
using ScalarFn = std::function<Var(Tape& tape, std::span<const Var> inputs)>;
/// Builds an arbitrary-shaped output from leaf variables.
using TensorFn = ScalarFn;

/// Relative error used throughout:
///   max(0, |analytic - numeric| - resolution) / max(1e-8, |numeric|).
/// `resolution` is the rounding uncertainty of the difference quotient itself;
/// disagreement below it carries no information about the analytic gradient.
double relative_error(double analytic, double numeric, double resolution = 0.0);

/// Rounding uncertainty of (up - down) / 2h when each evaluation is exact to
/// within 2 * DBL_EPSILON relative (about four ulps of a value in [1, 2)).
double difference_resolution(double up, double down, double h);

/// Max relative error between the tape gradient and central differences with
/// step h, over every element of every input, net of difference_resolution.
double grad_check(const ScalarFn& fn, const std::vector<Tensor>& inputs, double h = 1e-6);

/// Same check for an op with a tensor output: the output is contracted with a
/// fixed random weighting (seeded) to obtain a scalar.
double grad_check_op(const TensorFn& op, const std::vector<Tensor>& inputs, double h = 1e-6,
                     std::uint64_t seed = 1234);

/// Check over every element of every parameter in `params`; `fn` must read the
/// parameters through tape.parameter().
double grad_check_params(const std::function<Var(Tape&)>& fn, ParameterStore& params, double h = 1e-6);

}  // namespace wogma::ad
