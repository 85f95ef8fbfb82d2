// SPDX-License-Identifier: Apache-2.0
#include "wogma/ad/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wogma/ad/ops.hpp"
#include "wogma/ad/random.hpp"

namespace wogma::ad {
namespace {

double evaluate(const ScalarFn& fn, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& t : inputs) vars.push_back(tape.variable(t));
  return fn(tape, vars).value()[0];
}

}  // namespace

double relative_error(double analytic, double numeric, double resolution) {
  return std::max(0.0, std::abs(analytic - numeric) - resolution) / std::max(1e-8, std::abs(numeric));
}

double difference_resolution(double up, double down, double h) {
  const double eps = 2.0 * std::numeric_limits<double>::epsilon();
  return 2.0 * eps * std::max(std::abs(up), std::abs(down)) / (2.0 * h);
}

double grad_check(const ScalarFn& fn, const std::vector<Tensor>& inputs, double h) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.variable(t));
    Var loss = fn(tape, vars);
    tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }

  double worst = 0.0;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    for (std::size_t i = 0; i < probe[k].size(); ++i) {
      const double orig = probe[k][i];
      probe[k][i] = orig + h;
      const double up = evaluate(fn, probe);
      probe[k][i] = orig - h;
      const double down = evaluate(fn, probe);
      probe[k][i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      worst = std::max(worst, relative_error(analytic[k][i], numeric, difference_resolution(up, down, h)));
    }
  }
  return worst;
}

double grad_check_op(const TensorFn& op, const std::vector<Tensor>& inputs, double h, std::uint64_t seed) {
  // The weighting is drawn once from the output shape of a reference run.
  Shape out_shape;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.variable(t));
    out_shape = op(tape, vars).shape();
  }
  Rng rng(seed);
  const std::size_t n = shape_size(out_shape);
  Tensor weights = random_tensor(Shape{n, 1}, rng, 0.5, 1.5);
  ScalarFn scalar = [&](Tape& tape, std::span<const Var> vars) {
    Var out = op(tape, vars);
    return reshape(matmul(reshape(out, Shape{1, n}), tape.constant(weights)), Shape{});
  };
  return grad_check(scalar, inputs, h);
}

double grad_check_params(const std::function<Var(Tape&)>& fn, ParameterStore& params, double h) {
  params.zero_grad();
  {
    Tape tape;
    Var loss = fn(tape);
    tape.backward(loss);
  }
  double worst = 0.0;
  for (auto& p : params) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value[i];
      p.value[i] = orig + h;
      double up;
      {
        Tape tape;
        up = fn(tape).value()[0];
      }
      p.value[i] = orig - h;
      double down;
      {
        Tape tape;
        down = fn(tape).value()[0];
      }
      p.value[i] = orig;
      worst = std::max(worst,
                       relative_error(p.grad[i], (up - down) / (2.0 * h), difference_resolution(up, down, h)));
    }
  }
  params.zero_grad();
  return worst;
}

}  // namespace wogma::ad
