// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "wogma/ad/tensor.hpp"

namespace wogma::ad {

/// A trainable tensor together with its gradient and Adam moments.
struct Parameter {
  Parameter(std::string name, Tensor init);

  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  std::uint64_t step_count = 0;

  void zero_grad() { grad.fill(0.0); }
};

/// Ordered, address-stable collection of parameters. Order is insertion order
/// and defines checkpoint layout and gradient reduction order.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor init);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter> params_;
};

/// Per-parameter gradient buffers, used when several tapes run concurrently
/// and their contributions are reduced afterwards in a fixed order.
using GradBuffers = std::unordered_map<const Parameter*, Tensor>;

class Tape;

/// Handle to a value recorded on a tape. References returned by value() stay
/// valid for the lifetime of the tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear record of executed primitives. backward() walks it in exact reverse
/// order; gradients add up at nodes with several consumers.
class Tape {
 public:
  /// Propagates the gradient of the node with index `self` into its inputs.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  /// One node per parameter per tape; repeated calls return the same node.
  Var parameter(Parameter& p);

  Var record(Tensor value, bool requires_grad, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient of a node; zeros if nothing flowed into it.
  const Tensor& grad(std::size_t id);
  const Tensor& grad(const Var& v) { return grad(v.id()); }
  /// Mutable gradient buffer of an input, or nullptr if it needs no gradient.
  Tensor* grad_target(const Var& v);
  Tensor* grad_target(std::size_t id);

  /// Seeds d(loss)/d(loss) = 1 and runs the reverse sweep. Parameter
  /// gradients are added to Parameter::grad, or to `sink` when given.
  void backward(const Var& loss, GradBuffers* sink = nullptr);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;  // deque: values stay addressable while the tape grows
  std::map<Parameter*, std::size_t> param_nodes_;
};

}  // namespace wogma::ad
