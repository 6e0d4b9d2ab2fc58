#pragma once

// Minimal reverse-mode tape. Nodes are appended in evaluation order, so a
// reverse sweep over the node list is a valid topological order.

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dmff/errors.hpp"
#include "dmff/tensor.hpp"

namespace dmff {

/// Gradient per named parameter. An entry exists iff the parameter was
/// reached by the backward sweep; its shape always equals the parameter's.
template <class T>
using GradRecord = std::map<std::string, Tensor<T>>;

template <class T>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <class T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <class T>
class Tape {
 public:
  // Receives the adjoint of the node's output and accumulates into parents.
  using BackwardFn = std::function<void(Tape&, const Tensor<T>&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value) { return push(std::move(value), false, {}, {}); }

  /// Registers a learnable tensor under `name`. Registering the same name
  /// again returns the existing node so that shared parameters accumulate a
  /// single gradient.
  Var<T> parameter(const std::string& name, const Tensor<T>& value) {
    if (auto it = params_.find(name); it != params_.end()) {
      if (nodes_[it->second].value.shape() != value.shape()) {
        throw DimensionError("parameter '" + name + "' re-registered with shape " +
                             shape_str(value.shape()));
      }
      return Var<T>(this, it->second);
    }
    Var<T> v = push(value, true, {}, name);
    params_.emplace(name, v.id());
    return v;
  }

  /// Records an operation result. `fn` runs during backward only if some
  /// parent requires a gradient.
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& parents, BackwardFn fn) {
    bool needs = false;
    for (const auto& p : parents) {
      if (p.valid() && &p.tape() != this) throw StateError("operand belongs to a different tape");
      if (p.valid() && nodes_[p.id()].requires_grad) needs = true;
    }
    return push(std::move(value), needs, needs ? std::move(fn) : BackwardFn{}, {});
  }

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Adds `g` into the adjoint of node `id` (no-op for constants).
  void accumulate(std::size_t id, const Tensor<T>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.empty()) {
      n.value.require_same_shape(g, "gradient accumulate");
      n.grad = g;
    } else {
      n.grad += g;
    }
  }
  void accumulate(std::size_t id, Tensor<T>&& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.empty()) {
      n.value.require_same_shape(g, "gradient accumulate");
      n.grad = std::move(g);
    } else {
      n.grad += g;
    }
  }

  /// Seeds `output` with `output_grad` and sweeps the tape in reverse.
  GradRecord<T> backward(Var<T> output, const Tensor<T>& output_grad) {
    if (nodes_.empty() || !output.valid() || &output.tape() != this || output.id() >= nodes_.size()) {
      throw StateError("backward called before any forward evaluation was recorded");
    }
    for (auto& n : nodes_) n.grad = Tensor<T>();
    accumulate(output.id(), output_grad);
    for (std::size_t i = output.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty() || !n.backward) continue;
      n.backward(*this, n.grad);
    }
    GradRecord<T> rec;
    for (const auto& [name, id] : params_) {
      if (!nodes_[id].grad.empty()) rec.emplace(name, nodes_[id].grad);
    }
    return rec;
  }

  /// Convenience for scalar losses: seeds with 1.
  GradRecord<T> backward(Var<T> scalar_output) {
    if (!scalar_output.valid()) throw StateError("backward called before any forward evaluation was recorded");
    return backward(scalar_output, Tensor<T>(scalar_output.shape(), T(1)));
  }

  const std::unordered_map<std::string, std::size_t>& parameters() const noexcept { return params_; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
    std::string name;
  };

  Var<T> push(Tensor<T> value, bool requires_grad, BackwardFn fn, std::string name) {
    nodes_.push_back(Node{std::move(value), {}, requires_grad, std::move(fn), std::move(name)});
    return Var<T>(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> params_;
};

}  // namespace dmff
