// Copyright 2026 The protospoof Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "protospoof/error.hpp"
#include "protospoof/numkernel/param_store.hpp"
#include "protospoof/numkernel/tensor.hpp"

namespace protospoof {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode tape. Each recorded node keeps its forward value; the
/// backward closure reads saved inputs through the tape and accumulates
/// vector-Jacobian products into their gradient slots.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var constant(Tensor2 value) { return push(std::move(value), {}, std::nullopt); }

  /// Leaf bound to a parameter; its gradient is flushed into the store on backward().
  Var param(const ParamStore& store, ParamId id) { return push(store.value(id), {}, id); }

  Var record(Tensor2 value, Backward backward) { return push(std::move(value), std::move(backward), std::nullopt); }

  const Tensor2& value(Var v) const { return nodes_.at(v.id).value; }
  const Tensor2& value(std::size_t id) const { return nodes_.at(id).value; }

  /// Gradient slot of a node, allocated as zeros on first use.
  Tensor2& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor2(n.value.rows(), n.value.cols());
    return n.grad;
  }

  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Propagates d(loss)/d(node) through every recorded op, newest first, and
  /// adds parameter gradients into `store`. `on_visit` observes the order.
  void backward(Var loss, ParamStore& store, const std::function<void(std::size_t)>& on_visit = {}) {
    if (loss.id >= nodes_.size()) throw ContractError("loss handle does not belong to this tape");
    const Tensor2& lv = nodes_[loss.id].value;
    if (lv.rows() != 1 || lv.cols() != 1)
      throw ContractError("backward needs a scalar loss, got shape " + lv.shape());
    if (consumed_) throw ContractError("tape already replayed; record a new forward pass");
    consumed_ = true;

    grad(loss.id)(0, 0) = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward) continue;
      if (on_visit) on_visit(i);
      if (n.grad.empty()) continue;
      n.backward(*this, i);
    }
    for (Node& n : nodes_) {
      if (!n.param || n.grad.empty()) continue;
      Parameter& p = store[*n.param];
      p.grad.require_same_shape(n.grad, "parameter gradient");
      p.grad += n.grad;
    }
  }

 private:
  struct Node {
    Tensor2 value;
    Tensor2 grad;
    Backward backward;
    std::optional<ParamId> param;
  };

  Var push(Tensor2 value, Backward backward, std::optional<ParamId> param) {
    nodes_.push_back(Node{std::move(value), Tensor2{}, std::move(backward), param});
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace protospoof
