// Copyright 2026 The flatdst Authors.
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

// Reverse-mode automatic differentiation over Tensor values.
//
// Every forward op produces a Var holding its value and, when gradients are
// being recorded, a closure that pushes the output gradient into its
// parents. backward() orders the reachable graph topologically and runs the
// closures once. Leaf gradients (parameters) accumulate across calls until
// zero_grad(); interior gradients are reset at the start of every call.

#ifndef FLATDST_AUTOGRAD_HPP_
#define FLATDST_AUTOGRAD_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "flatdst/error.hpp"
#include "flatdst/tensor.hpp"

namespace flatdst {

namespace detail {

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

template <Real T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  bool requires_grad = false;
  bool leaf = false;

  Tensor<T>& ensure_grad() {
    if (grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

}  // namespace detail

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) {
    detail::grad_mode_flag() = false;
  }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode_flag(); }

template <Real T>
class Var {
 public:
  using Node = detail::Node<T>;

  Var() = default;

  // A constant (never receives a gradient).
  explicit Var(Tensor<T> value) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->leaf = true;
  }

  // A leaf that accumulates gradient, i.e. the storage behind a Parameter.
  static Var leaf(Tensor<T> value) {
    Var v(std::move(value));
    v.node_->requires_grad = true;
    return v;
  }

  // Records an op result. Parents and the backward closure are dropped when
  // recording is off or no parent needs a gradient.
  static Var op(Tensor<T> value, std::vector<Var> parents,
                std::function<void(Node&)> backward) {
    Var v;
    v.node_ = std::make_shared<Node>();
    v.node_->value = std::move(value);
    bool needs = false;
    if (grad_enabled()) {
      for (const auto& p : parents) needs = needs || p.requires_grad();
    }
    if (needs) {
      v.node_->requires_grad = true;
      v.node_->parents.reserve(parents.size());
      for (auto& p : parents) v.node_->parents.push_back(p.node_);
      v.node_->backward = std::move(backward);
    }
    return v;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_->grad.shape() == node_->value.shape(); }

  // Gradient buffer; zeros when nothing has been accumulated yet.
  const Tensor<T>& grad() const { return node_->ensure_grad(); }
  Tensor<T>& mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->ensure_grad().fill(T{0}); }

  Node* node() const { return node_.get(); }
  bool same_node(const Var& other) const { return node_ == other.node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
template <Real T>
void backward(const Var<T>& loss) {
  if (!loss.defined() || loss.value().size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? shape_string(loss.shape())
                                        : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) return;

  using Node = detail::Node<T>;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (!n->leaf) n->ensure_grad().fill(T{0});
  }
  Node* root = loss.node();
  root->ensure_grad();
  root->grad[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

// Named model weight. Copies share storage, so two Parameters with the same
// Var are the same weight.
template <Real T>
struct Parameter {
  std::string name;
  Var<T> var;
  bool trainable = true;
};

// Ordered, uniquely named collection of parameters.
template <Real T>
class ParameterSet {
 public:
  Var<T> add(const std::string& name, Tensor<T> init, bool trainable = true) {
    if (index_.count(name)) {
      throw ContractError("duplicate parameter name '" + name + "'");
    }
    Var<T> v = trainable ? Var<T>::leaf(std::move(init)) : Var<T>(std::move(init));
    index_[name] = params_.size();
    params_.push_back(Parameter<T>{name, v, trainable});
    return v;
  }

  std::size_t size() const { return params_.size(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  const Parameter<T>& operator[](std::size_t i) const { return params_[i]; }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  const Parameter<T>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("no parameter named '" + name + "'");
    return params_[it->second];
  }

  void zero_grad() {
    for (auto& p : params_) {
      if (p.trainable) p.var.zero_grad();
    }
  }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.var.value().size();
    return n;
  }

 private:
  std::vector<Parameter<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace flatdst

#endif  // FLATDST_AUTOGRAD_HPP_
