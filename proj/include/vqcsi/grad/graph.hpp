// SPDX-License-Identifier: Apache-2.0
//
// vqcsi — digital CSI feedback simulation for near-field XL-MIMO links
// Copyright (C) 2026 the vqcsi authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef VQCSI_GRAD_GRAPH_HPP
#define VQCSI_GRAD_GRAPH_HPP

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vqcsi/tensor.hpp"

namespace vqcsi::grad {

/// One value in a dynamically built reverse-mode graph.
///
/// The graph is define-by-run: each operator allocates a node holding its
/// forward value, its parent links, and a closure that maps the node's
/// gradient to parent-gradient contributions. Gradients accumulate
/// additively across fan-out, so a node consumed twice receives both terms.
template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated lazily by backward()
    bool requires_grad = false;
    bool grad_ready = false;
    std::string name;  // nonempty for parameters
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents

    const Tensor<T>& v() const { return value; }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

/// Leaf holding a constant: gradients stop here.
template <typename T>
NodePtr<T> constant(Tensor<T> v) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    return n;
}

/// Leaf holding a trainable value: backward() fills its grad.
template <typename T>
NodePtr<T> leaf(Tensor<T> v, std::string name = {}) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    n->requires_grad = true;
    n->name = std::move(name);
    return n;
}

namespace detail {

template <typename T>
void topo_order(const NodePtr<T>& root, std::vector<Node<T>*>& order) {
    // iterative DFS post-order; graphs can be a few thousand nodes deep
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            Node<T>* child = node->parents[next_child++].get();
            if (seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
}

template <typename T>
void ensure_grad(Node<T>& n) {
    if (!n.grad_ready) {
        n.grad = Tensor<T>::zeros(n.value.shape());
        n.grad_ready = true;
    }
}

}  // namespace detail

/// Accumulate `g` into the node's gradient slot, allocating on first touch.
template <typename T>
void accumulate_grad(Node<T>& n, const Tensor<T>& g) {
    detail::ensure_grad(n);
    require(n.grad.same_shape(g), "grad: accumulated gradient shape mismatch");
    T* dst = n.grad.data();
    const T* src = g.data();
    for (std::int64_t i = 0; i < g.numel(); ++i) dst[i] += src[i];
}

/// Reverse pass from a scalar loss node. Deterministic: traversal order is a
/// pure function of graph construction order.
template <typename T>
void backward(const NodePtr<T>& loss) {
    require(loss->value.numel() == 1, "grad: backward requires a scalar loss");
    std::vector<Node<T>*> order;
    detail::topo_order(loss, order);
    detail::ensure_grad(*loss);
    loss->grad.fill(T(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backprop && n->grad_ready) n->backprop(*n);
    }
}

/// Clear gradient slots over the whole graph below `root`.
template <typename T>
void zero_grads(const NodePtr<T>& root) {
    std::vector<Node<T>*> order;
    detail::topo_order(root, order);
    for (Node<T>* n : order) {
        n->grad = Tensor<T>();
        n->grad_ready = false;
    }
}

}  // namespace vqcsi::grad

#endif  // VQCSI_GRAD_GRAPH_HPP
