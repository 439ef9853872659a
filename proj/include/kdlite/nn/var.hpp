#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kdlite/nn/errors.hpp"
#include "kdlite/nn/tensor.hpp"

namespace kdlite::nn {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the reverse-mode graph. The gradient lives in value.grad.
// `backward` reads this node's gradient and accumulates into its parents.
struct Node {
    Tensor value;
    std::string op;
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward;

    std::vector<double>& grad() {
        if (value.grad.size() != value.data.size()) value.grad.assign(value.data.size(), 0.0);
        return value.grad;
    }
};

namespace detail {
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}
}  // namespace detail

// Disables graph recording in its scope (evaluation, finite differences).
class NoGradGuard {
public:
    NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode(); }

// Shared handle to a graph node. Copies alias the same node.
class Var {
public:
    Var() = default;
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    const Tensor& value() const { return node_->value; }
    Tensor& value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape; }
    std::size_t size() const { return node_->value.size(); }
    const std::vector<double>& grad() const { return node_->value.grad; }
    bool requires_grad() const { return node_->requires_grad; }
    const NodePtr& node() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

    double item() const {
        if (node_->value.size() != 1) throw DimensionError("item: tensor is not a scalar");
        return node_->value.data[0];
    }

private:
    NodePtr node_;
};

// Trainable leaf. The gradient buffer is allocated immediately.
inline Var parameter(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->value.enable_grad();
    node->requires_grad = true;
    node->op = "parameter";
    return Var(std::move(node));
}

inline Var constant(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = "constant";
    return Var(std::move(node));
}

inline void ensure_finite(const Tensor& t, const std::string& op) {
    if (!t.all_finite()) throw NumericError("non-finite value produced by op '" + op + "'");
}

// Wraps the output of a forward op. Graph edges are recorded only if grad
// mode is on and some input requires a gradient.
inline Var make_result(std::string op, Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
    ensure_finite(value, op);
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = std::move(op);
    node->is_leaf = false;
    const bool needs = grad_enabled() && std::any_of(inputs.begin(), inputs.end(),
                                                     [](const Var& v) { return v.requires_grad(); });
    if (needs) {
        node->requires_grad = true;
        node->parents.reserve(inputs.size());
        for (auto& in : inputs) node->parents.push_back(in.node());
        node->backward = std::move(backward);
    }
    return Var(std::move(node));
}

// Gradient buffer of parent `i` if it participates, else nullptr.
inline std::vector<double>* parent_grad(Node& self, std::size_t i) {
    Node& p = *self.parents[i];
    return p.requires_grad ? &p.grad() : nullptr;
}

inline const Tensor& parent_value(const Node& self, std::size_t i) { return self.parents[i]->value; }

// Runs reverse accumulation from a scalar. Leaf gradients accumulate (+=).
inline void backward(const Var& loss) {
    if (loss.size() != 1) throw DimensionError("backward: loss must be a scalar, got " + to_string(loss.shape()));
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS; recurrent graphs can be deep.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node& node = **it;
        if (!node.backward) continue;
        for (double g : node.grad()) {
            if (!std::isfinite(g)) throw NumericError("non-finite gradient flowing into op '" + node.op + "'");
        }
        node.backward(node);
    }
}

}  // namespace kdlite::nn
