#include "dppn/autodiff.hpp"

#include <unordered_set>

namespace dppn {

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var Var::constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var Var::from_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> propagate) {
  if (!value.all_finite()) throw NumericError("non-finite value produced, shape " + shape_string(value.shape()));
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (Var& p : parents) {
    node->requires_grad = node->requires_grad || p.requires_grad();
    node->parents.push_back(std::move(p.node_));
  }
  if (node->requires_grad) node->propagate = std::move(propagate);
  return Var(std::move(node));
}

const Tensor& Var::grad() const { return node_->grad_buffer(); }

void Var::zero_grad() { node_->grad = Tensor(); }

void backward(const Var& loss) {
  if (loss.node().value.size() != 1) {
    throw DimensionError("backward needs a scalar loss, got " + shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{&loss.node(), 0}};
  seen.insert(&loss.node());
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

  loss.node().grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->propagate && !node->grad.empty()) node->propagate(*node);
  }
}

}  // namespace dppn
