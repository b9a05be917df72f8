#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "dppn/tensor.hpp"

namespace dppn {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One value in a reverse-mode graph. `propagate` reads `grad` and adds the
/// vector-Jacobian products into each parent's `grad`.
struct Node {
  Tensor value;
  Tensor grad;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> propagate;
  bool requires_grad = false;

  /// Lazily allocated gradient buffer shaped like `value`.
  Tensor& grad_buffer();
};

/// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);
  static Var parameter(Tensor value);

  /// Interior node; requires_grad is inherited from the parents.
  static Var from_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> propagate);

  const Tensor& value() const { return node_->value; }
  /// Parameters are updated in place by optimizers and gradient checks.
  Tensor& mutable_value() { return node_->value; }

  /// Accumulated gradient; zeros if backward() has not reached this node.
  const Tensor& grad() const;
  void zero_grad();

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  double item() const { return node_->value.item(); }

  Node& node() const { return *node_; }
  const NodePtr& ptr() const { return node_; }

 private:
  explicit Var(NodePtr node) : node_(std::move(node)) {}
  NodePtr node_;
};

/// Runs reverse accumulation from a scalar loss. Each reachable node is
/// visited once, in reverse topological order; gradients of leaves add up
/// across every path that reaches them.
void backward(const Var& loss);

}  // namespace dppn
