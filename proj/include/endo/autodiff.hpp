#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "endo/tensor.hpp"

namespace endo {

class Graph;

// Handle to a node in a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Reverse-mode tape. One graph is built per forward pass and discarded
// afterwards; nodes are appended in topological order.
class Graph {
 public:
  using Backward = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Trainable leaf; backward() adds its gradient into block.gradient.
  Var param(ParamBlock& block);
  // Leaf reading block.value without accumulating a gradient.
  Var frozen(const ParamBlock& block);

  Var record(Tensor value, const std::vector<Var>& parents, Backward back);

  const Tensor& value(std::size_t id) const;
  const Tensor& value(Var v) const { return value(v.id); }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return requires_grad(v.id); }

  // Gradient buffer of a node, allocated on first touch.
  Tensor& grad(std::size_t id);
  const Tensor* grad_if_any(std::size_t id) const;

  // Seeds d(out)/d(out) = 1 for scalar outputs.
  void backward(Var out);
  // Seeds an arbitrary upstream gradient with the shape of out.
  void backward(Var out, const Tensor& seed);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    ParamBlock* block = nullptr;
    Backward back;
  };

  void run_backward(std::size_t last);

  std::vector<Node> nodes_;
};

}  // namespace endo
