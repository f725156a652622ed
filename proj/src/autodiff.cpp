#include "endo/autodiff.hpp"

#include <stdexcept>

namespace endo {

const Tensor& Var::value() const { return graph->value(id); }

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::param(ParamBlock& block) {
  Node n;
  n.external = &block.value;
  n.requires_grad = true;
  n.block = &block;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::frozen(const ParamBlock& block) {
  Node n;
  n.external = &block.value;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::record(Tensor value, const std::vector<Var>& parents, Backward back) {
  Node n;
  n.value = std::move(value);
  for (const auto& p : parents) {
    if (p.graph != this) throw std::logic_error("variable from a different graph");
    n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
  }
  if (n.requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

const Tensor& Graph::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Tensor& Graph::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !value(id).empty()) n.grad = Tensor(value(id).shape());
  return n.grad;
}

const Tensor* Graph::grad_if_any(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.grad.empty() ? nullptr : &n.grad;
}

void Graph::backward(Var out) {
  if (value(out.id).size() != 1) {
    throw ShapeError("backward() without seed needs a scalar output, got " +
                     shape_str(value(out.id).shape()));
  }
  grad(out.id)[0] += 1.0;
  run_backward(out.id);
}

void Graph::backward(Var out, const Tensor& seed) {
  if (!seed.same_shape(value(out.id))) {
    throw ShapeError("backward seed " + shape_str(seed.shape()) +
                     " does not match output " + shape_str(value(out.id).shape()));
  }
  Tensor& g = grad(out.id);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
  run_backward(out.id);
}

void Graph::run_backward(std::size_t last) {
  for (std::size_t i = last + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.back) n.back(*this, i);
    if (n.block) {
      auto& dst = n.block->gradient;
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
    }
  }
}

}  // namespace endo
