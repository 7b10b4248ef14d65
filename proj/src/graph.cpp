#include "mdc/graph.hpp"

#include <string>

#include "mdc/error.hpp"

namespace mdc::ad {

const Tensor& Var::value() const { return graph->value(*this); }

Graph::Graph(bool record_gradients) : record_(record_gradients) { nodes_.reserve(256); }

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::make_shared<const Tensor>(std::move(value));
  return push(std::move(n));
}

Var Graph::parameter(Tensor value) { return parameter(std::make_shared<const Tensor>(std::move(value))); }

Var Graph::parameter(std::shared_ptr<const Tensor> value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_;
  return push(std::move(n));
}

const Tensor& Graph::value(Var v) const {
  if (v.graph != this) throw ShapeError("variable belongs to a different graph");
  return *nodes_[v.id].value;
}

Var Graph::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward, const char* op) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite output from op '") + op + "'");
  Node n;
  n.value = std::make_shared<const Tensor>(std::move(value));
  if (record_) {
    for (auto id : inputs) n.requires_grad = n.requires_grad || nodes_[id].requires_grad;
    if (n.requires_grad) {
      n.inputs = std::move(inputs);
      n.backward = std::move(backward);
    }
  }
  return push(std::move(n));
}

Tensor& Graph::grad_buffer(std::size_t id) {
  auto& node = nodes_[id];
  if (!node.grad) node.grad = std::make_unique<Tensor>(node.value->shape(), 0.0);
  return *node.grad;
}

Tensor Graph::grad(Var v) const {
  const auto& node = nodes_[v.id];
  if (node.grad) return *node.grad;
  return Tensor(node.value->shape(), 0.0);
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw ShapeError("loss belongs to a different graph");
  if (!record_) throw ShapeError("backward() on a graph that does not record gradients");
  if (value(loss).size() != 1) throw ShapeError("backward() requires a scalar loss, got " + shape_string(value(loss).shape()));
  for (auto& n : nodes_) n.grad.reset();
  grad_buffer(loss.id)[0] = 1.0;
  for (std::size_t k = loss.id + 1; k-- > 0;) {
    auto& node = nodes_[k];
    if (!node.grad || !node.backward) continue;
    node.backward(*this, *node.grad);
  }
}

}  // namespace mdc::ad
