#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "mdc/tensor.hpp"

namespace mdc::ad {

class Graph;

// Handle to a node recorded on a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  bool valid() const { return graph != nullptr; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the tape
// order is a topological order and backward() walks it in reverse once.
// A Graph is single-writer; independent graphs may run on separate threads.
class Graph {
 public:
  // Receives the gradient flowing into the node's output.
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  // With record_gradients=false no backward closures are kept (inference).
  explicit Graph(bool record_gradients = true);

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var parameter(Tensor value);
  // Shares the tensor without copying; it must not change while the graph lives.
  Var parameter(std::shared_ptr<const Tensor> value);

  const Tensor& value(Var v) const;
  const Tensor& value(std::size_t id) const { return *nodes_[id].value; }

  // Gradient of the last backward() loss with respect to v; zeros when
  // v was unreachable from the loss.
  Tensor grad(Var v) const;

  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  bool records_gradients() const { return record_; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Primitive-op plumbing. Throws NumericError if the value is not finite.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward, const char* op);

  // Accumulation buffer for node id (allocated to zeros on first use).
  Tensor& grad_buffer(std::size_t id);

 private:
  struct Node {
    std::shared_ptr<const Tensor> value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::unique_ptr<Tensor> grad;
    bool requires_grad = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  bool record_;
};

}  // namespace mdc::ad
