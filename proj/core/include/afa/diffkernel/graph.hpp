#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string_view>
#include <vector>

#include "afa/diffkernel/tensor.hpp"

namespace afa {

enum class OpKind {
  kLeaf,
  kMatMul,
  kMatMulNT,
  kAdd,
  kSub,
  kMul,
  kAddBias,
  kScale,
  kGelu,
  kTanh,
  kLayerNorm,
  kMaskedSoftmax,
  kMaskedLogSoftmax,
  kCrossEntropy,
  kGaussianNll,
  kSliceCols,
  kConcatCols,
  kConcatRows,
  kGatherRows,
  kSum,
  kMean,
  kStraightThrough,
};

std::string_view op_name(OpKind kind);

class Graph;

// Lightweight handle to a node of a Graph. Valid for the graph's lifetime.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
};

// Append-only reverse-mode tape. Nodes are recorded in evaluation order, so
// append order is a topological order and backward() is a single reverse
// sweep. A Graph is single-threaded.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, bool requires_grad);
  Var leaf(Tensor value) {
    const bool rg = value.requires_grad;
    return leaf(std::move(value), rg);
  }
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Used by op implementations. Throws NonFiniteError if value has NaN/Inf.
  Var record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and propagates. `loss` must hold one element.
  // Call at most once per graph.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  OpKind kind(std::size_t id) const { return nodes_[id].kind; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

  // Gradient buffer of `id`, zero-initialised on first access.
  Tensor& grad_buffer(std::size_t id);
  // Upstream gradient of the node currently being back-propagated.
  const Tensor& upstream(std::size_t id) const { return nodes_[id].grad; }

  std::size_t size() const { return nodes_.size(); }
  // Number of nodes whose backward closure ran in the last backward().
  std::size_t last_backward_visits() const { return last_visits_; }

 private:
  struct Node {
    OpKind kind = OpKind::kLeaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  // deque: appending must not invalidate references handed out by value().
  std::deque<Node> nodes_;
  std::size_t last_visits_ = 0;
};

}  // namespace afa
