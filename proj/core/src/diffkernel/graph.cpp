#include "afa/diffkernel/graph.hpp"

#include <string>

namespace afa {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kMatMulNT: return "matmul_nt";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kAddBias: return "add_bias";
    case OpKind::kScale: return "scale";
    case OpKind::kGelu: return "gelu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kMaskedSoftmax: return "masked_softmax";
    case OpKind::kMaskedLogSoftmax: return "masked_log_softmax";
    case OpKind::kCrossEntropy: return "cross_entropy";
    case OpKind::kGaussianNll: return "gaussian_nll";
    case OpKind::kSliceCols: return "slice_cols";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kConcatRows: return "concat_rows";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kStraightThrough: return "straight_through";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph->value(id); }
const Tensor& Var::grad() const { return graph->grad(id); }

Var Graph::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NonFiniteError("non-finite value in leaf tensor");
  Node n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Graph::record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward) {
  if (!value.all_finite()) {
    throw NonFiniteError("non-finite value produced by " + std::string(op_name(kind)));
  }
  Node n;
  n.kind = kind;
  n.requires_grad = false;
  for (auto i : inputs) n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

const Tensor& Graph::grad(std::size_t id) const {
  static const Tensor kEmpty;
  const auto& n = nodes_[id];
  return n.grad.empty() && !n.value.empty() ? kEmpty : n.grad;
}

Tensor& Graph::grad_buffer(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw std::invalid_argument("backward: variable belongs to another graph");
  if (nodes_[loss.id].value.size() != 1) {
    throw ShapeError("backward requires a scalar loss, got " + shape_string(nodes_[loss.id].value.shape()));
  }
  grad_buffer(loss.id)[0] += 1.0;
  last_visits_ = 0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, i);
    ++last_visits_;
  }
}

}  // namespace afa
