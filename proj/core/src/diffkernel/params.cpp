#include "afa/diffkernel/params.hpp"

#include <algorithm>
#include <stdexcept>

namespace afa {

Tensor& ParamStore::add(std::string name, Tensor value, std::string group) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  value.requires_grad = true;
  entries_.push_back(ParamEntry{std::move(name), std::move(value), std::move(group)});
  return entries_.back().value;
}

std::size_t ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::numel() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

GradStore GradStore::zeros_like(const ParamStore& params) {
  GradStore g;
  g.grads.reserve(params.size());
  for (const auto& e : params.entries()) g.grads.emplace_back(e.value.shape(), 0.0);
  return g;
}

void GradStore::add_scaled(const GradStore& other, double weight) {
  if (other.grads.size() != grads.size()) throw ShapeError("GradStore::add_scaled: size mismatch");
  for (std::size_t k = 0; k < grads.size(); ++k) {
    auto& dst = grads[k].values();
    const auto& src = other.grads[k].values();
    if (dst.size() != src.size()) throw ShapeError("GradStore::add_scaled: tensor size mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weight * src[i];
  }
}

void GradStore::scale(double s) {
  for (auto& t : grads) {
    for (auto& v : t.values()) v *= s;
  }
}

ParamBinding::ParamBinding(Graph& graph, const ParamStore& params, std::optional<std::vector<std::string>> trainable_groups)
    : graph_(&graph), params_(&params), trainable_(std::move(trainable_groups)), bound_(params.size()) {}

Var ParamBinding::operator[](const std::string& name) {
  const std::size_t k = params_->index_of(name);
  if (!bound_[k]) {
    const auto& e = params_->entries()[k];
    const bool trainable =
        !trainable_ || std::find(trainable_->begin(), trainable_->end(), e.group) != trainable_->end();
    bound_[k] = graph_->leaf(e.value, trainable);
  }
  return *bound_[k];
}

void ParamBinding::accumulate(GradStore& out, double weight) const {
  if (out.grads.size() != bound_.size()) throw ShapeError("ParamBinding::accumulate: GradStore size mismatch");
  for (std::size_t k = 0; k < bound_.size(); ++k) {
    if (!bound_[k] || !graph_->requires_grad(bound_[k]->id)) continue;
    const Tensor& g = graph_->grad(bound_[k]->id);
    if (g.empty()) continue;
    auto& dst = out.grads[k].values();
    const auto& src = g.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weight * src[i];
  }
}

}  // namespace afa
