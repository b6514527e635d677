#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "afa/diffkernel/graph.hpp"

namespace afa {

struct ParamEntry {
  std::string name;
  Tensor value;
  // Optimizer group, e.g. "backbone", "predictor_head", "policy_head".
  std::string group;
};

// Insertion-ordered named-tensor store.
class ParamStore {
 public:
  Tensor& add(std::string name, Tensor value, std::string group = "default");
  bool contains(const std::string& name) const { return index_.contains(name); }
  std::size_t index_of(const std::string& name) const;
  Tensor& get(const std::string& name) { return entries_[index_of(name)].value; }
  const Tensor& get(const std::string& name) const { return entries_[index_of(name)].value; }

  std::span<ParamEntry> entries() { return entries_; }
  std::span<const ParamEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t numel() const;

 private:
  std::vector<ParamEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

// One gradient tensor per ParamStore entry (same order and shapes).
struct GradStore {
  std::vector<Tensor> grads;

  static GradStore zeros_like(const ParamStore& params);
  void add_scaled(const GradStore& other, double weight);
  void scale(double s);
};

// Binds a ParamStore into one Graph. Leaves are created lazily on first use,
// and only parameters in a trainable group are marked requires_grad.
class ParamBinding {
 public:
  ParamBinding(Graph& graph, const ParamStore& params, std::optional<std::vector<std::string>> trainable_groups = {});

  Var operator[](const std::string& name);
  Graph& graph() { return *graph_; }

  // Adds weight * d(loss)/d(param) for every bound parameter into `out`.
  void accumulate(GradStore& out, double weight = 1.0) const;

 private:
  Graph* graph_;
  const ParamStore* params_;
  std::optional<std::vector<std::string>> trainable_;
  std::vector<std::optional<Var>> bound_;
};

}  // namespace afa
