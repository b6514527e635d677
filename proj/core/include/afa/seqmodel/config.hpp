#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "afa/taskgen/dataset.hpp"

namespace afa {

struct ModelConfig {
  std::size_t d = 10;  // features
  std::size_t c = 1;   // label width: 1 for regression, class count otherwise
  TaskKind kind = TaskKind::kRegression;
  std::size_t model_dim = 256;
  std::size_t hidden = 512;
  std::size_t layers = 6;
  std::size_t heads = 4;
  std::size_t embedding_depth = 4;
  double dropout = 0.0;

  std::size_t token_width() const { return 2 * d + c; }
  // Predictor head width: (mean, log variance) or class logits.
  std::size_t output_dim() const { return kind == TaskKind::kRegression ? 2 : c; }
  void validate() const;
  // Canonical "key=value;..." form; hashed into checkpoint metadata.
  std::string canonical() const;
};

std::uint64_t config_hash(const ModelConfig& cfg);

}  // namespace afa
