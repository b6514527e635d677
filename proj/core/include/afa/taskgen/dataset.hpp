#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "afa/diffkernel/tensor.hpp"
#include "afa/taskgen/gp.hpp"

namespace afa {

enum class TaskKind { kRegression, kClassification };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& s);

// Per-feature affine map applied by normalize_per_sequence: z = (x - mean) / sd.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> sd;
};

// One task: N samples with d features. X keeps the ground-truth value even
// where R is 0; nothing on the model input path may read those entries.
struct Dataset {
  Tensor x;  // [N, d]
  Tensor r;  // [N, d], 1 = observed
  Tensor y;  // [N, 1] regression value, or [N, classes] one-hot
  std::vector<std::uint8_t> baseline;  // d flags for always-observed X0 columns
  TaskKind kind = TaskKind::kRegression;

  // p(Y = k | x) for every row, when the generating process knows it.
  std::optional<Tensor> true_probs;
  // Generating kernel, in the same units as x.
  std::optional<GpKernel> kernel;
  std::optional<NormStats> norm;

  std::size_t n() const { return x.shape().empty() ? 0 : x.shape()[0]; }
  std::size_t d() const { return x.cols(); }
  std::size_t c() const { return y.cols(); }
  std::size_t num_classes() const { return kind == TaskKind::kClassification ? c() : 0; }
  std::size_t label(std::size_t i) const;  // classification only
  std::vector<std::size_t> labels() const;
  std::size_t baseline_count() const;

  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
};

Dataset subset_rows(const Dataset& ds, std::span<const std::size_t> rows);

Tensor one_hot(std::span<const std::size_t> labels, std::size_t classes);

inline constexpr double kVarianceFloor = 1e-8;

// Standardizes each feature with the mean and population variance of its
// observed entries. Unobserved ground-truth values are mapped with the same
// stats. Kernel lengthscales are rescaled so the kernel stays consistent with x.
Dataset normalize_per_sequence(const Dataset& ds, NormStats* stats_out = nullptr);

}  // namespace afa
