#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "afa/diffkernel/tensor.hpp"
#include "afa/rng.hpp"

namespace afa {

struct Dataset;

enum class KernelKind { kRbf, kMatern52 };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& s);

struct GpKernel {
  KernelKind kind = KernelKind::kRbf;
  std::vector<double> lengthscales;
  double outputscale = 1.0;
  double noise_std = 2e-2;

  double operator()(std::span<const double> a, std::span<const double> b) const;
};

inline constexpr double kUninformativeLengthscale = 1e6;

struct GPPriorConfig {
  std::size_t d = 10;
  KernelKind kernel = KernelKind::kRbf;
  double lengthscale_min = 0.1;
  double lengthscale_max = 5.0;
  double outputscale_min = 0.5;
  double outputscale_max = 2.0;
  double noise_std = 2e-2;
  std::size_t informative_min = 1;
  std::size_t informative_max = 10;
  // The first `baseline_count` columns are always observed.
  std::size_t baseline_count = 0;

  void validate() const;
};

// K[i, j] = k(x_i, x_j), no noise term.
Tensor kernel_matrix(const GpKernel& k, const Tensor& x);
Tensor kernel_matrix(const GpKernel& k, const Tensor& a, const Tensor& b);

// Lower Cholesky factor of `a`. Retries with jitter 1e-10, 1e-9, ... 1e-4 on
// the diagonal; throws std::runtime_error after that. `jitter_used` reports
// the jitter that succeeded (0 if none was needed).
Tensor cholesky_with_jitter(const Tensor& a, double* jitter_used = nullptr);

Dataset sample_gp_task(const GPPriorConfig& cfg, std::size_t n, Rng& rng);

}  // namespace afa
