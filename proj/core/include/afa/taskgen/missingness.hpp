#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "afa/rng.hpp"
#include "afa/taskgen/dataset.hpp"

namespace afa {

enum class Mechanism { kNone, kMcar, kMar };

std::string to_string(Mechanism m);
Mechanism mechanism_from_string(const std::string& s);

struct MissingnessConfig {
  Mechanism mechanism = Mechanism::kNone;
  double max_missing_prob = 0.5;
  // MCAR: a fixed per-feature rate when >= 0, otherwise each feature draws
  // its rate from U[0, max_missing_prob].
  double mcar_rate = -1.0;
  std::size_t mar_hidden = 8;

  void validate() const;
};

// Per-feature propensity models on the baseline covariates:
// p(R_j = 0 | x0) = max_missing_prob * sigmoid(w2_j . tanh(W1_j x0 + b1_j) + b2_j).
struct MarMechanism {
  std::vector<std::size_t> baseline_cols;
  double max_missing_prob = 0.5;
  std::size_t hidden = 8;
  std::vector<Tensor> w1;  // per feature [hidden, |x0|]
  std::vector<Tensor> b1;  // [hidden]
  std::vector<Tensor> w2;  // [hidden]
  std::vector<double> b2;
  std::vector<std::uint8_t> modeled;  // 0 for baseline columns

  double p_missing(std::size_t j, std::span<const double> x0) const;
};

MarMechanism sample_mar_mechanism(std::span<const std::uint8_t> baseline, const MissingnessConfig& cfg, Rng& rng);

// Redraws R for non-baseline columns of the given rows (all rows when empty).
// X and Y are left untouched.
Dataset apply_missingness(const Dataset& ds, const MissingnessConfig& cfg, Rng& rng,
                          std::span<const std::size_t> rows = {});

}  // namespace afa
