#pragma once

#include <cstddef>

#include "afa/rng.hpp"
#include "afa/taskgen/dataset.hpp"

namespace afa {

struct BNNPriorConfig {
  std::size_t hidden_dim = 8;
  std::size_t classes = 2;
  std::size_t cluster_min = 1;
  std::size_t cluster_max = 3;
  std::size_t feats_min = 1;
  std::size_t feats_max = 10;
  double prevalence_min = 0.05;
  double prevalence_max = 0.95;
  double importance_min = 0.5;
  double importance_max = 2.0;
  double scale_min = 0.5;
  double scale_max = 2.0;
  double temperature_min = 0.5;
  double temperature_max = 2.0;
  // Achieved positive rate must be within this of the target (or 1/N when
  // that is coarser).
  double prevalence_tolerance = 0.02;
  std::size_t baseline_count = 0;

  void validate(std::size_t d) const;
};

// Draws N rows of `x_pool` without replacement and labels them with a
// random clustered tanh network. Binary tasks get a bias shift bisected so
// the empirical positive rate matches a prevalence drawn from the prior;
// the exact label probabilities are kept in true_probs.
Dataset sample_bnn_task(const BNNPriorConfig& cfg, const Tensor& x_pool, std::size_t n, Rng& rng);

// Bias b minimising |mean_i [u_i < sigmoid(logit_i + b)] - target|, by bisection.
double fit_prevalence_bias(std::span<const double> logits, std::span<const double> uniforms, double target);

}  // namespace afa
