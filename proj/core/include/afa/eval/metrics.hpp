#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace afa {

inline constexpr double kCoverageLevels[] = {0.5, 0.8, 0.9, 0.95};

// Inverse of the standard normal CDF on (0, 1).
double normal_quantile(double p);

// Whether y falls in the central `level` interval of N(mean, var).
bool in_interval(double mean, double var, double y, double level);

// -log probs[label], with probabilities floored at 1e-300.
double categorical_nll(std::span<const double> probs, std::size_t label);
// sum_k (probs_k - onehot_k)^2.
double brier(std::span<const double> probs, std::size_t label);
// KL(truth || pred) in nats.
double kl_divergence(std::span<const double> truth, std::span<const double> pred);

// Binary AUROC by pairwise comparison, ties count 1/2. Absent when only one
// class is present.
std::optional<double> auroc(std::span<const double> scores, std::span<const std::uint8_t> positive);
// Macro one-vs-rest AUROC over classes that are present alongside others.
std::optional<double> auroc_multiclass(const std::vector<std::vector<double>>& probs,
                                       std::span<const std::size_t> labels);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // sample std / sqrt(n); 0 when n < 2
  std::size_t n = 0;
};
MeanSe mean_se(std::span<const double> values);

}  // namespace afa
