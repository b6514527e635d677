#include "afa/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace afa {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0, 1)");
  // Bisection on the CDF; 200 halvings of [-40, 40] is far below fp64 spacing.
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double cdf = 0.5 * std::erfc(-mid / std::numbers::sqrt2);
    (cdf < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

bool in_interval(double mean, double var, double y, double level) {
  if (!(var > 0.0)) throw std::invalid_argument("in_interval: variance must be positive");
  const double z = normal_quantile(0.5 + 0.5 * level);
  return std::abs(y - mean) <= z * std::sqrt(var);
}

double categorical_nll(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) throw std::out_of_range("categorical_nll: label out of range");
  return -std::log(std::max(probs[label], 1e-300));
}

double brier(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) throw std::out_of_range("brier: label out of range");
  double s = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double e = probs[k] - (k == label ? 1.0 : 0.0);
    s += e * e;
  }
  return s;
}

double kl_divergence(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  double kl = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k)
    if (truth[k] > 0.0) kl += truth[k] * (std::log(truth[k]) - std::log(std::max(pred[k], 1e-300)));
  return kl;
}

std::optional<double> auroc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  if (scores.size() != positive.size()) throw std::invalid_argument("auroc: size mismatch");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (positive[i] ? pos : neg).push_back(scores[i]);
  if (pos.empty() || neg.empty()) return std::nullopt;
  // Rank-sum form of the pairwise count: for each positive, negatives below
  // it plus half the ties.
  std::sort(neg.begin(), neg.end());
  double credit = 0.0;
  for (double s : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), s);
    const auto hi = std::upper_bound(neg.begin(), neg.end(), s);
    credit += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return credit / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

std::optional<double> auroc_multiclass(const std::vector<std::vector<double>>& probs,
                                       std::span<const std::size_t> labels) {
  if (probs.size() != labels.size()) throw std::invalid_argument("auroc: size mismatch");
  if (probs.empty()) return std::nullopt;
  const std::size_t c = probs.front().size();
  if (c == 2) {
    std::vector<double> s;
    std::vector<std::uint8_t> p;
    for (std::size_t i = 0; i < probs.size(); ++i) s.push_back(probs[i][1]), p.push_back(labels[i] == 1);
    return auroc(s, p);
  }
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < c; ++k) {
    std::vector<double> s;
    std::vector<std::uint8_t> p;
    for (std::size_t i = 0; i < probs.size(); ++i) s.push_back(probs[i][k]), p.push_back(labels[i] == k);
    if (auto a = auroc(s, p)) total += *a, ++used;
  }
  if (used == 0) return std::nullopt;
  return total / static_cast<double>(used);
}

MeanSe mean_se(std::span<const double> values) {
  MeanSe r;
  r.n = values.size();
  if (r.n == 0) return r;
  double s = 0.0;
  for (double v : values) s += v;
  r.mean = s / static_cast<double>(r.n);
  if (r.n < 2) return r;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.se = std::sqrt(ss / static_cast<double>(r.n - 1)) / std::sqrt(static_cast<double>(r.n));
  return r;
}

}  // namespace afa
