#include "afa/taskgen/bnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace afa {
namespace {

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

double positive_rate(std::span<const double> logits, std::span<const double> u, double b) {
  std::size_t pos = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) pos += u[i] < sigmoid(logits[i] + b) ? 1 : 0;
  return static_cast<double>(pos) / static_cast<double>(logits.size());
}

std::size_t draw_count(Rng& rng, std::size_t lo, std::size_t hi) {
  return static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

}  // namespace

void BNNPriorConfig::validate(std::size_t d) const {
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("bnn prior: ") + what); };
  if (hidden_dim == 0) fail("hidden_dim must be positive");
  if (classes < 2) fail("classes must be >= 2");
  if (cluster_min < 1 || cluster_min > cluster_max) fail("need 1 <= cluster_min <= cluster_max");
  if (feats_min < 1 || feats_min > feats_max || feats_min > d) fail("need 1 <= feats_min <= feats_max, feats_min <= d");
  if (!(prevalence_min > 0.0 && prevalence_min <= prevalence_max && prevalence_max < 1.0))
    fail("prevalence range must lie inside (0, 1)");
  if (!(importance_min > 0 && importance_min <= importance_max)) fail("bad importance range");
  if (!(scale_min > 0 && scale_min <= scale_max)) fail("bad scale range");
  if (!(temperature_min > 0 && temperature_min <= temperature_max)) fail("bad temperature range");
  if (baseline_count >= d) fail("baseline_count must be < d");
}

double fit_prevalence_bias(std::span<const double> logits, std::span<const double> uniforms, double target) {
  double lo = -60.0, hi = 60.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (positive_rate(logits, uniforms, mid) < target ? lo : hi) = mid;
  }
  // The rate is a step function of b; take whichever bracket end is closer.
  const double r_lo = positive_rate(logits, uniforms, lo);
  const double r_hi = positive_rate(logits, uniforms, hi);
  return std::abs(r_lo - target) < std::abs(r_hi - target) ? lo : hi;
}

Dataset sample_bnn_task(const BNNPriorConfig& cfg, const Tensor& x_pool, std::size_t n, Rng& rng) {
  const std::size_t d = x_pool.cols();
  cfg.validate(d);
  if (n < 2) throw std::invalid_argument("bnn task: N must be >= 2");
  if (x_pool.rows() < n) throw std::invalid_argument("bnn task: pool has fewer rows than N");

  std::vector<std::size_t> idx(x_pool.rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(n);

  Dataset ds;
  ds.kind = TaskKind::kClassification;
  ds.x = Tensor(Shape{n, d});
  for (std::size_t i = 0; i < n; ++i) std::copy_n(x_pool.row(idx[i]).begin(), d, ds.x.row(i).begin());
  ds.r = Tensor(Shape{n, d}, 1.0);
  ds.baseline.assign(d, 0);
  std::fill_n(ds.baseline.begin(), cfg.baseline_count, 1);

  // Clusters: nearest Gaussian center, each with its own informative subset.
  const std::size_t k = draw_count(rng, cfg.cluster_min, cfg.cluster_max);
  Tensor centers(Shape{k, d});
  for (auto& v : centers.values()) v = normal(rng);
  std::vector<std::vector<double>> feature_mask(k, std::vector<double>(d, 0.0));
  for (auto& m : feature_mask) {
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t count = draw_count(rng, cfg.feats_min, std::min(cfg.feats_max, d));
    for (std::size_t i = 0; i < count; ++i) m[order[i]] = 1.0;
  }

  const std::size_t h = cfg.hidden_dim;
  const std::size_t out_dim = cfg.classes == 2 ? 1 : cfg.classes;
  std::vector<double> importance(d);
  for (auto& v : importance) v = uniform(rng, cfg.importance_min, cfg.importance_max);
  const double scale1 = uniform(rng, cfg.scale_min, cfg.scale_max);
  const double scale2 = uniform(rng, cfg.scale_min, cfg.scale_max);
  Tensor w1(Shape{d, h}), b1(Shape{h}), w2(Shape{h, out_dim}), b2(Shape{out_dim});
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t u = 0; u < h; ++u) w1.at(j, u) = normal(rng) * importance[j] * scale1;
  for (auto& v : b1.values()) v = normal(rng);
  for (auto& v : w2.values()) v = normal(rng) * scale2 / std::sqrt(static_cast<double>(h));
  for (auto& v : b2.values()) v = normal(rng);
  const double temperature = uniform(rng, cfg.temperature_min, cfg.temperature_max);

  Tensor logits(Shape{n, out_dim});
  std::vector<double> hid(h);
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = ds.x.row(i);
    std::size_t cl = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      double dist = 0.0;
      for (std::size_t j = 0; j < d; ++j) dist += (xi[j] - centers.at(c, j)) * (xi[j] - centers.at(c, j));
      if (dist < best) best = dist, cl = c;
    }
    const double active = std::accumulate(feature_mask[cl].begin(), feature_mask[cl].end(), 0.0);
    for (std::size_t u = 0; u < h; ++u) {
      double a = b1[u];
      for (std::size_t j = 0; j < d; ++j) a += feature_mask[cl][j] * xi[j] * w1.at(j, u);
      hid[u] = std::tanh(a / std::sqrt(active));
    }
    for (std::size_t o = 0; o < out_dim; ++o) {
      double z = b2[o];
      for (std::size_t u = 0; u < h; ++u) z += hid[u] * w2.at(u, o);
      logits.at(i, o) = z / temperature;
    }
  }

  std::vector<std::size_t> labels(n);
  Tensor probs(Shape{n, cfg.classes});
  if (cfg.classes == 2) {
    const double target = uniform(rng, cfg.prevalence_min, cfg.prevalence_max);
    std::vector<double> u(n);
    for (auto& v : u) v = uniform(rng);
    const double bias = fit_prevalence_bias(logits.values(), u, target);
    const double achieved = positive_rate(logits.values(), u, bias);
    const double tol = std::max(cfg.prevalence_tolerance, 1.0 / static_cast<double>(n));
    if (std::abs(achieved - target) > tol + 1e-12)
      throw std::runtime_error("bnn task: prevalence bisection reached " + std::to_string(achieved) + " for target " +
                               std::to_string(target));
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(logits[i] + bias);
      probs.at(i, 0) = 1.0 - p;
      probs.at(i, 1) = p;
      labels[i] = u[i] < p ? 1 : 0;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const auto z = logits.row(i);
      const double mx = *std::max_element(z.begin(), z.end());
      double s = 0.0;
      for (std::size_t o = 0; o < out_dim; ++o) s += probs.at(i, o) = std::exp(z[o] - mx);
      for (std::size_t o = 0; o < out_dim; ++o) probs.at(i, o) /= s;
      std::discrete_distribution<std::size_t> cat(probs.row(i).begin(), probs.row(i).end());
      labels[i] = cat(rng);
    }
  }
  ds.y = one_hot(labels, cfg.classes);
  ds.true_probs = std::move(probs);
  return ds;
}

}  // namespace afa
