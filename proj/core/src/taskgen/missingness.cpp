#include "afa/taskgen/missingness.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace afa {

std::string to_string(Mechanism m) {
  switch (m) {
    case Mechanism::kNone: return "none";
    case Mechanism::kMcar: return "mcar";
    case Mechanism::kMar: return "mar";
  }
  return "?";
}

Mechanism mechanism_from_string(const std::string& s) {
  if (s == "none") return Mechanism::kNone;
  if (s == "mcar") return Mechanism::kMcar;
  if (s == "mar") return Mechanism::kMar;
  throw std::invalid_argument("unknown missingness mechanism '" + s + "' (expected none, mcar or mar)");
}

void MissingnessConfig::validate() const {
  if (!(max_missing_prob >= 0.0 && max_missing_prob <= 0.5))
    throw std::invalid_argument("missingness: max_missing_prob must be in [0, 0.5]");
  if (mcar_rate > max_missing_prob) throw std::invalid_argument("missingness: mcar_rate exceeds max_missing_prob");
  if (mar_hidden == 0) throw std::invalid_argument("missingness: mar_hidden must be positive");
}

double MarMechanism::p_missing(std::size_t j, std::span<const double> x0) const {
  if (!modeled.at(j)) return 0.0;
  const Tensor& w = w1[j];
  double s = b2[j];
  for (std::size_t h = 0; h < hidden; ++h) {
    double a = b1[j][h];
    for (std::size_t k = 0; k < x0.size(); ++k) a += w.at(h, k) * x0[k];
    s += w2[j][h] * std::tanh(a);
  }
  return max_missing_prob / (1.0 + std::exp(-s));
}

MarMechanism sample_mar_mechanism(std::span<const std::uint8_t> baseline, const MissingnessConfig& cfg, Rng& rng) {
  MarMechanism m;
  m.max_missing_prob = cfg.max_missing_prob;
  m.hidden = cfg.mar_hidden;
  for (std::size_t j = 0; j < baseline.size(); ++j)
    if (baseline[j]) m.baseline_cols.push_back(j);
  if (m.baseline_cols.empty()) throw std::invalid_argument("mar missingness needs at least one baseline column");
  const std::size_t b = m.baseline_cols.size();
  const std::size_t d = baseline.size();
  m.w1.resize(d);
  m.b1.resize(d);
  m.w2.resize(d);
  m.b2.assign(d, 0.0);
  m.modeled.assign(d, 0);
  for (std::size_t j = 0; j < d; ++j) {
    if (baseline[j]) continue;
    m.modeled[j] = 1;
    const double scale = uniform(rng, 0.5, 2.0);
    m.w1[j] = Tensor(Shape{m.hidden, b});
    for (auto& v : m.w1[j].values()) v = normal(rng) * scale / std::sqrt(static_cast<double>(b));
    m.b1[j] = Tensor(Shape{m.hidden});
    for (auto& v : m.b1[j].values()) v = normal(rng);
    m.w2[j] = Tensor(Shape{m.hidden});
    for (auto& v : m.w2[j].values()) v = normal(rng) * scale / std::sqrt(static_cast<double>(m.hidden));
    // Offset spreads the average rate across features.
    m.b2[j] = uniform(rng, -3.0, 1.0);
  }
  return m;
}

Dataset apply_missingness(const Dataset& ds, const MissingnessConfig& cfg, Rng& rng, std::span<const std::size_t> rows) {
  cfg.validate();
  Dataset out = ds;
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(ds.n());
    std::iota(all.begin(), all.end(), 0);
    rows = all;
  }
  const std::size_t d = ds.d();
  for (std::size_t i : rows)
    for (std::size_t j = 0; j < d; ++j) out.r.at(i, j) = 1.0;

  switch (cfg.mechanism) {
    case Mechanism::kNone:
      break;
    case Mechanism::kMcar: {
      std::vector<double> rate(d, 0.0);
      for (std::size_t j = 0; j < d; ++j)
        if (!ds.baseline[j]) rate[j] = cfg.mcar_rate >= 0.0 ? cfg.mcar_rate : uniform(rng, 0.0, cfg.max_missing_prob);
      for (std::size_t i : rows)
        for (std::size_t j = 0; j < d; ++j)
          if (!ds.baseline[j] && uniform(rng) < rate[j]) out.r.at(i, j) = 0.0;
      break;
    }
    case Mechanism::kMar: {
      const MarMechanism mech = sample_mar_mechanism(ds.baseline, cfg, rng);
      std::vector<double> x0(mech.baseline_cols.size());
      for (std::size_t i : rows) {
        for (std::size_t k = 0; k < x0.size(); ++k) x0[k] = ds.x.at(i, mech.baseline_cols[k]);
        for (std::size_t j = 0; j < d; ++j)
          if (!ds.baseline[j] && uniform(rng) < mech.p_missing(j, x0)) out.r.at(i, j) = 0.0;
      }
      break;
    }
  }
  return out;
}

}  // namespace afa
