#include "afa/taskgen/discrete_world.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <stdexcept>

namespace afa {

std::string to_string(Wiring w) {
  switch (w) {
    case Wiring::kNone: return "none";
    case Wiring::kMar: return "mar";
    case Wiring::kMnar: return "mnar";
  }
  return "?";
}

Wiring wiring_from_string(const std::string& s) {
  if (s == "none") return Wiring::kNone;
  if (s == "mar") return Wiring::kMar;
  if (s == "mnar") return Wiring::kMnar;
  throw std::invalid_argument("unknown wiring '" + s + "' (expected none, mar or mnar)");
}

std::size_t DiscreteWorld::encode(std::span<const std::size_t> values) const {
  std::size_t cell = 0;
  for (std::size_t j = 0; j < columns(); ++j) cell = cell * x_support[j] + values[j];
  return cell * y_support + values[columns()];
}

void DiscreteWorld::decode(std::size_t cell, std::span<std::size_t> values) const {
  values[columns()] = cell % y_support;
  cell /= y_support;
  for (std::size_t j = columns(); j-- > 0;) {
    values[j] = cell % x_support[j];
    cell /= x_support[j];
  }
}

double DiscreteWorld::p_observed(std::size_t j, std::span<const std::size_t> values) const {
  const Propensity& p = propensity[j];
  std::size_t idx = 0;
  for (std::size_t parent : p.parents) idx = idx * x_support[parent] + values[parent];
  return p.table[idx];
}

std::vector<double> DiscreteWorld::label_posterior(std::span<const std::size_t> x) const {
  std::vector<std::size_t> v(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(columns()));
  v.push_back(0);
  const std::size_t base = encode(v);
  std::vector<double> out(pmf.begin() + static_cast<std::ptrdiff_t>(base),
                          pmf.begin() + static_cast<std::ptrdiff_t>(base + y_support));
  const double z = std::accumulate(out.begin(), out.end(), 0.0);
  if (z <= 0.0) throw std::domain_error("label_posterior: zero-probability feature assignment");
  for (auto& p : out) p /= z;
  return out;
}

void DiscreteWorld::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("discrete world: " + what); };
  if (x_support.empty()) fail("no columns");
  if (baseline.size() != columns() || propensity.size() != columns()) fail("per-column arrays have wrong length");
  std::size_t cells_expected = y_support;
  for (auto s : x_support) {
    if (s < 1) fail("support sizes must be positive");
    cells_expected *= s;
  }
  if (y_support < 2) fail("label support must be >= 2");
  if (cells_expected > kMaxWorldCells) fail("joint table exceeds " + std::to_string(kMaxWorldCells) + " cells");
  if (pmf.size() != cells_expected) fail("pmf has wrong size");
  double total = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0)) fail("pmf entries must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) fail("pmf sums to " + std::to_string(total));
  for (std::size_t j = 0; j < columns(); ++j) {
    std::size_t size = 1;
    for (auto parent : propensity[j].parents) {
      if (parent >= columns()) fail("propensity parent out of range");
      size *= x_support[parent];
    }
    if (propensity[j].table.size() != size) fail("propensity table size mismatch for column " + std::to_string(j));
    for (double p : propensity[j].table)
      if (!(p >= 0.0 && p <= 1.0)) fail("propensities must lie in [0, 1]");
    if (baseline[j])
      for (double p : propensity[j].table)
        if (p != 1.0) fail("baseline column " + std::to_string(j) + " must always be observed");
  }
}

DiscreteWorld sample_discrete_world(const DiscreteWorldSpec& spec, Rng& rng) {
  if (spec.support_min < 1 || spec.support_min > spec.support_max)
    throw std::invalid_argument("world spec: need 1 <= support_min <= support_max");
  if (!(spec.propensity_min >= 0.0 && spec.propensity_min <= spec.propensity_max && spec.propensity_max <= 1.0))
    throw std::invalid_argument("world spec: propensity range must lie in [0, 1]");
  DiscreteWorld w;
  const std::size_t cols = spec.baseline_columns + spec.d;
  w.y_support = spec.y_support;
  w.baseline.assign(cols, 0);
  std::fill_n(w.baseline.begin(), spec.baseline_columns, 1);
  double cells = static_cast<double>(spec.y_support);
  for (std::size_t j = 0; j < cols; ++j) {
    w.x_support.push_back(static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(spec.support_min),
                                                               static_cast<std::int64_t>(spec.support_max))));
    cells *= static_cast<double>(w.x_support.back());
  }
  if (cells > static_cast<double>(kMaxWorldCells)) throw std::invalid_argument("world spec: joint table too large");

  std::gamma_distribution<double> gamma(spec.dirichlet_alpha, 1.0);
  w.pmf.resize(static_cast<std::size_t>(cells));
  for (auto& p : w.pmf) p = gamma(rng);
  const double z = std::accumulate(w.pmf.begin(), w.pmf.end(), 0.0);
  for (auto& p : w.pmf) p /= z;

  std::vector<std::size_t> base_cols;
  for (std::size_t j = 0; j < cols; ++j)
    if (w.baseline[j]) base_cols.push_back(j);
  w.propensity.resize(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    Propensity& p = w.propensity[j];
    if (w.baseline[j] || spec.wiring == Wiring::kNone) {
      p.table = {1.0};
      continue;
    }
    p.parents = base_cols;
    if (spec.wiring == Wiring::kMnar) p.parents.push_back(j);
    std::size_t size = 1;
    for (auto parent : p.parents) size *= w.x_support[parent];
    p.table.resize(size);
    for (auto& v : p.table) v = uniform(rng, spec.propensity_min, spec.propensity_max);
  }
  w.validate();
  return w;
}

DiscreteWorld make_copy_world(std::size_t d, std::size_t copy, std::span<const double> flips) {
  if (copy >= d || flips.size() != d) throw std::invalid_argument("copy world: bad copy index or flip vector");
  DiscreteWorld w;
  w.x_support.assign(d, 2);
  w.y_support = 2;
  w.baseline.assign(d, 0);
  w.propensity.assign(d, Propensity{{}, {1.0}});
  w.pmf.assign(std::size_t{1} << (d + 1), 0.0);
  std::vector<std::size_t> v(d + 1);
  for (std::size_t cell = 0; cell < w.pmf.size(); ++cell) {
    w.decode(cell, v);
    const std::size_t y = v[d];
    double p = 0.5;
    for (std::size_t j = 0; j < d; ++j) {
      const double flip = j == copy ? 0.0 : flips[j];
      p *= v[j] == y ? 1.0 - flip : flip;
    }
    w.pmf[cell] = p;
  }
  w.validate();
  return w;
}

DiscreteWorld sample_copy_world(std::size_t d, Rng& rng) {
  const auto copy = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(d) - 1));
  std::vector<double> flips(d);
  for (auto& f : flips) f = uniform(rng, 0.25, 0.5);
  return make_copy_world(d, copy, flips);
}

Dataset sample_world_dataset(const DiscreteWorld& w, std::size_t n, Rng& rng) {
  const std::size_t cols = w.columns();
  std::vector<double> cdf(w.cells());
  std::partial_sum(w.pmf.begin(), w.pmf.end(), cdf.begin());

  Dataset ds;
  ds.kind = TaskKind::kClassification;
  ds.x = Tensor(Shape{n, cols});
  ds.r = Tensor(Shape{n, cols}, 1.0);
  ds.baseline = w.baseline;
  std::vector<std::size_t> labels(n);
  Tensor probs(Shape{n, w.y_support});
  std::vector<std::size_t> v(cols + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform(rng) * cdf.back();
    auto cell = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    cell = std::min(cell, w.cells() - 1);
    w.decode(cell, v);
    for (std::size_t j = 0; j < cols; ++j) {
      ds.x.at(i, j) = static_cast<double>(v[j]);
      if (uniform(rng) >= w.p_observed(j, v)) ds.r.at(i, j) = 0.0;
    }
    labels[i] = v[cols];
    const auto post = w.label_posterior(v);
    std::copy(post.begin(), post.end(), probs.row(i).begin());
  }
  ds.y = one_hot(labels, w.y_support);
  ds.true_probs = std::move(probs);
  return ds;
}

std::string world_to_json(const DiscreteWorld& w) {
  nlohmann::json j;
  j["x_support"] = w.x_support;
  j["y_support"] = w.y_support;
  j["baseline"] = w.baseline;
  j["pmf"] = w.pmf;
  auto& props = j["propensity"] = nlohmann::json::array();
  for (const auto& p : w.propensity) props.push_back({{"parents", p.parents}, {"table", p.table}});
  return j.dump();
}

DiscreteWorld world_from_json(const std::string& text) {
  DiscreteWorld w;
  try {
    const auto j = nlohmann::json::parse(text);
    w.x_support = j.at("x_support").get<std::vector<std::size_t>>();
    w.y_support = j.at("y_support").get<std::size_t>();
    w.baseline = j.at("baseline").get<std::vector<std::uint8_t>>();
    w.pmf = j.at("pmf").get<std::vector<double>>();
    for (const auto& p : j.at("propensity"))
      w.propensity.push_back({p.at("parents").get<std::vector<std::size_t>>(), p.at("table").get<std::vector<double>>()});
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("discrete world json: ") + e.what());
  }
  w.validate();
  return w;
}

}  // namespace afa
