#include "afa/trainer/gumbel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "afa/diffkernel/ops.hpp"

namespace afa {

Tensor sample_gumbel(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  for (auto& v : t.values()) {
    double u = uniform(rng);
    while (u <= 0.0) u = uniform(rng);
    v = -std::log(-std::log(u));
  }
  return t;
}

GumbelSelection gumbel_straight_through(Var log_probs, const Tensor& candidates, double tau, const Tensor& noise) {
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel: temperature must be positive");
  const Tensor& lp = log_probs.value();
  if (candidates.shape() != lp.shape() || noise.shape() != lp.shape())
    throw ShapeError("gumbel: log_probs, candidates and noise shapes differ");
  Graph& g = *log_probs.graph;
  const std::size_t q = lp.rows(), d = lp.cols();

  GumbelSelection out;
  out.hard = Tensor(lp.shape());
  out.choice.resize(q);
  for (std::size_t i = 0; i < q; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = d;
    for (std::size_t j = 0; j < d; ++j) {
      if (candidates.at(i, j) == 0.0) continue;
      const double z = lp.at(i, j) + noise.at(i, j);
      if (z > best) best = z, arg = j;
    }
    if (arg == d) throw std::invalid_argument("gumbel: row " + std::to_string(i) + " has no acquirable feature");
    out.choice[i] = arg;
    out.hard.at(i, arg) = 1.0;
  }
  Var z = ops::scale(ops::add(log_probs, g.constant(noise)), 1.0 / tau);
  out.relaxed = ops::masked_softmax(z, candidates);
  out.action = ops::straight_through(out.relaxed, out.hard);
  return out;
}

}  // namespace afa
