#pragma once

#include <cstddef>
#include <vector>

#include "afa/diffkernel/graph.hpp"
#include "afa/rng.hpp"

namespace afa {

// Standard Gumbel noise -log(-log U).
Tensor sample_gumbel(const Shape& shape, Rng& rng);

struct GumbelSelection {
  Var action;                      // forward: hard one-hot; backward: relaxed
  Var relaxed;                     // softmax((log pi + eta) / tau) over candidates
  Tensor hard;                     // one-hot rows
  std::vector<std::size_t> choice; // argmax of log pi + eta per row
};

// log_probs: [q, d] blocked log-probabilities (candidates == 0 entries are
// ignored). Blocked entries get exactly zero relaxed weight and are never
// chosen. Throws if a row has no candidate.
GumbelSelection gumbel_straight_through(Var log_probs, const Tensor& candidates, double tau, const Tensor& noise);

}  // namespace afa
