#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "afa/diffkernel/graph.hpp"

namespace afa {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

using ScalarFn = std::function<Var(Graph&, std::span<const Var>)>;

// Compares reverse-mode gradients of a scalar function against central
// differences with step h, for every entry of every input. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradCheckResult check_gradients(const ScalarFn& fn, const std::vector<Tensor>& inputs, double h = 1e-5,
                                double floor = 1e-6);

}  // namespace afa
