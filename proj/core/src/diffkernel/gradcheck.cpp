#include "afa/diffkernel/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace afa {
namespace {

double evaluate(const ScalarFn& fn, const std::vector<Tensor>& inputs) {
  Graph g;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.leaf(t, false));
  return fn(g, vars).value().item();
}

}  // namespace

GradCheckResult check_gradients(const ScalarFn& fn, const std::vector<Tensor>& inputs, double h, double floor) {
  Graph g;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.leaf(t, true));
  Var out = fn(g, vars);
  g.backward(out);

  GradCheckResult res;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor& analytic = vars[k].grad();
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = probe[k][i];
      probe[k][i] = orig + h;
      const double fp = evaluate(fn, probe);
      probe[k][i] = orig - h;
      const double fm = evaluate(fn, probe);
      probe[k][i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      res.max_abs_error = std::max(res.max_abs_error, abs_err);
      res.max_rel_error = std::max(res.max_rel_error, abs_err / denom);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace afa
