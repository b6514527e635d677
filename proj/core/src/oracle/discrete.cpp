#include "afa/oracle/discrete.hpp"

#include <cmath>
#include <functional>

namespace afa {
namespace {

bool consistent(const Assignment& s, std::span<const std::size_t> v) {
  for (std::size_t j = 0; j < s.size(); ++j)
    if (s[j] >= 0 && static_cast<std::size_t>(s[j]) != v[j]) return false;
  return true;
}

void check(const DiscreteWorld& w, const Assignment& s) {
  if (s.size() != w.columns()) throw std::invalid_argument("assignment length must equal the column count");
  for (std::size_t j = 0; j < s.size(); ++j)
    if (s[j] >= static_cast<int>(w.x_support[j])) throw std::out_of_range("assignment value outside support");
}

// Table t[x_j * |Y| + y] of (optionally R_j-weighted) joint mass consistent with s.
std::vector<double> joint_xj_y(const DiscreteWorld& w, const Assignment& s, std::size_t j, bool complete_case) {
  check(w, s);
  if (j >= w.columns()) throw std::out_of_range("feature index out of range");
  const std::size_t ys = w.y_support;
  std::vector<double> t(w.x_support[j] * ys, 0.0);
  std::vector<std::size_t> v(w.columns() + 1);
  for (std::size_t cell = 0; cell < w.cells(); ++cell) {
    if (w.pmf[cell] == 0.0) continue;
    w.decode(cell, v);
    if (!consistent(s, v)) continue;
    const double weight = complete_case ? w.p_observed(j, v) : 1.0;
    t[v[j] * ys + v.back()] += w.pmf[cell] * weight;
  }
  return t;
}

double entropy_of(std::span<const double> p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

std::vector<double> normalized(std::vector<double> t, const char* what) {
  double z = 0.0;
  for (double x : t) z += x;
  if (!(z > 0.0)) throw std::domain_error(std::string(what) + ": conditioning event has zero probability");
  for (double& x : t) x /= z;
  return t;
}

}  // namespace

double assignment_probability(const DiscreteWorld& w, const Assignment& s) {
  check(w, s);
  double p = 0.0;
  std::vector<std::size_t> v(w.columns() + 1);
  for (std::size_t cell = 0; cell < w.cells(); ++cell) {
    w.decode(cell, v);
    if (consistent(s, v)) p += w.pmf[cell];
  }
  return p;
}

std::vector<double> bayes_predictive(const DiscreteWorld& w, const Assignment& s) {
  check(w, s);
  std::vector<double> py(w.y_support, 0.0);
  std::vector<std::size_t> v(w.columns() + 1);
  for (std::size_t cell = 0; cell < w.cells(); ++cell) {
    w.decode(cell, v);
    if (consistent(s, v)) py[v.back()] += w.pmf[cell];
  }
  return normalized(std::move(py), "bayes_predictive");
}

double conditional_entropy(const DiscreteWorld& w, const Assignment& s) { return entropy_of(bayes_predictive(w, s)); }

double exact_cmi(const DiscreteWorld& w, const Assignment& s, std::size_t j, bool complete_case) {
  const auto t = normalized(joint_xj_y(w, s, j, complete_case), "exact_cmi");
  const std::size_t ys = w.y_support, xs = w.x_support[j];
  std::vector<double> px(xs, 0.0), py(ys, 0.0);
  for (std::size_t a = 0; a < xs; ++a)
    for (std::size_t y = 0; y < ys; ++y) {
      px[a] += t[a * ys + y];
      py[y] += t[a * ys + y];
    }
  double mi = 0.0;
  for (std::size_t a = 0; a < xs; ++a)
    for (std::size_t y = 0; y < ys; ++y) {
      const double p = t[a * ys + y];
      if (p > 0.0) mi += p * std::log(p / (px[a] * py[y]));
    }
  return mi;
}

IdentificationResult identification_check(const DiscreteWorld& w, const Assignment& s, std::size_t j) {
  const auto full = joint_xj_y(w, s, j, false);
  const auto cc = joint_xj_y(w, s, j, true);
  double pf = 0.0, pc = 0.0;
  for (double x : full) pf += x;
  for (double x : cc) pc += x;
  if (!(pf > 0.0)) throw std::domain_error("identification_check: conditioning event has zero probability");
  if (!(pc > 0.0))
    throw PositivityError("positivity assumption violated: p(R_" + std::to_string(j) +
                          " = 1 | x_S) = 0, complete-case CMI is not identified");
  IdentificationResult r;
  r.full = exact_cmi(w, s, j, false);
  r.complete_case = exact_cmi(w, s, j, true);
  r.gap = r.full - r.complete_case;
  return r;
}

double expected_one_step_loss(const DiscreteWorld& w, const Assignment& s, std::size_t j) {
  const auto t = normalized(joint_xj_y(w, s, j, false), "expected_one_step_loss");
  const std::size_t ys = w.y_support;
  double loss = 0.0;
  Assignment s2 = s;
  for (std::size_t a = 0; a < w.x_support[j]; ++a) {
    double pa = 0.0;
    for (std::size_t y = 0; y < ys; ++y) pa += t[a * ys + y];
    if (pa == 0.0) continue;
    s2[j] = static_cast<int>(a);
    const auto pred = bayes_predictive(w, s2);
    for (std::size_t y = 0; y < ys; ++y)
      if (t[a * ys + y] > 0.0) loss -= t[a * ys + y] * std::log(pred[y]);
  }
  return loss;
}

double expected_conditional_entropy(const DiscreteWorld& w, const Assignment& s, std::size_t j) {
  const auto t = normalized(joint_xj_y(w, s, j, false), "expected_conditional_entropy");
  const std::size_t ys = w.y_support;
  std::vector<double> px(w.x_support[j], 0.0);
  for (std::size_t a = 0; a < px.size(); ++a)
    for (std::size_t y = 0; y < ys; ++y) px[a] += t[a * ys + y];
  return entropy_of(t) - entropy_of(px);
}

std::size_t oracle_greedy(const DiscreteWorld& w, const Assignment& s, std::span<const std::uint8_t> available) {
  std::size_t best = w.columns();
  double best_val = 0.0;
  for (std::size_t j = 0; j < w.columns(); ++j) {
    if (w.baseline[j] || s[j] >= 0 || (!available.empty() && !available[j])) continue;
    const double v = exact_cmi(w, s, j, true);
    if (best == w.columns() || v > best_val + kOracleTieTolerance) best = j, best_val = v;
  }
  if (best == w.columns()) throw std::invalid_argument("oracle_greedy: no acquirable feature");
  return best;
}

std::vector<Assignment> enumerate_states(const DiscreteWorld& w) {
  std::vector<Assignment> out;
  const std::size_t cols = w.columns();
  std::vector<std::size_t> free;
  for (std::size_t j = 0; j < cols; ++j)
    if (!w.baseline[j]) free.push_back(j);
  for (std::size_t mask = 0; mask < (std::size_t{1} << free.size()); ++mask) {
    if (mask == (std::size_t{1} << free.size()) - 1) continue;  // nothing left to acquire
    std::vector<std::size_t> in_s;
    for (std::size_t j = 0; j < cols; ++j) {
      if (w.baseline[j]) in_s.push_back(j);
    }
    for (std::size_t k = 0; k < free.size(); ++k)
      if (mask >> k & 1) in_s.push_back(free[k]);
    Assignment s(cols, -1);
    std::function<void(std::size_t)> rec = [&](std::size_t idx) {
      if (idx == in_s.size()) {
        if (assignment_probability(w, s) > 0.0) out.push_back(s);
        return;
      }
      for (std::size_t v = 0; v < w.x_support[in_s[idx]]; ++v) {
        s[in_s[idx]] = static_cast<int>(v);
        rec(idx + 1);
      }
      s[in_s[idx]] = -1;
    };
    rec(0);
  }
  return out;
}

}  // namespace afa
