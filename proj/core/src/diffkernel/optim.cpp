#include "afa/diffkernel/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace afa {

double LrSchedule::at(std::size_t step) const {
  if (warmup > 0 && step <= warmup) {
    return base * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (decay_horizon > warmup) {
    if (step >= decay_horizon) return 0.0;
    return base * static_cast<double>(decay_horizon - step) / static_cast<double>(decay_horizon - warmup);
  }
  return base;
}

OptimizerState OptimizerState::for_params(const ParamStore& params, LrSchedule default_schedule) {
  OptimizerState s;
  for (const auto& e : params.entries()) {
    s.first_moment.emplace_back(e.value.shape(), 0.0);
    s.second_moment.emplace_back(e.value.shape(), 0.0);
  }
  s.schedules["default"] = default_schedule;
  return s;
}

const LrSchedule* OptimizerState::schedule_for(const std::string& group) const {
  if (auto it = schedules.find(group); it != schedules.end()) return &it->second;
  if (auto it = schedules.find("default"); it != schedules.end()) return &it->second;
  return nullptr;
}

double adam_step(ParamStore& params, const GradStore& grads, OptimizerState& state) {
  if (grads.grads.size() != params.size() || state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: parameter/gradient/state count mismatch");
  }
  ++state.step;
  const auto& cfg = state.adam;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  auto entries = params.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const LrSchedule* sched = state.schedule_for(entries[k].group);
    if (sched == nullptr) continue;
    const double lr = sched->at(state.step);
    auto& w = entries[k].value.values();
    const auto& g = grads.grads[k].values();
    auto& m = state.first_moment[k].values();
    auto& v = state.second_moment[k].values();
    if (g.size() != w.size() || m.size() != w.size()) {
      throw ShapeError("adam_step: shape mismatch for '" + entries[k].name + "'");
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  const LrSchedule* def = state.schedule_for("default");
  return def ? def->at(state.step) : 0.0;
}

}  // namespace afa
