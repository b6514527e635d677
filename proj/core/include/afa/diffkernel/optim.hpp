#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "afa/diffkernel/params.hpp"

namespace afa {

// Linear warmup 0 -> base over `warmup` steps, then (if decay_horizon > 0)
// linear decay base -> 0 reached at step `decay_horizon`. Steps are 1-based.
struct LrSchedule {
  double base = 1e-4;
  std::size_t warmup = 500;
  std::size_t decay_horizon = 0;

  double at(std::size_t step) const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  AdamConfig adam;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::size_t step = 0;
  // Per-group schedule; groups absent here (and without a "default" entry)
  // are frozen.
  std::map<std::string, LrSchedule> schedules;

  static OptimizerState for_params(const ParamStore& params, LrSchedule default_schedule);
  const LrSchedule* schedule_for(const std::string& group) const;
};

// One bias-corrected Adam update. Returns the default-group learning rate used.
double adam_step(ParamStore& params, const GradStore& grads, OptimizerState& state);

}  // namespace afa
