#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "afa/diffkernel/params.hpp"
#include "afa/seqmodel/encoding.hpp"
#include "afa/taskgen/dataset.hpp"

namespace afa {

// Task-specific baseline in the style of gradient dynamic feature selection:
// an MLP predictor trained on random feature subsets, then a same-shape
// selector trained through a straight-through Gumbel relaxation against the
// frozen predictor. Both read [x * a, a].
struct MlpConfig {
  std::size_t hidden = 128;  // two hidden layers of this width
  std::size_t batch = 64;
  std::size_t epochs = 300;
  std::size_t selector_epochs = 300;
  double lr = 1e-3;
  double selector_tau = 0.5;

  void validate() const;
};

class MlpBaseline {
 public:
  // `train` holds labeled rows in model units; only observed entries are
  // read.
  static MlpBaseline fit(const Dataset& train, const MlpConfig& cfg, std::uint64_t seed);

  // Regression rows are {mean, var}; classification rows are probabilities.
  std::vector<std::vector<double>> predict(const AcquisitionState& s) const;
  // Argmax selector score over each query's candidates, lowest index on
  // ties; kNoTarget where a query has none.
  std::vector<std::size_t> select(const AcquisitionState& s) const;

  const ParamStore& params() const { return params_; }

 private:
  ParamStore params_;
  TaskKind kind_ = TaskKind::kRegression;
  std::size_t d_ = 0, out_ = 0;
};

}  // namespace afa
