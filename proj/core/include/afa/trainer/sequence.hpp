#pragma once

#include <cstddef>
#include <vector>

#include "afa/diffkernel/params.hpp"
#include "afa/rng.hpp"
#include "afa/seqmodel/model.hpp"
#include "afa/trainer/gumbel.hpp"

namespace afa {

// One training sequence built from a task: m context rows, then the
// remaining rows twice, once as labeled targets and once as queries whose
// acquired set is a random subset of their available features.
struct TrainingSequence {
  std::size_t m = 0;
  std::size_t targets = 0;
  Tensor prefix;           // [m + targets, 2d+c] context then target tokens
  Tensor query_values;     // [q, d] x * r of the query rows
  Tensor query_acquired;   // [q, d]
  Tensor candidates;       // [q, d] r = 1 and not acquired
  std::vector<std::size_t> pair;    // target index of each query
  Tensor y;                         // [q, c]
  std::vector<std::size_t> labels;  // classification only
  Tensor mask;

  std::size_t queries() const { return pair.size(); }
};

struct SequenceOptions {
  // Context size drawn uniformly from [min_context, N - 1].
  std::size_t min_context = 1;
  // Policy stage: keep only queries with at least one acquirable feature and
  // draw the acquired subset so that one remains.
  bool require_candidate = false;
  // Optional cap on the number of queries kept (0 = all).
  std::size_t max_queries = 0;
};

TrainingSequence make_training_sequence(const Dataset& ds, const SequenceOptions& opt, Rng& rng);

// Mean predictive loss: Gaussian NLL (regression) or cross-entropy.
Var predictive_loss(const ModelConfig& cfg, Var head_out, const TrainingSequence& seq);

// Predictor loss with query acquisition vector `acquired` ([q, d], may be
// relaxed). Query tokens are [x * a, a, 0].
Var sequence_loss(ParamBinding& p, const ModelConfig& cfg, const TrainingSequence& seq, Var acquired);

// Loss after revealing `action` ([q, d], one-hot or relaxed) on top of the
// current acquired set.
Var one_step_loss(ParamBinding& p, const ModelConfig& cfg, const TrainingSequence& seq, Var action);

// Blocked policy log-probabilities at the current state, [q, d].
Var policy_log_probs(ParamBinding& p, const ModelConfig& cfg, const TrainingSequence& seq);

struct PolicyStep {
  Var loss;
  GumbelSelection selection;
};

// Policy pass, straight-through Gumbel selection, predictor pass.
PolicyStep policy_objective(ParamBinding& p, const ModelConfig& cfg, const TrainingSequence& seq, double tau,
                            const Tensor& noise);

}  // namespace afa
