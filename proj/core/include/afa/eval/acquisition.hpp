#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "afa/diffkernel/params.hpp"
#include "afa/eval/mlp_baseline.hpp"
#include "afa/seqmodel/config.hpp"
#include "afa/seqmodel/encoding.hpp"
#include "afa/taskgen/dataset.hpp"
#include "afa/taskgen/discrete_world.hpp"

namespace afa {

// An evaluation task: the first `context` rows are labeled context, the
// remaining rows are queries.
struct EvalTask {
  std::string id;
  Dataset data;  // raw units
  std::optional<DiscreteWorld> world;
  std::size_t context = 0;
};

// Model-unit view of a task (per-sequence normalization over all rows).
struct PreparedTask {
  Dataset norm;
  std::vector<std::size_t> context_rows, query_rows;
  Tensor ctx_x, ctx_r, ctx_y;

  Dataset context_dataset() const;
  AcquisitionState initial_state() const;
};

// max_queries = 0 keeps every query row.
PreparedTask prepare_task(const EvalTask& task, std::size_t max_queries = 0);

enum class PolicyKind { kLearned, kRandom, kOracleGreedy, kMlpGreedy };
enum class PredictorKind { kModel, kOracle, kMlp };

std::string to_string(PolicyKind k);
PolicyKind policy_kind_from_string(const std::string& s);
std::string to_string(PredictorKind k);
PredictorKind predictor_kind_from_string(const std::string& s);

// Regression: {mean, var} in the units of y. Classification: probabilities.
using Prediction = std::vector<double>;

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::vector<Prediction> predict(const AcquisitionState& s) = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  // One feature per query, or kNoTarget for queries without a candidate.
  virtual std::vector<std::size_t> select(const AcquisitionState& s, std::size_t step) = 0;
};

struct EvalResources {
  const ModelConfig* model = nullptr;
  const ParamStore* params = nullptr;
  MlpConfig mlp;
  std::size_t oracle_samples = 16;  // Monte Carlo draws for the GP oracle
  std::uint64_t seed = 0;
};

// Per-task state shared between a predictor and a policy (the fitted MLP
// baseline is trained once and used by both).
class TaskContext {
 public:
  TaskContext(const EvalTask& task, const PreparedTask& prep, const EvalResources& res);
  std::unique_ptr<Predictor> predictor(PredictorKind kind);
  std::unique_ptr<Policy> policy(PolicyKind kind);

 private:
  const MlpBaseline& mlp();

  const EvalTask* task_;
  const PreparedTask* prep_;
  EvalResources res_;
  std::shared_ptr<MlpBaseline> mlp_;
};

struct StepRecord {
  std::string task_id;
  std::size_t query = 0;
  std::size_t step = 0;
  std::optional<std::size_t> action;  // feature revealed to reach this step
  std::optional<double> revealed;     // its ground-truth value, raw units
  Prediction prediction;
  std::vector<double> y;  // regression value or one-hot
  std::optional<std::vector<double>> true_probs;
  bool exhausted = false;  // no candidate was left to reach this step
  TaskKind kind = TaskKind::kRegression;
};

// Greedy acquisition with budget k: predictions at steps 0..k, with the
// policy choosing one feature per query between steps. Queries that run out
// of candidates keep their last state and are flagged exhausted.
std::vector<StepRecord> run_acquisition(const EvalTask& task, const PreparedTask& prep, Predictor& predictor,
                                        Policy& policy, std::size_t k);

std::string record_to_json(const StepRecord& r);
StepRecord record_from_json(const std::string& line);
std::string records_to_jsonl(const std::vector<StepRecord>& records);
std::vector<StepRecord> records_from_jsonl(const std::string& text);

}  // namespace afa
