#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "afa/eval/acquisition.hpp"
#include "afa/rng.hpp"
#include "afa/seqmodel/config.hpp"
#include "afa/taskgen/bnn.hpp"
#include "afa/taskgen/discrete_world.hpp"
#include "afa/taskgen/gp.hpp"
#include "afa/taskgen/missingness.hpp"
#include "afa/trainer/trainer.hpp"

namespace afa::cli {

enum class PriorKind { kGp, kBnn, kDiscrete, kCopy };

struct PriorSpec {
  PriorKind kind = PriorKind::kGp;
  std::size_t n = 128;  // rows per task
  GPPriorConfig gp;
  BNNPriorConfig bnn;
  std::size_t bnn_d = 10;
  std::size_t bnn_pool = 0;  // 0 = n
  DiscreteWorldSpec discrete;
  std::size_t copy_d = 4;

  std::size_t d() const;
  std::size_t c() const;
  TaskKind task_kind() const;
};

struct MethodSpec {
  PolicyKind policy = PolicyKind::kRandom;
  PredictorKind predictor = PredictorKind::kModel;
  std::string name;  // defaults to the policy name
};

struct EvalSpec {
  std::size_t tasks = 200;
  std::size_t context = 64;
  std::size_t max_queries = 0;
  std::size_t budget = 3;
  std::vector<MethodSpec> methods;
  std::size_t oracle_samples = 16;
  std::size_t threads = 1;
  MlpConfig mlp;
  // Missingness on eval query rows too (default: context rows only).
  bool queries_missing = false;
};

struct SweepSpec {
  std::vector<std::size_t> context = {25, 50, 100, 250, 500};
  std::vector<double> missing_rate = {0.0, 0.1, 0.3, 0.5};
  std::string baseline = "mlp_greedy";
};

struct ExperimentConfig {
  nlohmann::json raw;  // defaults merged with the file and overrides
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "afa-out";
  PriorSpec prior;
  MissingnessConfig missing;
  ModelConfig model;
  TrainConfig train;
  EvalSpec eval;
  SweepSpec sweep;
  std::size_t train_pool = 0;  // gen-tasks: optional stored training tasks
};

nlohmann::json default_config_json();

// Defaults, then the JSON file (if any), then each "dotted.key=value"
// override (value parsed as JSON, else taken as a string), then AFA_SEED.
// Unknown keys are rejected.
ExperimentConfig load_experiment(const std::optional<std::filesystem::path>& file,
                                 const std::vector<std::string>& overrides);
ExperimentConfig experiment_from_json(const nlohmann::json& merged);

struct GeneratedTask {
  Dataset data;  // raw units
  std::optional<DiscreteWorld> world;
};

// One task from the prior. Continuous priors get the configured missingness
// on every row, or on the first `context_rows` rows only when given.
GeneratedTask sample_task(const ExperimentConfig& cfg, Rng& rng, std::optional<std::size_t> context_rows = {});
// Training sampler: missingness everywhere, then per-sequence normalization.
TaskSampler make_training_sampler(const ExperimentConfig& cfg);

}  // namespace afa::cli
