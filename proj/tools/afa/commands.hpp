#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "afa/eval/acquisition.hpp"
#include "afa/eval/report.hpp"
#include "experiment.hpp"

namespace afa::cli {

namespace fs = std::filesystem;

// gen-tasks: <dir>/eval/eval_0000.afat (+ .world.json for discrete priors),
// optional <dir>/train/train_0000.afat, and <dir>/manifest.json.
fs::path gen_tasks(const ExperimentConfig& cfg, const fs::path& dir);

// A manifest, or a single .afat task file (context length from the config;
// a sibling .world.json is picked up when present).
std::vector<EvalTask> load_tasks(const fs::path& path, const ExperimentConfig& cfg);

// Eval tasks straight from the prior; `stream` separates task pools.
std::vector<EvalTask> sample_eval_tasks(const ExperimentConfig& cfg, std::uint64_t stream);

// Checkpoint path defaults to <out_dir>/predictor_best.afat etc.
TrainResult run_pretrain_predictor(const ExperimentConfig& cfg, const std::optional<fs::path>& init, bool verbose);
TrainResult run_pretrain_policy(const ExperimentConfig& cfg, const fs::path& predictor, bool verbose);

struct LoadedModel {
  ModelConfig config;
  ParamStore params;
};
LoadedModel load_model(const fs::path& checkpoint, const ExperimentConfig& cfg);

// Trajectories for every task, in task order. Tasks run on `threads`
// workers; output does not depend on the thread count.
std::vector<StepRecord> acquire_all(const std::vector<EvalTask>& tasks, const MethodSpec& method,
                                    const ExperimentConfig& cfg, const LoadedModel* model, std::size_t budget);

// Metrics for several trajectory files: rows for all, plus CSV and summary.
struct EvalOutputs {
  std::vector<MetricRow> rows;
  fs::path metrics_csv, summary_json;
};
EvalOutputs evaluate_files(const std::vector<fs::path>& trajectories, const std::vector<std::string>& names,
                           const fs::path& dir);

// Deltas (baseline - method) for `methods` (all but the baseline when empty).
std::vector<DeltaEntry> compare_rows(const std::vector<MetricRow>& rows, const std::string& baseline,
                                     const std::vector<std::string>& methods);

// Grid over context length and MCAR missingness rate; writes <dir>/sweep.csv.
fs::path run_sweep(const ExperimentConfig& cfg, const LoadedModel* model, const fs::path& dir);

// Identification check over discrete worlds: <dir>/identification.csv and
// <dir>/identification_summary.json.
fs::path oracle_check(const ExperimentConfig& cfg, std::size_t worlds, const fs::path& dir);

}  // namespace afa::cli
