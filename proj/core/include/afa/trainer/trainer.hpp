#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "afa/diffkernel/params.hpp"
#include "afa/rng.hpp"
#include "afa/seqmodel/config.hpp"
#include "afa/taskgen/dataset.hpp"
#include "afa/trainer/sequence.hpp"

namespace afa {

// Produces one ready task (missingness applied, normalized) per call.
using TaskSampler = std::function<Dataset(Rng&)>;

struct TrainConfig {
  std::size_t predictor_steps = 100000;
  std::size_t policy_steps = 50000;
  std::size_t batch_tasks = 8;
  double lr_predictor = 1e-4;
  double lr_policy = 1e-4;
  double lr_joint_finetune = 1e-5;
  std::size_t warmup = 500;
  bool predictor_decay = true;
  double gumbel_temperature = 0.1;
  // When > 0, tau decays geometrically from gumbel_temperature to this value.
  double gumbel_temperature_final = 0.0;
  bool zero_noise = false;  // debug: eta = 0, selection = argmax pi
  std::size_t checkpoint_every = 500;
  std::size_t validation_tasks = 64;
  SequenceOptions sequence;
  std::uint64_t seed = 0;
  // Checkpoints and the training log go here when set.
  std::optional<std::filesystem::path> out_dir;

  void validate() const;
};

struct TrainLogRow {
  std::string stage;
  std::size_t step = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
  double lr = 0.0;
};

struct TrainResult {
  ParamStore params;  // best validation checkpoint
  ParamStore last;
  double best_val_loss = 0.0;
  std::size_t best_step = 0;
  std::vector<TrainLogRow> log;
};

using ProgressFn = std::function<void(const TrainLogRow&)>;

TrainResult pretrain_predictor(const ModelConfig& cfg, const TrainConfig& tc, const TaskSampler& sampler,
                               const ParamStore* init = nullptr, const ProgressFn& progress = {});

// Starts from predictor parameters; the policy head trains at lr_policy and
// the backbone and predictor head at lr_joint_finetune.
TrainResult pretrain_policy(const ModelConfig& cfg, const TrainConfig& tc, const TaskSampler& sampler,
                            const ParamStore& predictor, const ProgressFn& progress = {});

// Validation losses, deterministic for fixed tasks and seed.
double predictor_validation_loss(const ModelConfig& cfg, const ParamStore& params, const std::vector<Dataset>& tasks,
                                 const SequenceOptions& opt, std::uint64_t seed);
// One-step loss after the policy's argmax action.
double policy_validation_loss(const ModelConfig& cfg, const ParamStore& params, const std::vector<Dataset>& tasks,
                              const SequenceOptions& opt, std::uint64_t seed);

std::string train_log_csv(const std::vector<TrainLogRow>& rows);

}  // namespace afa
