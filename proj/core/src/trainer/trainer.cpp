#include "afa/trainer/trainer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "afa/diffkernel/ops.hpp"
#include "afa/diffkernel/optim.hpp"
#include "afa/diffkernel/tensor_io.hpp"
#include "afa/taskgen/dataset_io.hpp"
#include "afa/trainer/checkpoint.hpp"

namespace afa {
namespace {

// Stream tags for derive_rng.
enum : std::uint64_t { kInitStream = 1, kValTaskStream, kValSeqStream, kPredictorStream, kPolicyStream };

std::vector<Dataset> sample_validation_tasks(const TaskSampler& sampler, const TrainConfig& tc) {
  std::vector<Dataset> tasks;
  for (std::size_t i = 0; i < tc.validation_tasks; ++i) {
    Rng rng = derive_rng(tc.seed, {kValTaskStream, i});
    tasks.push_back(sampler(rng));
  }
  return tasks;
}

void write_outputs(const TrainConfig& tc, const std::string& stage, const ModelConfig& cfg, const ParamStore& params,
                   const std::string& suffix, std::size_t step, double val) {
  if (!tc.out_dir) return;
  save_checkpoint(*tc.out_dir / (stage + "_" + suffix + ".afat"), params, CheckpointMeta{cfg, 0, stage, step, val});
}

void write_log(const TrainConfig& tc, const std::string& stage, const std::vector<TrainLogRow>& log) {
  if (!tc.out_dir) return;
  write_file_atomic(*tc.out_dir / (stage + "_log.csv"), train_log_csv(log));
}

double temperature_at(const TrainConfig& tc, std::size_t step) {
  if (tc.gumbel_temperature_final <= 0.0 || tc.policy_steps <= 1) return tc.gumbel_temperature;
  const double frac = static_cast<double>(step - 1) / static_cast<double>(tc.policy_steps - 1);
  return tc.gumbel_temperature * std::pow(tc.gumbel_temperature_final / tc.gumbel_temperature, frac);
}

[[noreturn]] void diverged(const std::string& stage, std::size_t step, const std::exception& e) {
  throw std::runtime_error(stage + " training diverged at step " + std::to_string(step) + ": " + e.what());
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("train config: ") + what); };
  if (batch_tasks == 0) fail("batch_tasks must be positive");
  if (!(gumbel_temperature > 0.0)) fail("gumbel temperature must be positive");
  if (gumbel_temperature_final < 0.0) fail("final temperature must be >= 0");
  if (checkpoint_every == 0) fail("checkpoint_every must be positive");
  if (validation_tasks == 0) fail("validation_tasks must be positive");
  if (!(lr_predictor > 0 && lr_policy > 0 && lr_joint_finetune >= 0)) fail("learning rates must be positive");
}

double predictor_validation_loss(const ModelConfig& cfg, const ParamStore& params, const std::vector<Dataset>& tasks,
                                 const SequenceOptions& opt, std::uint64_t seed) {
  double total = 0.0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    Rng rng = derive_rng(seed, {kValSeqStream, i});
    const auto seq = make_training_sequence(tasks[i], opt, rng);
    Graph g;
    ParamBinding p(g, params, std::vector<std::string>{});
    total += sequence_loss(p, cfg, seq, g.constant(seq.query_acquired)).value().item();
  }
  return total / static_cast<double>(tasks.size());
}

double policy_validation_loss(const ModelConfig& cfg, const ParamStore& params, const std::vector<Dataset>& tasks,
                              const SequenceOptions& opt, std::uint64_t seed) {
  SequenceOptions o = opt;
  o.require_candidate = true;
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    Rng rng = derive_rng(seed, {kValSeqStream, i});
    const auto seq = make_training_sequence(tasks[i], o, rng);
    if (seq.queries() == 0) continue;
    Graph g;
    ParamBinding p(g, params, std::vector<std::string>{});
    const Tensor zero(seq.candidates.shape());
    auto sel = gumbel_straight_through(policy_log_probs(p, cfg, seq), seq.candidates, 1.0, zero);
    total += one_step_loss(p, cfg, seq, g.constant(sel.hard)).value().item();
    ++used;
  }
  if (used == 0) throw std::runtime_error("policy validation: no task has an acquirable feature");
  return total / static_cast<double>(used);
}

TrainResult pretrain_predictor(const ModelConfig& cfg, const TrainConfig& tc, const TaskSampler& sampler,
                               const ParamStore* init, const ProgressFn& progress) {
  cfg.validate();
  tc.validate();
  TrainResult res;
  if (init) {
    res.last = *init;
  } else {
    Rng rng = derive_rng(tc.seed, {kInitStream});
    res.last = init_model_params(cfg, rng);
  }
  ParamStore& params = res.last;
  const auto val_tasks = sample_validation_tasks(sampler, tc);
  OptimizerState opt =
      OptimizerState::for_params(params, LrSchedule{tc.lr_predictor, tc.warmup, tc.predictor_decay ? tc.predictor_steps : 0});

  res.best_val_loss = std::numeric_limits<double>::infinity();
  res.params = params;
  for (std::size_t step = 1; step <= tc.predictor_steps; ++step) {
    GradStore grads = GradStore::zeros_like(params);
    double train_loss = 0.0;
    try {
      for (std::size_t b = 0; b < tc.batch_tasks; ++b) {
        Rng rng = derive_rng(tc.seed, {kPredictorStream, step, b});
        const Dataset task = sampler(rng);
        const auto seq = make_training_sequence(task, tc.sequence, rng);
        Graph g;
        ParamBinding p(g, params);
        Var loss = sequence_loss(p, cfg, seq, g.constant(seq.query_acquired));
        g.backward(loss);
        p.accumulate(grads, 1.0 / static_cast<double>(tc.batch_tasks));
        train_loss += loss.value().item() / static_cast<double>(tc.batch_tasks);
      }
    } catch (const NonFiniteError& e) {
      diverged("predictor", step, e);
    }
    const double lr = adam_step(params, grads, opt);

    TrainLogRow row{"predictor", step, train_loss, std::nullopt, lr};
    if (step % tc.checkpoint_every == 0 || step == tc.predictor_steps) {
      const double val = predictor_validation_loss(cfg, params, val_tasks, tc.sequence, tc.seed);
      row.val_loss = val;
      if (val < res.best_val_loss) {
        res.best_val_loss = val;
        res.best_step = step;
        res.params = params;
        write_outputs(tc, "predictor", cfg, params, "best", step, val);
      }
    }
    res.log.push_back(row);
    if (row.val_loss) write_log(tc, "predictor", res.log);
    if (progress) progress(row);
  }
  write_outputs(tc, "predictor", cfg, params, "last", tc.predictor_steps,
                res.log.empty() || !res.log.back().val_loss ? 0.0 : *res.log.back().val_loss);
  write_log(tc, "predictor", res.log);
  return res;
}

TrainResult pretrain_policy(const ModelConfig& cfg, const TrainConfig& tc, const TaskSampler& sampler,
                            const ParamStore& predictor, const ProgressFn& progress) {
  cfg.validate();
  tc.validate();
  TrainResult res;
  res.last = predictor;
  ParamStore& params = res.last;
  const auto val_tasks = sample_validation_tasks(sampler, tc);
  OptimizerState opt = OptimizerState::for_params(params, LrSchedule{tc.lr_joint_finetune, tc.warmup, 0});
  opt.schedules[kPolicyGroup] = LrSchedule{tc.lr_policy, tc.warmup, 0};
  if (tc.lr_joint_finetune == 0.0) opt.schedules.erase("default");

  SequenceOptions seq_opt = tc.sequence;
  seq_opt.require_candidate = true;
  res.best_val_loss = std::numeric_limits<double>::infinity();
  res.params = params;
  for (std::size_t step = 1; step <= tc.policy_steps; ++step) {
    GradStore grads = GradStore::zeros_like(params);
    double train_loss = 0.0;
    std::size_t used = 0;
    const double tau = temperature_at(tc, step);
    try {
      for (std::size_t b = 0; b < tc.batch_tasks; ++b) {
        Rng rng = derive_rng(tc.seed, {kPolicyStream, step, b});
        const Dataset task = sampler(rng);
        const auto seq = make_training_sequence(task, seq_opt, rng);
        if (seq.queries() == 0) continue;
        const Tensor noise = tc.zero_noise ? Tensor(seq.candidates.shape()) : sample_gumbel(seq.candidates.shape(), rng);
        Graph g;
        ParamBinding p(g, params);
        auto obj = policy_objective(p, cfg, seq, tau, noise);
        g.backward(obj.loss);
        p.accumulate(grads);
        train_loss += obj.loss.value().item();
        ++used;
      }
    } catch (const NonFiniteError& e) {
      diverged("policy", step, e);
    }
    if (used > 0) {
      grads.scale(1.0 / static_cast<double>(used));
      train_loss /= static_cast<double>(used);
    }
    adam_step(params, grads, opt);

    TrainLogRow row{"policy", step, train_loss, std::nullopt, opt.schedules.at(kPolicyGroup).at(step)};
    if (step % tc.checkpoint_every == 0 || step == tc.policy_steps) {
      const double val = policy_validation_loss(cfg, params, val_tasks, tc.sequence, tc.seed);
      row.val_loss = val;
      if (val < res.best_val_loss) {
        res.best_val_loss = val;
        res.best_step = step;
        res.params = params;
        write_outputs(tc, "policy", cfg, params, "best", step, val);
      }
    }
    res.log.push_back(row);
    if (row.val_loss) write_log(tc, "policy", res.log);
    if (progress) progress(row);
  }
  write_outputs(tc, "policy", cfg, params, "last", tc.policy_steps,
                res.log.empty() || !res.log.back().val_loss ? 0.0 : *res.log.back().val_loss);
  write_log(tc, "policy", res.log);
  return res;
}

std::string train_log_csv(const std::vector<TrainLogRow>& rows) {
  std::string out = "stage,step,train_loss,val_loss,lr\n";
  for (const auto& r : rows)
    out += r.stage + "," + std::to_string(r.step) + "," + format_double(r.train_loss) + "," +
           (r.val_loss ? format_double(*r.val_loss) : "") + "," + format_double(r.lr) + "\n";
  return out;
}

}  // namespace afa
