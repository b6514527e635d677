#include "commands.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <json.hpp>
#include <stdexcept>
#include <thread>

#include "afa/oracle/discrete.hpp"
#include "afa/taskgen/dataset_io.hpp"
#include "afa/trainer/checkpoint.hpp"

namespace afa::cli {
namespace {

using ojson = nlohmann::ordered_json;

// Stream tags for derive_rng.
enum : std::uint64_t { kEvalStream = 0xE1, kTrainPoolStream = 0x71, kOracleStream = 0x0C, kSweepStream = 0x5000 };

std::string indexed(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu", prefix, i);
  return buf;
}

bool is_continuous(PriorKind k) { return k == PriorKind::kGp || k == PriorKind::kBnn; }

std::string state_string(const Assignment& s) {
  std::string out;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (j) out += '|';
    out += s[j] < 0 ? "-" : std::to_string(s[j]);
  }
  return out;
}

ProgressFn progress_printer(bool verbose) {
  if (!verbose) return {};
  return [](const TrainLogRow& row) {
    if (!row.val_loss) return;
    std::cerr << row.stage << " step " << row.step << "  train " << format_double(row.train_loss) << "  val "
              << format_double(*row.val_loss) << "  lr " << format_double(row.lr) << "\n";
  };
}

MethodSpec method_for_name(const ExperimentConfig& cfg, const std::string& name) {
  for (const auto& m : cfg.eval.methods)
    if (m.name == name) return m;
  MethodSpec m;
  m.policy = policy_kind_from_string(name);
  m.predictor = m.policy == PolicyKind::kMlpGreedy ? PredictorKind::kMlp : PredictorKind::kModel;
  m.name = name;
  return m;
}

}  // namespace

std::vector<EvalTask> sample_eval_tasks(const ExperimentConfig& cfg, std::uint64_t stream) {
  if (cfg.eval.context >= cfg.prior.n)
    throw std::invalid_argument("eval.context (" + std::to_string(cfg.eval.context) + ") must be below prior.n (" +
                                std::to_string(cfg.prior.n) + ") to leave query rows");
  std::vector<EvalTask> tasks;
  for (std::size_t i = 0; i < cfg.eval.tasks; ++i) {
    Rng rng = derive_rng(cfg.seed, {stream, i});
    const auto context = cfg.eval.queries_missing ? std::nullopt : std::optional<std::size_t>(cfg.eval.context);
    GeneratedTask g = sample_task(cfg, rng, context);
    tasks.push_back(EvalTask{indexed("eval", i), std::move(g.data), std::move(g.world), cfg.eval.context});
  }
  return tasks;
}

fs::path gen_tasks(const ExperimentConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir / "eval");
  const auto tasks = sample_eval_tasks(cfg, kEvalStream);
  ojson manifest;
  manifest["format"] = "afa-manifest";
  manifest["version"] = 1;
  manifest["seed"] = cfg.seed;
  manifest["task_kind"] = to_string(cfg.prior.task_kind());
  manifest["d"] = cfg.prior.d();
  manifest["c"] = cfg.prior.c();
  manifest["rows"] = cfg.prior.n;
  manifest["context"] = cfg.eval.context;
  manifest["eval_tasks"] = ojson::array();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const EvalTask& t = tasks[i];
    const std::string file = "eval/" + t.id + ".afat";
    save_dataset(dir / file, t.data);
    ojson entry = {{"id", t.id}, {"file", file}, {"stream", {kEvalStream, i}}};
    if (t.world) {
      const std::string wf = "eval/" + t.id + ".world.json";
      write_file_atomic(dir / wf, world_to_json(*t.world));
      entry["world"] = wf;
    }
    double missing = 0.0, acquirable = 0.0;
    for (std::size_t row = 0; row < t.data.n(); ++row)
      for (std::size_t j = 0; j < t.data.d(); ++j)
        if (!t.data.baseline[j]) {
          acquirable += 1.0;
          missing += t.data.r.at(row, j) == 0.0 ? 1.0 : 0.0;
        }
    entry["missing_fraction"] = acquirable > 0 ? missing / acquirable : 0.0;
    manifest["eval_tasks"].push_back(entry);
  }
  manifest["train_tasks"] = ojson::array();
  if (cfg.train_pool > 0) fs::create_directories(dir / "train");
  for (std::size_t i = 0; i < cfg.train_pool; ++i) {
    Rng rng = derive_rng(cfg.seed, {kTrainPoolStream, i});
    const std::string file = "train/" + indexed("train", i) + ".afat";
    save_dataset(dir / file, sample_task(cfg, rng).data);
    manifest["train_tasks"].push_back({{"id", indexed("train", i)}, {"file", file}, {"stream", {kTrainPoolStream, i}}});
  }
  manifest["config"] = cfg.raw;
  const fs::path path = dir / "manifest.json";
  write_file_atomic(path, manifest.dump(2) + "\n");
  return path;
}

std::vector<EvalTask> load_tasks(const fs::path& path, const ExperimentConfig& cfg) {
  std::vector<EvalTask> tasks;
  if (path.extension() == ".json") {
    const auto m = nlohmann::json::parse(read_file(path), nullptr, false);
    if (m.is_discarded() || m.value("format", "") != "afa-manifest")
      throw FormatError(path.string() + " is not a task manifest");
    const fs::path base = path.parent_path();
    const std::size_t context = m.at("context").get<std::size_t>();
    for (const auto& e : m.at("eval_tasks")) {
      EvalTask t;
      t.id = e.at("id").get<std::string>();
      t.data = load_dataset(base / e.at("file").get<std::string>());
      if (e.contains("world")) t.world = world_from_json(read_file(base / e.at("world").get<std::string>()));
      t.context = context;
      tasks.push_back(std::move(t));
    }
    return tasks;
  }
  EvalTask t;
  t.id = path.stem().string();
  t.data = load_dataset(path);
  fs::path world = path;
  world.replace_extension(".world.json");
  if (fs::exists(world)) t.world = world_from_json(read_file(world));
  t.context = cfg.eval.context;
  if (t.context >= t.data.n()) throw std::invalid_argument(path.string() + ": eval.context leaves no query rows");
  tasks.push_back(std::move(t));
  return tasks;
}

TrainResult run_pretrain_predictor(const ExperimentConfig& cfg, const std::optional<fs::path>& init, bool verbose) {
  TrainConfig tc = cfg.train;
  tc.out_dir = cfg.out_dir;
  fs::create_directories(cfg.out_dir);
  std::optional<Checkpoint> start;
  if (init) start = load_checkpoint(*init, &cfg.model);
  return pretrain_predictor(cfg.model, tc, make_training_sampler(cfg), start ? &start->params : nullptr,
                            progress_printer(verbose));
}

TrainResult run_pretrain_policy(const ExperimentConfig& cfg, const fs::path& predictor, bool verbose) {
  TrainConfig tc = cfg.train;
  tc.out_dir = cfg.out_dir;
  fs::create_directories(cfg.out_dir);
  const Checkpoint ck = load_checkpoint(predictor, &cfg.model);
  return pretrain_policy(cfg.model, tc, make_training_sampler(cfg), ck.params, progress_printer(verbose));
}

LoadedModel load_model(const fs::path& checkpoint, const ExperimentConfig& cfg) {
  Checkpoint ck = load_checkpoint(checkpoint);
  const ModelConfig& m = ck.meta.model;
  if (m.d != cfg.prior.d() || m.c != cfg.prior.c() || m.kind != cfg.prior.task_kind())
    throw std::invalid_argument(checkpoint.string() + " was trained for d=" + std::to_string(m.d) + ", c=" +
                                std::to_string(m.c) + " " + to_string(m.kind) + " tasks, but the prior gives d=" +
                                std::to_string(cfg.prior.d()) + ", c=" + std::to_string(cfg.prior.c()));
  return {m, std::move(ck.params)};
}

std::vector<StepRecord> acquire_all(const std::vector<EvalTask>& tasks, const MethodSpec& method,
                                    const ExperimentConfig& cfg, const LoadedModel* model, std::size_t budget) {
  const bool needs_model = method.policy == PolicyKind::kLearned || method.predictor == PredictorKind::kModel;
  if (needs_model && !model)
    throw std::invalid_argument("method '" + method.name + "' uses the pretrained model; pass --checkpoint");
  EvalResources res;
  if (model) {
    res.model = &model->config;
    res.params = &model->params;
  }
  res.mlp = cfg.eval.mlp;
  res.oracle_samples = cfg.eval.oracle_samples;
  res.seed = cfg.seed;

  std::vector<std::vector<StepRecord>> per_task(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        const PreparedTask prep = prepare_task(tasks[i], cfg.eval.max_queries);
        TaskContext ctx(tasks[i], prep, res);
        auto predictor = ctx.predictor(method.predictor);
        auto policy = ctx.policy(method.policy);
        per_task[i] = run_acquisition(tasks[i], prep, *predictor, *policy, budget);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(cfg.eval.threads, std::max<std::size_t>(1, tasks.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<StepRecord> out;
  for (auto& v : per_task) out.insert(out.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  return out;
}

EvalOutputs evaluate_files(const std::vector<fs::path>& trajectories, const std::vector<std::string>& names,
                           const fs::path& dir) {
  if (!names.empty() && names.size() != trajectories.size())
    throw std::invalid_argument("evaluate: give one --name per trajectory file");
  EvalOutputs out;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const std::string name = names.empty() ? trajectories[i].stem().string() : names[i];
    const auto rows = compute_metrics(name, records_from_jsonl(read_file(trajectories[i])));
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
  }
  fs::create_directories(dir);
  out.metrics_csv = dir / "metrics.csv";
  out.summary_json = dir / "summary.json";
  write_file_atomic(out.metrics_csv, metrics_to_csv(out.rows));
  write_file_atomic(out.summary_json, summary_to_json(summarize(out.rows)));
  return out;
}

std::vector<DeltaEntry> compare_rows(const std::vector<MetricRow>& rows, const std::string& baseline,
                                     const std::vector<std::string>& methods) {
  std::map<std::string, std::vector<MetricRow>> by_method;
  for (const auto& r : rows) by_method[r.method].push_back(r);
  if (!by_method.count(baseline)) throw std::invalid_argument("compare: baseline '" + baseline + "' not in the metrics");
  std::vector<std::string> targets = methods;
  if (targets.empty())
    for (const auto& [name, _] : by_method)
      if (name != baseline) targets.push_back(name);
  std::vector<DeltaEntry> out;
  for (const auto& name : targets) {
    auto it = by_method.find(name);
    if (it == by_method.end()) throw std::invalid_argument("compare: method '" + name + "' not in the metrics");
    const auto d = compare_methods(it->second, by_method.at(baseline));
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

fs::path run_sweep(const ExperimentConfig& cfg, const LoadedModel* model, const fs::path& dir) {
  if (cfg.eval.context >= cfg.prior.n) throw std::invalid_argument("sweep: eval.context must be below prior.n");
  const std::size_t queries = cfg.prior.n - cfg.eval.context;
  std::vector<MethodSpec> methods = cfg.eval.methods;
  bool have_baseline = false;
  for (const auto& m : methods) have_baseline = have_baseline || m.name == cfg.sweep.baseline;
  if (!have_baseline) methods.push_back(method_for_name(cfg, cfg.sweep.baseline));

  std::string csv = "context,missing_rate,method,baseline,metric,step,delta_mean,delta_se,tasks\n";
  for (std::size_t ci = 0; ci < cfg.sweep.context.size(); ++ci) {
    for (std::size_t mi = 0; mi < cfg.sweep.missing_rate.size(); ++mi) {
      const double rate = cfg.sweep.missing_rate[mi];
      if (rate > 0.0 && !is_continuous(cfg.prior.kind))
        throw std::invalid_argument("sweep: discrete priors carry their own missingness; set sweep.missing_rate=[0]");
      ExperimentConfig c = cfg;
      c.eval.context = cfg.sweep.context[ci];
      c.prior.n = c.eval.context + queries;
      c.missing.mechanism = rate > 0.0 ? Mechanism::kMcar : Mechanism::kNone;
      c.missing.mcar_rate = rate;
      const auto tasks = sample_eval_tasks(c, kSweepStream + 64 * ci + mi);
      std::vector<MetricRow> rows;
      for (const auto& m : methods) {
        const auto r = compute_metrics(m.name, acquire_all(tasks, m, c, model, c.eval.budget));
        rows.insert(rows.end(), r.begin(), r.end());
      }
      for (const auto& d : compare_rows(rows, cfg.sweep.baseline, {}))
        csv += std::to_string(c.eval.context) + "," + format_double(rate) + "," + d.method + "," + d.baseline + "," +
               d.metric + "," + std::to_string(d.step) + "," + format_double(d.delta.mean) + "," +
               format_double(d.delta.se) + "," + std::to_string(d.delta.n) + "\n";
    }
  }
  fs::create_directories(dir);
  const fs::path path = dir / "sweep.csv";
  write_file_atomic(path, csv);
  return path;
}

fs::path oracle_check(const ExperimentConfig& cfg, std::size_t worlds, const fs::path& dir) {
  if (is_continuous(cfg.prior.kind)) throw std::invalid_argument("oracle-check needs prior.kind discrete or copy");
  std::string csv = "world,state,j,full,complete_case,gap\n";
  std::size_t checks = 0, violations = 0;
  double max_gap = 0.0, gap_sum = 0.0;
  for (std::size_t w = 0; w < worlds; ++w) {
    Rng rng = derive_rng(cfg.seed, {kOracleStream, w});
    const DiscreteWorld world = cfg.prior.kind == PriorKind::kCopy ? sample_copy_world(cfg.prior.copy_d, rng)
                                                                   : sample_discrete_world(cfg.prior.discrete, rng);
    for (const Assignment& s : enumerate_states(world)) {
      for (std::size_t j = 0; j < world.columns(); ++j) {
        if (s[j] >= 0 || world.baseline[j]) continue;
        const std::string prefix = indexed("world", w) + "," + state_string(s) + "," + std::to_string(j) + ",";
        try {
          const auto r = identification_check(world, s, j);
          csv += prefix + format_double(r.full) + "," + format_double(r.complete_case) + "," + format_double(r.gap) + "\n";
          ++checks;
          max_gap = std::max(max_gap, r.gap);
          gap_sum += r.gap;
        } catch (const PositivityError&) {
          csv += prefix + "nan,nan,nan\n";
          ++violations;
        }
      }
    }
  }
  fs::create_directories(dir);
  write_file_atomic(dir / "identification.csv", csv);
  ojson summary;
  summary["worlds"] = worlds;
  summary["prior"] = cfg.prior.kind == PriorKind::kCopy ? "copy" : to_string(cfg.prior.discrete.wiring);
  summary["checks"] = checks;
  summary["positivity_violations"] = violations;
  summary["max_gap"] = max_gap;
  summary["mean_gap"] = checks ? gap_sum / static_cast<double>(checks) : 0.0;
  write_file_atomic(dir / "identification_summary.json", summary.dump(2) + "\n");
  return dir / "identification.csv";
}

}  // namespace afa::cli
