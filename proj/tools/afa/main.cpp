#include <CLI11.hpp>
#include <algorithm>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "afa/diffkernel/tensor_io.hpp"
#include "afa/taskgen/dataset_io.hpp"
#include "commands.hpp"

namespace {

using namespace afa;
using namespace afa::cli;

struct Common {
  std::string config;
  std::vector<std::string> set;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  sub->add_option("--set", c.set, "override a config key, e.g. --set eval.budget=4")->take_all();
}

ExperimentConfig load(const Common& c) {
  return load_experiment(c.config.empty() ? std::nullopt : std::optional<fs::path>(c.config), c.set);
}

std::vector<fs::path> default_trajectories(const fs::path& dir) {
  std::vector<fs::path> out;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".jsonl") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw std::invalid_argument("no trajectory files given and none found in " + dir.string());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"afa: meta active feature acquisition"};
  app.require_subcommand(1);
  Common common;

  auto* show = app.add_subcommand("show-config", "print the merged configuration");
  add_common(show, common);

  auto* gen = app.add_subcommand("gen-tasks", "sample eval (and optional train) task pools from the prior");
  add_common(gen, common);
  std::string gen_out;
  gen->add_option("-o,--out", gen_out, "output directory (default <out_dir>/tasks)");

  auto* pre = app.add_subcommand("pretrain-predictor", "train backbone and predictor head");
  add_common(pre, common);
  std::string pre_init;
  bool quiet = false;
  pre->add_option("--init", pre_init, "start from this checkpoint")->check(CLI::ExistingFile);
  pre->add_flag("-q,--quiet", quiet, "no progress on stderr");

  auto* pol = app.add_subcommand("pretrain-policy", "train the policy head on top of a predictor");
  add_common(pol, common);
  std::string pol_pred;
  pol->add_option("--predictor", pol_pred, "predictor checkpoint (default <out_dir>/predictor_best.afat)");
  pol->add_flag("-q,--quiet", quiet, "no progress on stderr");

  auto* acq = app.add_subcommand("acquire", "run greedy acquisition and write trajectories (JSONL)");
  add_common(acq, common);
  std::string acq_tasks, acq_ckpt, acq_policy, acq_predictor, acq_name, acq_out;
  std::optional<std::size_t> acq_budget;
  acq->add_option("--tasks", acq_tasks, "manifest.json or one .afat task (default <out_dir>/tasks/manifest.json)");
  acq->add_option("--checkpoint", acq_ckpt, "model checkpoint")->check(CLI::ExistingFile);
  acq->add_option("--policy", acq_policy, "learned | random | oracle_greedy | mlp_greedy (default: every eval.methods entry)");
  acq->add_option("--predictor", acq_predictor, "model | oracle | mlp");
  acq->add_option("-k,--budget", acq_budget, "acquisition budget (default eval.budget)");
  acq->add_option("--name", acq_name, "method name (default: policy name)");
  acq->add_option("-o,--out", acq_out, "trajectory file, single method only (default <out_dir>/trajectories/<name>.jsonl)");

  auto* ev = app.add_subcommand("evaluate", "per-step metrics from trajectory files");
  add_common(ev, common);
  std::vector<std::string> ev_files, ev_names;
  std::string ev_out;
  ev->add_option("trajectories", ev_files, "trajectory files (default <out_dir>/trajectories/*.jsonl)");
  ev->add_option("--name", ev_names, "method name per file (default: file stem)");
  ev->add_option("-o,--out", ev_out, "output directory (default <out_dir>)");

  auto* cmp = app.add_subcommand("compare", "paired improvement over a baseline, or the context/missingness sweep");
  add_common(cmp, common);
  std::string cmp_metrics, cmp_baseline, cmp_out, cmp_ckpt;
  std::vector<std::string> cmp_methods;
  bool sweep = false;
  cmp->add_option("--metrics", cmp_metrics, "metrics CSV (default <out_dir>/metrics.csv)");
  cmp->add_option("--baseline", cmp_baseline, "baseline method (default sweep.baseline)");
  cmp->add_option("--method", cmp_methods, "methods to compare (default: all others)");
  cmp->add_option("-o,--out", cmp_out, "output file (default <out_dir>/deltas.csv) or directory with --sweep");
  cmp->add_flag("--sweep", sweep, "run eval.methods over sweep.context x sweep.missing_rate");
  cmp->add_option("--checkpoint", cmp_ckpt, "model checkpoint for --sweep")->check(CLI::ExistingFile);

  auto* orc = app.add_subcommand("oracle-check", "full vs complete-case CMI over sampled discrete worlds");
  add_common(orc, common);
  std::optional<std::size_t> orc_worlds;
  std::string orc_out;
  orc->add_option("--worlds", orc_worlds, "number of worlds (default eval.tasks)");
  orc->add_option("-o,--out", orc_out, "output directory (default <out_dir>)");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = load(common);
    const fs::path out_dir = cfg.out_dir;

    if (show->parsed()) {
      std::cout << cfg.raw.dump(2) << "\n";
    } else if (gen->parsed()) {
      const auto path = gen_tasks(cfg, gen_out.empty() ? out_dir / "tasks" : fs::path(gen_out));
      std::cout << path.string() << "\n";
    } else if (pre->parsed()) {
      const auto r = run_pretrain_predictor(cfg, pre_init.empty() ? std::nullopt : std::optional<fs::path>(pre_init), !quiet);
      std::cout << "best validation loss " << format_double(r.best_val_loss) << " at step " << r.best_step << "\n";
    } else if (pol->parsed()) {
      const auto r = run_pretrain_policy(cfg, pol_pred.empty() ? out_dir / "predictor_best.afat" : fs::path(pol_pred), !quiet);
      std::cout << "best validation loss " << format_double(r.best_val_loss) << " at step " << r.best_step << "\n";
    } else if (acq->parsed()) {
      const auto tasks = load_tasks(acq_tasks.empty() ? out_dir / "tasks" / "manifest.json" : fs::path(acq_tasks), cfg);
      std::optional<LoadedModel> model;
      if (!acq_ckpt.empty()) model = load_model(acq_ckpt, cfg);
      std::vector<MethodSpec> methods = cfg.eval.methods;
      if (!acq_policy.empty()) {
        MethodSpec m;
        m.policy = policy_kind_from_string(acq_policy);
        m.predictor = !acq_predictor.empty()                  ? predictor_kind_from_string(acq_predictor)
                      : m.policy == PolicyKind::kMlpGreedy    ? PredictorKind::kMlp
                                                              : PredictorKind::kModel;
        m.name = acq_name.empty() ? acq_policy : acq_name;
        methods = {m};
      } else if (!acq_out.empty() && methods.size() != 1) {
        throw std::invalid_argument("--out needs a single method; pass --policy");
      }
      for (const auto& m : methods) {
        const fs::path path = !acq_out.empty() ? fs::path(acq_out) : out_dir / "trajectories" / (m.name + ".jsonl");
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        const auto records = acquire_all(tasks, m, cfg, model ? &*model : nullptr, acq_budget.value_or(cfg.eval.budget));
        write_file_atomic(path, records_to_jsonl(records));
        std::cout << path.string() << "\n";
      }
    } else if (ev->parsed()) {
      std::vector<fs::path> files(ev_files.begin(), ev_files.end());
      if (files.empty()) files = default_trajectories(out_dir / "trajectories");
      const auto r = evaluate_files(files, ev_names, ev_out.empty() ? out_dir : fs::path(ev_out));
      std::cout << r.metrics_csv.string() << "\n" << r.summary_json.string() << "\n";
    } else if (cmp->parsed()) {
      if (sweep) {
        std::optional<LoadedModel> model;
        if (!cmp_ckpt.empty()) model = load_model(cmp_ckpt, cfg);
        std::cout << run_sweep(cfg, model ? &*model : nullptr, cmp_out.empty() ? out_dir : fs::path(cmp_out)).string()
                  << "\n";
      } else {
        const auto rows = metrics_from_csv(read_file(cmp_metrics.empty() ? out_dir / "metrics.csv" : fs::path(cmp_metrics)));
        const auto deltas = compare_rows(rows, cmp_baseline.empty() ? cfg.sweep.baseline : cmp_baseline, cmp_methods);
        const fs::path path = cmp_out.empty() ? out_dir / "deltas.csv" : fs::path(cmp_out);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_file_atomic(path, deltas_to_csv(deltas));
        std::cout << path.string() << "\n";
      }
    } else if (orc->parsed()) {
      const auto path = oracle_check(cfg, orc_worlds.value_or(cfg.eval.tasks), orc_out.empty() ? out_dir : fs::path(orc_out));
      std::cout << path.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "afa: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
