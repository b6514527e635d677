#include <gtest/gtest.h>

#include <cstdlib>
#include <map>

#include "afa/diffkernel/tensor_io.hpp"
#include "afa/taskgen/dataset_io.hpp"
#include "commands.hpp"

namespace afa::cli {
namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("afa_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

// Every regular file under `dir`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return out;
}

std::vector<std::string> tiny(const fs::path& out) {
  return {"out_dir=" + out.string(), "prior.gp.d=4", "prior.gp.informative_max=4", "prior.n=30", "eval.context=20",
          "eval.tasks=3", "eval.budget=2", "model.model_dim=16", "model.hidden=16", "model.layers=1", "model.heads=2",
          "model.embedding_depth=1", "train.predictor_steps=6", "train.policy_steps=4", "train.checkpoint_every=3",
          "train.validation_tasks=2", "train.warmup=2", "eval.mlp.epochs=2", "eval.mlp.selector_epochs=2"};
}

// gen-tasks, both pretraining stages, acquisition for every method, evaluation.
void pipeline(const ExperimentConfig& cfg) {
  gen_tasks(cfg, cfg.out_dir / "tasks");
  run_pretrain_predictor(cfg, std::nullopt, false);
  run_pretrain_policy(cfg, cfg.out_dir / "predictor_best.afat", false);
  const auto tasks = load_tasks(cfg.out_dir / "tasks" / "manifest.json", cfg);
  const auto model = load_model(cfg.out_dir / "policy_best.afat", cfg);
  std::vector<fs::path> files;
  std::vector<MethodSpec> methods = cfg.eval.methods;
  methods.push_back({PolicyKind::kOracleGreedy, PredictorKind::kOracle, "oracle_greedy"});
  methods.push_back({PolicyKind::kMlpGreedy, PredictorKind::kMlp, "mlp_greedy"});
  for (const auto& m : methods) {
    files.push_back(cfg.out_dir / "trajectories" / (m.name + ".jsonl"));
    fs::create_directories(files.back().parent_path());
    write_file_atomic(files.back(), records_to_jsonl(acquire_all(tasks, m, cfg, &model, cfg.eval.budget)));
  }
  const auto ev = evaluate_files(files, {}, cfg.out_dir);
  write_file_atomic(cfg.out_dir / "deltas.csv", deltas_to_csv(compare_rows(ev.rows, "random", {})));
  oracle_check(load_experiment(std::nullopt, {"prior.kind=discrete", "out_dir=" + cfg.out_dir.string()}), 2, cfg.out_dir);
}

TEST(Config, OverridesAndUnknownKeys) {
  const auto cfg = load_experiment(std::nullopt, {"eval.budget=5", "prior.kind=\"bnn\"", "missingness.mechanism=mcar"});
  EXPECT_EQ(cfg.eval.budget, 5u);
  EXPECT_EQ(cfg.prior.kind, PriorKind::kBnn);
  EXPECT_EQ(cfg.model.kind, TaskKind::kClassification);
  EXPECT_EQ(cfg.missing.mechanism, Mechanism::kMcar);
  EXPECT_THROW(load_experiment(std::nullopt, {"eval.budgets=5"}), std::invalid_argument);
  EXPECT_THROW(load_experiment(std::nullopt, {"eval.budget=11"}), std::invalid_argument);  // k > d

  const fs::path dir = scratch("config");
  fs::create_directories(dir);
  write_file_atomic(dir / "c.json", R"({"eval": {"tasks": 7, "typo": 1}})");
  EXPECT_THROW(load_experiment(dir / "c.json", {}), std::invalid_argument);
  write_file_atomic(dir / "c.json", R"({"eval": {"tasks": 7}, "seed": 3})");
  EXPECT_EQ(load_experiment(dir / "c.json", {}).eval.tasks, 7u);
  EXPECT_EQ(load_experiment(dir / "c.json", {}).seed, 3u);
  EXPECT_EQ(load_experiment(dir / "c.json", {"seed=4"}).seed, 4u);
  ::setenv("AFA_SEED", "99", 1);
  EXPECT_EQ(load_experiment(dir / "c.json", {"seed=4"}).seed, 99u);
  ::unsetenv("AFA_SEED");
  fs::remove_all(dir);
}

TEST(GenTasks, ManifestByteIdenticalOnRerun) {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  auto args = tiny(a);
  args.push_back("missingness.mechanism=mar");
  args.push_back("prior.gp.baseline_count=1");
  const auto cfg = load_experiment(std::nullopt, args);
  gen_tasks(cfg, a);
  gen_tasks(cfg, b);
  const auto sa = snapshot(a), sb = snapshot(b);
  EXPECT_EQ(sa, sb);
  EXPECT_EQ(sa.size(), 4u);  // manifest + 3 tasks
  for (const auto& t : load_tasks(a / "manifest.json", cfg)) {
    EXPECT_NO_THROW(t.data.validate());
    for (std::size_t i = 0; i < t.data.n(); ++i) EXPECT_EQ(t.data.r.at(i, 0), 1.0);  // baseline column
    for (std::size_t i = t.context; i < t.data.n(); ++i)
      for (std::size_t j = 0; j < t.data.d(); ++j) EXPECT_EQ(t.data.r.at(i, j), 1.0);  // queries fully observed
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Pipeline, RerunIsByteIdentical) {
  const fs::path dir = scratch("pipe");
  const auto cfg = load_experiment(std::nullopt, tiny(dir));
  pipeline(cfg);
  const auto first = snapshot(dir);
  fs::remove_all(dir);
  pipeline(cfg);
  const auto second = snapshot(dir);
  ASSERT_EQ(first.size(), second.size());
  for (const auto& [file, bytes] : first) EXPECT_EQ(bytes, second.at(file)) << file;
  EXPECT_TRUE(first.count("metrics.csv") && first.count("summary.json") && first.count("identification.csv"));
  EXPECT_TRUE(first.count("deltas.csv") && first.count("policy_best.afat") && first.count("tasks/manifest.json"));
  fs::remove_all(dir);
}

TEST(Acquire, ThreadCountDoesNotChangeOutput) {
  auto one = load_experiment(std::nullopt, tiny(scratch("threads")));
  auto four = one;
  four.eval.threads = 4;
  const auto tasks = sample_eval_tasks(one, 1);
  const MethodSpec m{PolicyKind::kOracleGreedy, PredictorKind::kOracle, "oracle_greedy"};
  EXPECT_EQ(records_to_jsonl(acquire_all(tasks, m, one, nullptr, 2)),
            records_to_jsonl(acquire_all(tasks, m, four, nullptr, 2)));
  const MethodSpec learned{PolicyKind::kLearned, PredictorKind::kModel, "learned"};
  EXPECT_THROW(acquire_all(tasks, learned, one, nullptr, 2), std::invalid_argument);
}

TEST(Sweep, EmitsEveryGridCell) {
  const fs::path dir = scratch("sweep");
  auto args = tiny(dir);
  args.insert(args.end(), {R"(eval.methods=[{"policy":"oracle_greedy","predictor":"oracle"},
                                            {"policy":"random","predictor":"oracle"}])",
                           "sweep.baseline=random", "sweep.context=[5,10]", "sweep.missing_rate=[0,0.3]", "eval.tasks=2"});
  const auto csv = read_file(run_sweep(load_experiment(std::nullopt, args), nullptr, dir));
  for (const char* cell : {"\n5,0,", "\n5,0.3,", "\n10,0,", "\n10,0.3,"}) EXPECT_NE(csv.find(cell), std::string::npos) << cell;
  EXPECT_EQ(csv.find("nan"), std::string::npos);
  fs::remove_all(dir);
}

TEST(OracleCheck, MarWorldsIdentified) {
  const fs::path dir = scratch("oracle");
  const auto cfg = load_experiment(std::nullopt, {"prior.kind=discrete", "prior.discrete.d=2", "eval.budget=2"});
  oracle_check(cfg, 20, dir);
  const auto summary = nlohmann::json::parse(read_file(dir / "identification_summary.json"));
  EXPECT_GT(summary["checks"].get<std::size_t>(), 0u);
  EXPECT_LT(summary["max_gap"].get<double>(), 1e-10);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace afa::cli
