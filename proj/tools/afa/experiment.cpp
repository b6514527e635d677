#include "experiment.hpp"

#include <cstdlib>
#include <numeric>
#include <stdexcept>

#include "afa/diffkernel/tensor_io.hpp"

namespace afa::cli {
namespace {

using json = nlohmann::json;

const char* const kPriorNames[] = {"gp", "bnn", "discrete", "copy"};

PriorKind prior_kind_from_string(const std::string& s) {
  for (int i = 0; i < 4; ++i)
    if (s == kPriorNames[i]) return static_cast<PriorKind>(i);
  throw std::invalid_argument("config: prior.kind must be one of gp, bnn, discrete, copy (got '" + s + "')");
}

void reject_unknown(const json& user, const json& defaults, const std::string& path) {
  if (!user.is_object() || !defaults.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!defaults.contains(key)) throw std::invalid_argument("config: unknown key '" + here + "'");
    reject_unknown(value, defaults.at(key), here);
  }
}

void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  std::string pointer;
  for (std::size_t start = 0; start <= key.size();) {
    const auto dot = std::min(key.find('.', start), key.size());
    pointer += "/" + key.substr(start, dot - start);
    start = dot + 1;
  }
  const json::json_pointer ptr(pointer);
  if (!cfg.contains(ptr)) throw std::invalid_argument("config: unknown key '" + key + "' in --set");
  cfg[ptr] = value;
}

template <class T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

std::size_t PriorSpec::d() const {
  switch (kind) {
    case PriorKind::kGp: return gp.d;
    case PriorKind::kBnn: return bnn_d;
    case PriorKind::kDiscrete: return discrete.d + discrete.baseline_columns;
    case PriorKind::kCopy: return copy_d;
  }
  return 0;
}

std::size_t PriorSpec::c() const {
  switch (kind) {
    case PriorKind::kGp: return 1;
    case PriorKind::kBnn: return bnn.classes;
    case PriorKind::kDiscrete: return discrete.y_support;
    case PriorKind::kCopy: return 2;
  }
  return 0;
}

TaskKind PriorSpec::task_kind() const { return kind == PriorKind::kGp ? TaskKind::kRegression : TaskKind::kClassification; }

json default_config_json() {
  return json::parse(R"({
    "seed": 0,
    "out_dir": "afa-out",
    "prior": {
      "kind": "gp",
      "n": 128,
      "gp": {"d": 10, "kernel": "rbf", "lengthscale_min": 0.1, "lengthscale_max": 5.0, "outputscale_min": 0.5,
             "outputscale_max": 2.0, "noise_std": 0.02, "informative_min": 1, "informative_max": 10,
             "baseline_count": 0},
      "bnn": {"d": 10, "pool": 0, "hidden_dim": 8, "classes": 2, "cluster_min": 1, "cluster_max": 3,
              "feats_min": 1, "feats_max": 10, "prevalence_min": 0.05, "prevalence_max": 0.95,
              "temperature_min": 0.5, "temperature_max": 2.0, "baseline_count": 0},
      "discrete": {"d": 3, "baseline_columns": 1, "support_min": 2, "support_max": 3, "y_support": 2,
                   "wiring": "mar", "dirichlet_alpha": 1.0, "propensity_min": 0.1, "propensity_max": 1.0},
      "copy": {"d": 4}
    },
    "missingness": {"mechanism": "none", "max_missing_prob": 0.5, "mcar_rate": -1.0, "mar_hidden": 8},
    "model": {"model_dim": 256, "hidden": 512, "layers": 6, "heads": 4, "embedding_depth": 4},
    "train": {"predictor_steps": 100000, "policy_steps": 50000, "batch_tasks": 8, "lr_predictor": 1e-4,
              "lr_policy": 1e-4, "lr_joint_finetune": 1e-5, "warmup": 500, "predictor_decay": true,
              "gumbel_temperature": 0.1, "gumbel_temperature_final": 0.0, "checkpoint_every": 500,
              "validation_tasks": 64, "min_context": 1, "max_queries": 0},
    "eval": {"tasks": 200, "context": 64, "max_queries": 0, "budget": 3,
             "methods": [{"policy": "learned", "predictor": "model"}, {"policy": "random", "predictor": "model"}],
             "oracle_samples": 16, "threads": 1, "queries_missing": false,
             "mlp": {"hidden": 128, "batch": 64, "epochs": 300, "selector_epochs": 300, "lr": 1e-3,
                     "selector_tau": 0.5}},
    "sweep": {"context": [25, 50, 100, 250, 500], "missing_rate": [0.0, 0.1, 0.3, 0.5], "baseline": "mlp_greedy"},
    "gen": {"train_tasks": 0}
  })");
}

ExperimentConfig load_experiment(const std::optional<std::filesystem::path>& file,
                                 const std::vector<std::string>& overrides) {
  const json defaults = default_config_json();
  json merged = defaults;
  if (file) {
    const json user = json::parse(read_file(*file), nullptr, false);
    if (user.is_discarded() || !user.is_object()) throw std::invalid_argument("config: " + file->string() + " is not a JSON object");
    reject_unknown(user, defaults, "");
    merged.merge_patch(user);
  }
  for (const auto& o : overrides) apply_override(merged, o);
  if (const char* env = std::getenv("AFA_SEED"); env && *env) {
    try {
      merged["seed"] = std::stoull(env);
    } catch (const std::logic_error&) {
      throw std::invalid_argument(std::string("AFA_SEED must be a non-negative integer, got '") + env + "'");
    }
  }
  return experiment_from_json(merged);
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig c;
  c.raw = j;
  c.seed = get<std::uint64_t>(j, "seed");
  c.out_dir = get<std::string>(j, "out_dir");

  const json& p = j.at("prior");
  c.prior.kind = prior_kind_from_string(get<std::string>(p, "kind"));
  c.prior.n = get<std::size_t>(p, "n");
  const json& gp = p.at("gp");
  c.prior.gp.d = get<std::size_t>(gp, "d");
  c.prior.gp.kernel = kernel_kind_from_string(get<std::string>(gp, "kernel"));
  c.prior.gp.lengthscale_min = get<double>(gp, "lengthscale_min");
  c.prior.gp.lengthscale_max = get<double>(gp, "lengthscale_max");
  c.prior.gp.outputscale_min = get<double>(gp, "outputscale_min");
  c.prior.gp.outputscale_max = get<double>(gp, "outputscale_max");
  c.prior.gp.noise_std = get<double>(gp, "noise_std");
  c.prior.gp.informative_min = get<std::size_t>(gp, "informative_min");
  c.prior.gp.informative_max = get<std::size_t>(gp, "informative_max");
  c.prior.gp.baseline_count = get<std::size_t>(gp, "baseline_count");
  const json& bnn = p.at("bnn");
  c.prior.bnn_d = get<std::size_t>(bnn, "d");
  c.prior.bnn_pool = get<std::size_t>(bnn, "pool");
  c.prior.bnn.hidden_dim = get<std::size_t>(bnn, "hidden_dim");
  c.prior.bnn.classes = get<std::size_t>(bnn, "classes");
  c.prior.bnn.cluster_min = get<std::size_t>(bnn, "cluster_min");
  c.prior.bnn.cluster_max = get<std::size_t>(bnn, "cluster_max");
  c.prior.bnn.feats_min = get<std::size_t>(bnn, "feats_min");
  c.prior.bnn.feats_max = get<std::size_t>(bnn, "feats_max");
  c.prior.bnn.prevalence_min = get<double>(bnn, "prevalence_min");
  c.prior.bnn.prevalence_max = get<double>(bnn, "prevalence_max");
  c.prior.bnn.temperature_min = get<double>(bnn, "temperature_min");
  c.prior.bnn.temperature_max = get<double>(bnn, "temperature_max");
  c.prior.bnn.baseline_count = get<std::size_t>(bnn, "baseline_count");
  const json& dw = p.at("discrete");
  c.prior.discrete.d = get<std::size_t>(dw, "d");
  c.prior.discrete.baseline_columns = get<std::size_t>(dw, "baseline_columns");
  c.prior.discrete.support_min = get<std::size_t>(dw, "support_min");
  c.prior.discrete.support_max = get<std::size_t>(dw, "support_max");
  c.prior.discrete.y_support = get<std::size_t>(dw, "y_support");
  c.prior.discrete.wiring = wiring_from_string(get<std::string>(dw, "wiring"));
  c.prior.discrete.dirichlet_alpha = get<double>(dw, "dirichlet_alpha");
  c.prior.discrete.propensity_min = get<double>(dw, "propensity_min");
  c.prior.discrete.propensity_max = get<double>(dw, "propensity_max");
  c.prior.copy_d = get<std::size_t>(p.at("copy"), "d");
  if (c.prior.n < 2) throw std::invalid_argument("config: prior.n must be >= 2");

  const json& m = j.at("missingness");
  c.missing.mechanism = mechanism_from_string(get<std::string>(m, "mechanism"));
  c.missing.max_missing_prob = get<double>(m, "max_missing_prob");
  c.missing.mcar_rate = get<double>(m, "mcar_rate");
  c.missing.mar_hidden = get<std::size_t>(m, "mar_hidden");
  c.missing.validate();

  const json& mo = j.at("model");
  c.model.d = c.prior.d();
  c.model.c = c.prior.c();
  c.model.kind = c.prior.task_kind();
  c.model.model_dim = get<std::size_t>(mo, "model_dim");
  c.model.hidden = get<std::size_t>(mo, "hidden");
  c.model.layers = get<std::size_t>(mo, "layers");
  c.model.heads = get<std::size_t>(mo, "heads");
  c.model.embedding_depth = get<std::size_t>(mo, "embedding_depth");
  c.model.validate();

  const json& t = j.at("train");
  c.train.predictor_steps = get<std::size_t>(t, "predictor_steps");
  c.train.policy_steps = get<std::size_t>(t, "policy_steps");
  c.train.batch_tasks = get<std::size_t>(t, "batch_tasks");
  c.train.lr_predictor = get<double>(t, "lr_predictor");
  c.train.lr_policy = get<double>(t, "lr_policy");
  c.train.lr_joint_finetune = get<double>(t, "lr_joint_finetune");
  c.train.warmup = get<std::size_t>(t, "warmup");
  c.train.predictor_decay = get<bool>(t, "predictor_decay");
  c.train.gumbel_temperature = get<double>(t, "gumbel_temperature");
  c.train.gumbel_temperature_final = get<double>(t, "gumbel_temperature_final");
  c.train.checkpoint_every = get<std::size_t>(t, "checkpoint_every");
  c.train.validation_tasks = get<std::size_t>(t, "validation_tasks");
  c.train.sequence.min_context = get<std::size_t>(t, "min_context");
  c.train.sequence.max_queries = get<std::size_t>(t, "max_queries");
  c.train.seed = c.seed;
  c.train.out_dir = c.out_dir;
  c.train.validate();

  const json& e = j.at("eval");
  c.eval.tasks = get<std::size_t>(e, "tasks");
  c.eval.context = get<std::size_t>(e, "context");
  c.eval.max_queries = get<std::size_t>(e, "max_queries");
  c.eval.budget = get<std::size_t>(e, "budget");
  c.eval.oracle_samples = get<std::size_t>(e, "oracle_samples");
  c.eval.threads = std::max<std::size_t>(1, get<std::size_t>(e, "threads"));
  c.eval.queries_missing = get<bool>(e, "queries_missing");
  for (const auto& mj : e.at("methods")) {
    MethodSpec ms;
    ms.policy = policy_kind_from_string(get<std::string>(mj, "policy"));
    ms.predictor = mj.contains("predictor") ? predictor_kind_from_string(get<std::string>(mj, "predictor"))
                   : ms.policy == PolicyKind::kMlpGreedy ? PredictorKind::kMlp
                                                          : PredictorKind::kModel;
    ms.name = mj.contains("name") ? get<std::string>(mj, "name") : to_string(ms.policy);
    c.eval.methods.push_back(ms);
  }
  const json& mlp = e.at("mlp");
  c.eval.mlp.hidden = get<std::size_t>(mlp, "hidden");
  c.eval.mlp.batch = get<std::size_t>(mlp, "batch");
  c.eval.mlp.epochs = get<std::size_t>(mlp, "epochs");
  c.eval.mlp.selector_epochs = get<std::size_t>(mlp, "selector_epochs");
  c.eval.mlp.lr = get<double>(mlp, "lr");
  c.eval.mlp.selector_tau = get<double>(mlp, "selector_tau");
  c.eval.mlp.validate();
  const std::size_t acquirable = c.prior.d() - (c.prior.kind == PriorKind::kGp       ? c.prior.gp.baseline_count
                                                : c.prior.kind == PriorKind::kBnn    ? c.prior.bnn.baseline_count
                                                : c.prior.kind == PriorKind::kDiscrete ? c.prior.discrete.baseline_columns
                                                                                       : 0);
  if (c.eval.budget > acquirable)
    throw std::invalid_argument("config: eval.budget " + std::to_string(c.eval.budget) + " exceeds the " +
                                std::to_string(acquirable) + " acquirable features");

  const json& s = j.at("sweep");
  c.sweep.context = s.at("context").get<std::vector<std::size_t>>();
  c.sweep.missing_rate = s.at("missing_rate").get<std::vector<double>>();
  c.sweep.baseline = get<std::string>(s, "baseline");
  c.train_pool = get<std::size_t>(j.at("gen"), "train_tasks");
  return c;
}

GeneratedTask sample_task(const ExperimentConfig& cfg, Rng& rng, std::optional<std::size_t> context_rows) {
  const PriorSpec& p = cfg.prior;
  GeneratedTask t;
  switch (p.kind) {
    case PriorKind::kGp:
      t.data = sample_gp_task(p.gp, p.n, rng);
      break;
    case PriorKind::kBnn: {
      const std::size_t pool_n = std::max(p.bnn_pool, p.n);
      Tensor pool(Shape{pool_n, p.bnn_d});
      for (auto& v : pool.values()) v = normal(rng);
      BNNPriorConfig b = p.bnn;
      b.feats_max = std::min(b.feats_max, p.bnn_d);
      t.data = sample_bnn_task(b, pool, p.n, rng);
      break;
    }
    case PriorKind::kDiscrete:
      t.world = sample_discrete_world(p.discrete, rng);
      t.data = sample_world_dataset(*t.world, p.n, rng);
      return t;  // missingness comes from the world's propensity tables
    case PriorKind::kCopy:
      t.world = sample_copy_world(p.copy_d, rng);
      t.data = sample_world_dataset(*t.world, p.n, rng);
      return t;
  }
  if (cfg.missing.mechanism != Mechanism::kNone) {
    std::vector<std::size_t> rows;
    if (context_rows) {
      rows.resize(std::min(*context_rows, t.data.n()));
      std::iota(rows.begin(), rows.end(), 0);
      if (rows.empty()) return t;
    }
    t.data = apply_missingness(t.data, cfg.missing, rng, rows);
  }
  return t;
}

TaskSampler make_training_sampler(const ExperimentConfig& cfg) {
  return [cfg](Rng& rng) { return normalize_per_sequence(sample_task(cfg, rng).data); };
}

}  // namespace afa::cli
