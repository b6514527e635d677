#include "afa/eval/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "afa/diffkernel/tensor_io.hpp"
#include "afa/oracle/discrete.hpp"
#include "afa/oracle/gp.hpp"
#include "afa/seqmodel/model.hpp"

namespace afa {
namespace {

using json = nlohmann::json;

std::uint64_t id_hash(const std::string& id) { return fnv1a64(id.data(), id.size()); }

std::vector<double> softmax_row(std::span<const double> row) {
  const double mx = *std::max_element(row.begin(), row.end());
  std::vector<double> p;
  double z = 0.0;
  for (double v : row) z += std::exp(v - mx);
  for (double v : row) p.push_back(std::exp(v - mx) / z);
  return p;
}

std::vector<std::uint8_t> row_flags(const Tensor& t, std::size_t q) {
  std::vector<std::uint8_t> out;
  for (double v : t.row(q)) out.push_back(v == 1.0);
  return out;
}

class ModelPredictor final : public Predictor {
 public:
  ModelPredictor(const ModelConfig& cfg, const ParamStore& params, const PreparedTask& prep)
      : cfg_(cfg), params_(params), prep_(prep) {
    if (cfg.d != prep.norm.d() || cfg.c != prep.norm.c() || cfg.kind != prep.norm.kind)
      throw std::invalid_argument("model predictor: checkpoint (d=" + std::to_string(cfg.d) + ", c=" +
                                  std::to_string(cfg.c) + ") does not match the task");
  }
  std::vector<Prediction> predict(const AcquisitionState& s) override {
    const Tensor out =
        forward_predictor(cfg_, params_, make_inference_input(prep_.ctx_x, prep_.ctx_r, prep_.ctx_y, s, cfg_.c));
    std::vector<Prediction> preds;
    for (std::size_t q = 0; q < s.queries(); ++q) {
      const auto row = out.row(q);
      preds.push_back(cfg_.kind == TaskKind::kRegression ? Prediction{row[0], std::exp(row[1])} : softmax_row(row));
    }
    return preds;
  }

 private:
  const ModelConfig& cfg_;
  const ParamStore& params_;
  const PreparedTask& prep_;
};

class LearnedPolicy final : public Policy {
 public:
  LearnedPolicy(const ModelConfig& cfg, const ParamStore& params, const PreparedTask& prep)
      : cfg_(cfg), params_(params), prep_(prep) {}
  std::vector<std::size_t> select(const AcquisitionState& s, std::size_t) override {
    Tensor cand = s.candidate_mask();
    std::vector<std::uint8_t> live(s.queries(), 0);
    for (std::size_t q = 0; q < s.queries(); ++q) {
      for (double v : cand.row(q)) live[q] = live[q] || v == 1.0;
      // Queries never attend to each other, so a placeholder mask on an
      // exhausted row cannot affect the others; its output is discarded.
      if (!live[q]) std::fill(cand.row(q).begin(), cand.row(q).end(), 1.0);
    }
    const Tensor probs =
        forward_policy(cfg_, params_, make_inference_input(prep_.ctx_x, prep_.ctx_r, prep_.ctx_y, s, cfg_.c), cand);
    std::vector<std::size_t> out(s.queries(), kNoTarget);
    for (std::size_t q = 0; q < s.queries(); ++q) {
      if (!live[q]) continue;
      for (std::size_t j = 0; j < s.d(); ++j)
        if (s.is_candidate(q, j) && (out[q] == kNoTarget || probs.at(q, j) > probs.at(q, out[q]))) out[q] = j;
    }
    return out;
  }

 private:
  const ModelConfig& cfg_;
  const ParamStore& params_;
  const PreparedTask& prep_;
};

class RandomPolicy final : public Policy {
 public:
  RandomPolicy(std::uint64_t seed, std::uint64_t task) : seed_(seed), task_(task) {}
  std::vector<std::size_t> select(const AcquisitionState& s, std::size_t step) override {
    std::vector<std::size_t> out(s.queries(), kNoTarget);
    for (std::size_t q = 0; q < s.queries(); ++q) {
      const auto c = s.candidates(q);
      if (c.empty()) continue;
      Rng rng = derive_rng(seed_, {task_, q, step});
      out[q] = c[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(c.size()) - 1))];
    }
    return out;
  }

 private:
  std::uint64_t seed_, task_;
};

// Discrete worlds: exact Bayes predictor and complete-case CMI greedy, on raw
// (integer) feature values.
class DiscreteOracle final : public Predictor, public Policy {
 public:
  DiscreteOracle(const DiscreteWorld& w, const EvalTask& task, const PreparedTask& prep) : w_(w) {
    for (auto i : prep.query_rows) {
      std::vector<int> row;
      for (std::size_t j = 0; j < task.data.d(); ++j) row.push_back(static_cast<int>(std::lround(task.data.x.at(i, j))));
      raw_.push_back(std::move(row));
    }
  }
  std::vector<Prediction> predict(const AcquisitionState& s) override {
    std::vector<Prediction> out;
    for (std::size_t q = 0; q < s.queries(); ++q) out.push_back(bayes_predictive(w_, assignment(s, q)));
    return out;
  }
  std::vector<std::size_t> select(const AcquisitionState& s, std::size_t) override {
    std::vector<std::size_t> out(s.queries(), kNoTarget);
    for (std::size_t q = 0; q < s.queries(); ++q)
      if (!s.candidates(q).empty()) out[q] = oracle_greedy(w_, assignment(s, q), row_flags(s.r(), q));
    return out;
  }

 private:
  Assignment assignment(const AcquisitionState& s, std::size_t q) const {
    Assignment a(s.d(), -1);
    for (std::size_t j = 0; j < s.d(); ++j)
      if (s.acquired(q, j)) a[j] = raw_[q][j];
    return a;
  }
  const DiscreteWorld& w_;
  std::vector<std::vector<int>> raw_;
};

class GpOracleAdapter final : public Predictor, public Policy {
 public:
  GpOracleAdapter(const PreparedTask& prep, std::size_t samples, std::uint64_t seed)
      : oracle_(*prep.norm.kernel, prep.ctx_x, prep.ctx_y.values(), samples, seed) {}
  std::vector<Prediction> predict(const AcquisitionState& s) override {
    std::vector<Prediction> out;
    for (std::size_t q = 0; q < s.queries(); ++q) {
      const auto g = oracle_.predict(q, s.x().row(q), row_flags(s.a(), q));
      out.push_back({g.mean, g.var});
    }
    return out;
  }
  std::vector<std::size_t> select(const AcquisitionState& s, std::size_t) override {
    std::vector<std::size_t> out(s.queries(), kNoTarget);
    const Tensor cand = s.candidate_mask();
    for (std::size_t q = 0; q < s.queries(); ++q)
      if (!s.candidates(q).empty()) out[q] = oracle_.greedy(q, s.x().row(q), row_flags(s.a(), q), row_flags(cand, q));
    return out;
  }

 private:
  GpOracle oracle_;
};

class MlpAdapter final : public Predictor, public Policy {
 public:
  explicit MlpAdapter(const MlpBaseline& m) : m_(m) {}
  std::vector<Prediction> predict(const AcquisitionState& s) override { return m_.predict(s); }
  std::vector<std::size_t> select(const AcquisitionState& s, std::size_t) override { return m_.select(s); }

 private:
  const MlpBaseline& m_;
};

const char* const kPolicyNames[] = {"learned", "random", "oracle_greedy", "mlp_greedy"};
const char* const kPredictorNames[] = {"model", "oracle", "mlp"};

}  // namespace

Dataset PreparedTask::context_dataset() const { return subset_rows(norm, context_rows); }

AcquisitionState PreparedTask::initial_state() const { return AcquisitionState::from_rows(norm, query_rows); }

PreparedTask prepare_task(const EvalTask& task, std::size_t max_queries) {
  task.data.validate();
  const std::size_t n = task.data.n();
  if (task.context >= n) throw std::invalid_argument("task " + task.id + ": context must leave at least one query");
  PreparedTask p;
  p.norm = normalize_per_sequence(task.data);
  const std::size_t end = max_queries == 0 ? n : std::min(n, task.context + max_queries);
  for (std::size_t i = 0; i < task.context; ++i) p.context_rows.push_back(i);
  for (std::size_t i = task.context; i < end; ++i) p.query_rows.push_back(i);
  const Dataset ctx = p.context_dataset();
  p.ctx_x = ctx.x;
  p.ctx_r = ctx.r;
  p.ctx_y = ctx.y;
  return p;
}

std::string to_string(PolicyKind k) { return kPolicyNames[static_cast<int>(k)]; }
std::string to_string(PredictorKind k) { return kPredictorNames[static_cast<int>(k)]; }

PolicyKind policy_kind_from_string(const std::string& s) {
  for (int i = 0; i < 4; ++i)
    if (s == kPolicyNames[i]) return static_cast<PolicyKind>(i);
  throw std::invalid_argument("unknown policy kind '" + s + "' (learned, random, oracle_greedy, mlp_greedy)");
}

PredictorKind predictor_kind_from_string(const std::string& s) {
  for (int i = 0; i < 3; ++i)
    if (s == kPredictorNames[i]) return static_cast<PredictorKind>(i);
  throw std::invalid_argument("unknown predictor kind '" + s + "' (model, oracle, mlp)");
}

TaskContext::TaskContext(const EvalTask& task, const PreparedTask& prep, const EvalResources& res)
    : task_(&task), prep_(&prep), res_(res) {}

const MlpBaseline& TaskContext::mlp() {
  if (!mlp_) mlp_ = std::make_shared<MlpBaseline>(MlpBaseline::fit(prep_->context_dataset(), res_.mlp,
                                                                   derive_rng(res_.seed, {id_hash(task_->id)})()));
  return *mlp_;
}

std::unique_ptr<Predictor> TaskContext::predictor(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::kModel:
      if (!res_.model || !res_.params) throw std::invalid_argument("model predictor needs a checkpoint");
      return std::make_unique<ModelPredictor>(*res_.model, *res_.params, *prep_);
    case PredictorKind::kOracle:
      if (task_->world) return std::make_unique<DiscreteOracle>(*task_->world, *task_, *prep_);
      if (prep_->norm.kernel && prep_->norm.kind == TaskKind::kRegression)
        return std::make_unique<GpOracleAdapter>(*prep_, res_.oracle_samples, derive_rng(res_.seed, {id_hash(task_->id)})());
      throw std::invalid_argument("oracle predictor needs a discrete world or a GP task");
    case PredictorKind::kMlp:
      return std::make_unique<MlpAdapter>(mlp());
  }
  throw std::logic_error("unreachable predictor kind");
}

std::unique_ptr<Policy> TaskContext::policy(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kLearned:
      if (!res_.model || !res_.params) throw std::invalid_argument("learned policy needs a checkpoint");
      return std::make_unique<LearnedPolicy>(*res_.model, *res_.params, *prep_);
    case PolicyKind::kRandom:
      return std::make_unique<RandomPolicy>(res_.seed, id_hash(task_->id));
    case PolicyKind::kOracleGreedy:
      if (task_->world) return std::make_unique<DiscreteOracle>(*task_->world, *task_, *prep_);
      if (prep_->norm.kernel && prep_->norm.kind == TaskKind::kRegression)
        return std::make_unique<GpOracleAdapter>(*prep_, res_.oracle_samples, derive_rng(res_.seed, {id_hash(task_->id)})());
      throw std::invalid_argument("oracle_greedy is only defined on discrete-world or GP tasks");
    case PolicyKind::kMlpGreedy:
      return std::make_unique<MlpAdapter>(mlp());
  }
  throw std::logic_error("unreachable policy kind");
}

std::vector<StepRecord> run_acquisition(const EvalTask& task, const PreparedTask& prep, Predictor& predictor,
                                        Policy& policy, std::size_t k) {
  const std::size_t acquirable = task.data.d() - task.data.baseline_count();
  if (k > acquirable)
    throw std::invalid_argument("budget k=" + std::to_string(k) + " exceeds the " + std::to_string(acquirable) +
                                " acquirable features");
  if (prep.query_rows.empty()) throw std::invalid_argument("task " + task.id + " has no query rows");
  AcquisitionState state = prep.initial_state();
  const std::size_t nq = state.queries();
  std::vector<std::optional<std::size_t>> last_action(nq);
  std::vector<std::uint8_t> exhausted(nq, 0);
  std::vector<StepRecord> out;
  for (std::size_t t = 0;; ++t) {
    const auto preds = predictor.predict(state);
    for (std::size_t q = 0; q < nq; ++q) {
      const std::size_t row = prep.query_rows[q];
      StepRecord r;
      r.task_id = task.id;
      r.query = q;
      r.step = t;
      r.action = last_action[q];
      if (r.action) r.revealed = task.data.x.at(row, *r.action);
      r.prediction = preds[q];
      const auto y = task.data.y.row(row);
      r.y.assign(y.begin(), y.end());
      if (task.data.true_probs) {
        const auto p = task.data.true_probs->row(row);
        r.true_probs = std::vector<double>(p.begin(), p.end());
      }
      r.exhausted = exhausted[q];
      r.kind = task.data.kind;
      out.push_back(std::move(r));
    }
    if (t == k) break;
    const auto actions = policy.select(state, t);
    for (std::size_t q = 0; q < nq; ++q) {
      last_action[q].reset();
      if (actions[q] == kNoTarget) {
        exhausted[q] = 1;
        continue;
      }
      state.acquire(q, actions[q]);  // throws on a blocked feature
      last_action[q] = actions[q];
    }
  }
  return out;
}

std::string record_to_json(const StepRecord& r) {
  json j;
  j["task_id"] = r.task_id;
  j["query"] = r.query;
  j["step"] = r.step;
  j["action"] = r.action ? json(*r.action) : json(nullptr);
  j["revealed"] = r.revealed ? json(*r.revealed) : json(nullptr);
  j["prediction"] = r.prediction;
  j["y"] = r.y;
  if (r.true_probs) j["true_probs"] = *r.true_probs;
  j["exhausted"] = r.exhausted;
  j["kind"] = to_string(r.kind);
  return j.dump();
}

StepRecord record_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    StepRecord r;
    r.task_id = j.at("task_id").get<std::string>();
    r.query = j.at("query").get<std::size_t>();
    r.step = j.at("step").get<std::size_t>();
    if (!j.at("action").is_null()) r.action = j.at("action").get<std::size_t>();
    if (!j.at("revealed").is_null()) r.revealed = j.at("revealed").get<double>();
    r.prediction = j.at("prediction").get<std::vector<double>>();
    r.y = j.at("y").get<std::vector<double>>();
    if (j.contains("true_probs")) r.true_probs = j.at("true_probs").get<std::vector<double>>();
    r.exhausted = j.at("exhausted").get<bool>();
    r.kind = task_kind_from_string(j.at("kind").get<std::string>());
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("trajectory record: ") + e.what());
  }
}

std::string records_to_jsonl(const std::vector<StepRecord>& records) {
  std::string out;
  for (const auto& r : records) out += record_to_json(r) + "\n";
  return out;
}

std::vector<StepRecord> records_from_jsonl(const std::string& text) {
  std::vector<StepRecord> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(record_from_json(line));
  return out;
}

}  // namespace afa
