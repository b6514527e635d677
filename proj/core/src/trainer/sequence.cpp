#include "afa/trainer/sequence.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "afa/diffkernel/ops.hpp"

namespace afa {

TrainingSequence make_training_sequence(const Dataset& ds, const SequenceOptions& opt, Rng& rng) {
  const std::size_t n = ds.n(), d = ds.d(), c = ds.c();
  if (n < 2) throw std::invalid_argument("training sequence: task needs N >= 2");
  const std::size_t lo = std::clamp<std::size_t>(opt.min_context, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  TrainingSequence seq;
  seq.m = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(lo), static_cast<std::int64_t>(n - 1)));
  seq.targets = n - seq.m;
  const Dataset shuffled = subset_rows(ds, order);
  seq.prefix = encode_labeled(shuffled.x, shuffled.r, shuffled.y);

  std::vector<std::size_t> kept;
  std::vector<std::vector<double>> acquired;
  for (std::size_t t = 0; t < seq.targets; ++t) {
    const std::size_t row = seq.m + t;
    std::vector<std::size_t> avail;
    std::vector<double> a(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      if (ds.baseline[j])
        a[j] = 1.0;
      else if (shuffled.r.at(row, j) == 1.0)
        avail.push_back(j);
    }
    if (opt.require_candidate && avail.empty()) continue;
    const std::size_t hi = opt.require_candidate ? avail.size() - 1 : avail.size();
    const auto k = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(hi)));
    std::shuffle(avail.begin(), avail.end(), rng);
    for (std::size_t i = 0; i < k; ++i) a[avail[i]] = 1.0;
    kept.push_back(t);
    acquired.push_back(std::move(a));
  }
  if (opt.max_queries > 0 && kept.size() > opt.max_queries) {
    std::vector<std::size_t> pick(kept.size());
    std::iota(pick.begin(), pick.end(), 0);
    std::shuffle(pick.begin(), pick.end(), rng);
    pick.resize(opt.max_queries);
    std::sort(pick.begin(), pick.end());
    std::vector<std::size_t> k2;
    std::vector<std::vector<double>> a2;
    for (auto i : pick) k2.push_back(kept[i]), a2.push_back(std::move(acquired[i]));
    kept = std::move(k2);
    acquired = std::move(a2);
  }

  const std::size_t q = kept.size();
  seq.pair = kept;
  seq.query_values = Tensor(Shape{q, d});
  seq.query_acquired = Tensor(Shape{q, d});
  seq.candidates = Tensor(Shape{q, d});
  seq.y = Tensor(Shape{q, c});
  for (std::size_t k = 0; k < q; ++k) {
    const std::size_t row = seq.m + kept[k];
    for (std::size_t j = 0; j < d; ++j) {
      const bool avail = shuffled.r.at(row, j) == 1.0;
      seq.query_values.at(k, j) = avail ? shuffled.x.at(row, j) : 0.0;
      seq.query_acquired.at(k, j) = acquired[k][j];
      seq.candidates.at(k, j) = avail && acquired[k][j] == 0.0 ? 1.0 : 0.0;
    }
    std::copy_n(shuffled.y.row(row).begin(), c, seq.y.row(k).begin());
    if (ds.kind == TaskKind::kClassification) seq.labels.push_back(shuffled.label(row));
  }
  seq.mask = build_mask(seq.m, seq.targets, seq.pair);
  return seq;
}

Var predictive_loss(const ModelConfig& cfg, Var head_out, const TrainingSequence& seq) {
  Graph& g = *head_out.graph;
  if (cfg.kind == TaskKind::kRegression)
    return ops::gaussian_nll(ops::slice_cols(head_out, 0, 1), ops::slice_cols(head_out, 1, 1), g.constant(seq.y));
  return ops::cross_entropy(head_out, seq.labels);
}

namespace {

Var sequence_reps(ParamBinding& p, const ModelConfig& cfg, const TrainingSequence& seq, Var acquired) {
  Graph& g = p.graph();
  Var queries = encode_queries(g, seq.query_values, acquired, cfg.c);
  std::vector<Var> parts{g.constant(seq.prefix), queries};
  Var reps = forward_backbone(p, cfg, ops::concat_rows(parts), seq.mask);
  std::vector<std::size_t> rows(seq.queries());
  std::iota(rows.begin(), rows.end(), seq.m + seq.targets);
  return ops::gather_rows(reps, rows);
}

}  // namespace

Var sequence_loss(ParamBinding& p, const ModelConfig& cfg, const TrainingSequence& seq, Var acquired) {
  return predictive_loss(cfg, predictor_head(p, cfg, sequence_reps(p, cfg, seq, acquired)), seq);
}

Var one_step_loss(ParamBinding& p, const ModelConfig& cfg, const TrainingSequence& seq, Var action) {
  return sequence_loss(p, cfg, seq, ops::add(p.graph().constant(seq.query_acquired), action));
}

Var policy_log_probs(ParamBinding& p, const ModelConfig& cfg, const TrainingSequence& seq) {
  Var reps = sequence_reps(p, cfg, seq, p.graph().constant(seq.query_acquired));
  return ops::masked_log_softmax(policy_head(p, cfg, reps), seq.candidates);
}

PolicyStep policy_objective(ParamBinding& p, const ModelConfig& cfg, const TrainingSequence& seq, double tau,
                            const Tensor& noise) {
  Var lp = policy_log_probs(p, cfg, seq);
  GumbelSelection sel = gumbel_straight_through(lp, seq.candidates, tau, noise);
  for (std::size_t k = 0; k < seq.queries(); ++k)
    if (seq.candidates.at(k, sel.choice[k]) != 1.0) throw std::logic_error("policy selected a blocked feature");
  Var loss = one_step_loss(p, cfg, seq, sel.action);
  return {loss, std::move(sel)};
}

}  // namespace afa
