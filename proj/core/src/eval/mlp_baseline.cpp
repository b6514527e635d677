#include "afa/eval/mlp_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "afa/diffkernel/ops.hpp"
#include "afa/diffkernel/optim.hpp"
#include "afa/rng.hpp"
#include "afa/trainer/gumbel.hpp"

namespace afa {
namespace {

constexpr const char* kMlpPredictor = "mlp_predictor";
constexpr const char* kMlpSelector = "mlp_selector";

void add_layer(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out, Rng& rng, const char* group) {
  Tensor w(Shape{in, out});
  for (auto& v : w.values()) v = normal(rng, 0.0, 1.0 / std::sqrt(static_cast<double>(in)));
  ps.add(name + ".w", std::move(w), group);
  ps.add(name + ".b", Tensor(Shape{out}), group);
}

Var layer(ParamBinding& p, const std::string& name, Var x) {
  return ops::add_bias(ops::matmul(x, p[name + ".w"]), p[name + ".b"]);
}

Var mlp(ParamBinding& p, const std::string& prefix, Var x) {
  Var h = ops::gelu(layer(p, prefix + ".0", x));
  h = ops::gelu(layer(p, prefix + ".1", h));
  return layer(p, prefix + ".2", h);
}

// [x * a, a] from values already zero where unobserved.
Var mlp_input(Graph& g, const Tensor& x_avail, Var a) {
  Var xa = ops::mul(g.constant(x_avail), a);
  const Var parts[] = {xa, a};
  return ops::concat_cols(parts);
}

struct Batch {
  Tensor x_avail, a, candidates, y;
  std::vector<std::size_t> labels;
  std::size_t rows = 0;
};

// Random acquired subsets over observed features, as in the sequence model's
// training. With need_candidate, rows without an acquirable feature are
// dropped and one candidate is always left.
Batch make_batch(const Dataset& ds, std::span<const std::size_t> rows, bool need_candidate, Rng& rng) {
  const std::size_t d = ds.d();
  Batch b;
  std::vector<std::size_t> keep;
  std::vector<std::vector<double>> a_rows;
  for (auto i : rows) {
    std::vector<std::size_t> avail;
    std::vector<double> a(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      if (ds.baseline[j]) a[j] = 1.0;
      else if (ds.r.at(i, j) == 1.0) avail.push_back(j);
    }
    if (need_candidate && avail.empty()) continue;
    const auto hi = static_cast<std::int64_t>(avail.size()) - (need_candidate ? 1 : 0);
    const auto size = static_cast<std::size_t>(uniform_int(rng, 0, hi));
    std::shuffle(avail.begin(), avail.end(), rng);
    for (std::size_t k = 0; k < size; ++k) a[avail[k]] = 1.0;
    keep.push_back(i);
    a_rows.push_back(std::move(a));
  }
  b.rows = keep.size();
  b.x_avail = Tensor(Shape{b.rows, d});
  b.a = Tensor(Shape{b.rows, d});
  b.candidates = Tensor(Shape{b.rows, d});
  b.y = Tensor(Shape{b.rows, ds.c()});
  for (std::size_t k = 0; k < b.rows; ++k) {
    const std::size_t i = keep[k];
    for (std::size_t j = 0; j < d; ++j) {
      const bool obs = ds.r.at(i, j) == 1.0;
      b.x_avail.at(k, j) = obs ? ds.x.at(i, j) : 0.0;
      b.a.at(k, j) = a_rows[k][j];
      b.candidates.at(k, j) = obs && a_rows[k][j] == 0.0 ? 1.0 : 0.0;
    }
    for (std::size_t c = 0; c < ds.c(); ++c) b.y.at(k, c) = ds.y.at(i, c);
    if (ds.kind == TaskKind::kClassification) b.labels.push_back(ds.label(i));
  }
  return b;
}

Var loss_of(Graph& g, TaskKind kind, Var out, const Batch& b) {
  if (kind == TaskKind::kClassification) return ops::cross_entropy(out, b.labels);
  return ops::gaussian_nll(ops::slice_cols(out, 0, 1), ops::slice_cols(out, 1, 1), g.constant(b.y));
}

Tensor state_input_values(const AcquisitionState& s) {
  // x * a only ever reads acquired entries.
  Tensor v(Shape{s.queries(), s.d()});
  for (std::size_t q = 0; q < s.queries(); ++q)
    for (std::size_t j = 0; j < s.d(); ++j) v.at(q, j) = s.acquired(q, j) ? s.x().at(q, j) : 0.0;
  return v;
}

}  // namespace

void MlpConfig::validate() const {
  if (hidden == 0 || batch == 0) throw std::invalid_argument("mlp config: hidden and batch must be positive");
  if (!(lr > 0.0) || !(selector_tau > 0.0)) throw std::invalid_argument("mlp config: lr and tau must be positive");
}

MlpBaseline MlpBaseline::fit(const Dataset& train, const MlpConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  train.validate();
  MlpBaseline m;
  m.kind_ = train.kind;
  m.d_ = train.d();
  m.out_ = train.kind == TaskKind::kClassification ? train.c() : 2;
  Rng init = derive_rng(seed, {1});
  const std::size_t in = 2 * m.d_;
  add_layer(m.params_, "mlp.0", in, cfg.hidden, init, kMlpPredictor);
  add_layer(m.params_, "mlp.1", cfg.hidden, cfg.hidden, init, kMlpPredictor);
  add_layer(m.params_, "mlp.2", cfg.hidden, m.out_, init, kMlpPredictor);
  add_layer(m.params_, "sel.0", in, cfg.hidden, init, kMlpSelector);
  add_layer(m.params_, "sel.1", cfg.hidden, cfg.hidden, init, kMlpSelector);
  add_layer(m.params_, "sel.2", cfg.hidden, m.d_, init, kMlpSelector);

  std::vector<std::size_t> order(train.n());
  std::iota(order.begin(), order.end(), 0);

  // Predictor on random subsets.
  OptimizerState opt = OptimizerState::for_params(m.params_, LrSchedule{cfg.lr, 0, 0});
  opt.schedules.erase("default");
  opt.schedules[kMlpPredictor] = LrSchedule{cfg.lr, 0, 0};
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = derive_rng(seed, {2, epoch});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const auto rows = std::span<const std::size_t>(order).subspan(start, std::min(cfg.batch, order.size() - start));
      const Batch b = make_batch(train, rows, false, rng);
      Graph g;
      ParamBinding p(g, m.params_, std::vector<std::string>{kMlpPredictor});
      Var a = g.constant(b.a);
      Var loss = loss_of(g, m.kind_, mlp(p, "mlp", mlp_input(g, b.x_avail, a)), b);
      g.backward(loss);
      GradStore grads = GradStore::zeros_like(m.params_);
      p.accumulate(grads);
      adam_step(m.params_, grads, opt);
    }
  }

  // Selector against the frozen predictor.
  opt = OptimizerState::for_params(m.params_, LrSchedule{cfg.lr, 0, 0});
  opt.schedules.erase("default");
  opt.schedules[kMlpSelector] = LrSchedule{cfg.lr, 0, 0};
  for (std::size_t epoch = 0; epoch < cfg.selector_epochs; ++epoch) {
    Rng rng = derive_rng(seed, {3, epoch});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const auto rows = std::span<const std::size_t>(order).subspan(start, std::min(cfg.batch, order.size() - start));
      const Batch b = make_batch(train, rows, true, rng);
      if (b.rows == 0) continue;
      Graph g;
      ParamBinding p(g, m.params_, std::vector<std::string>{kMlpSelector});
      Var a = g.constant(b.a);
      Var logits = mlp(p, "sel", mlp_input(g, b.x_avail, a));
      auto sel = gumbel_straight_through(ops::masked_log_softmax(logits, b.candidates), b.candidates,
                                         cfg.selector_tau, sample_gumbel(b.candidates.shape(), rng));
      Var a_next = ops::add(a, sel.action);
      Var loss = loss_of(g, m.kind_, mlp(p, "mlp", mlp_input(g, b.x_avail, a_next)), b);
      g.backward(loss);
      GradStore grads = GradStore::zeros_like(m.params_);
      p.accumulate(grads);
      adam_step(m.params_, grads, opt);
    }
  }
  return m;
}

std::vector<std::vector<double>> MlpBaseline::predict(const AcquisitionState& s) const {
  if (s.d() != d_) throw std::invalid_argument("mlp baseline: feature width mismatch");
  Graph g;
  ParamBinding p(g, params_, std::vector<std::string>{});
  const Tensor out = mlp(p, "mlp", mlp_input(g, state_input_values(s), g.constant(s.a()))).value();
  std::vector<std::vector<double>> preds(s.queries());
  for (std::size_t q = 0; q < s.queries(); ++q) {
    const auto row = out.row(q);
    if (kind_ == TaskKind::kRegression) {
      preds[q] = {row[0], std::exp(row[1])};
      continue;
    }
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    for (double v : row) preds[q].push_back(std::exp(v - mx) / z);
  }
  return preds;
}

std::vector<std::size_t> MlpBaseline::select(const AcquisitionState& s) const {
  if (s.d() != d_) throw std::invalid_argument("mlp baseline: feature width mismatch");
  Graph g;
  ParamBinding p(g, params_, std::vector<std::string>{});
  const Tensor logits = mlp(p, "sel", mlp_input(g, state_input_values(s), g.constant(s.a()))).value();
  std::vector<std::size_t> out(s.queries(), kNoTarget);
  for (std::size_t q = 0; q < s.queries(); ++q)
    for (std::size_t j = 0; j < d_; ++j)
      if (s.is_candidate(q, j) && (out[q] == kNoTarget || logits.at(q, j) > logits.at(q, out[q]))) out[q] = j;
  return out;
}

}  // namespace afa
