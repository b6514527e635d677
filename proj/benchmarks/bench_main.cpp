#include <benchmark/benchmark.h>

#include "afa/diffkernel/ops.hpp"
#include "afa/oracle/discrete.hpp"
#include "afa/oracle/gp.hpp"
#include "afa/seqmodel/model.hpp"
#include "afa/trainer/sequence.hpp"

namespace afa {
namespace {

Tensor random_tensor(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  for (auto& v : t.values()) v = normal(rng);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = random_tensor({n, n}, rng), b = random_tensor({n, n}, rng);
  for (auto _ : state) {
    Graph g;
    benchmark::DoNotOptimize(ops::matmul(g.constant(a), g.constant(b)).value().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

ModelConfig bench_model(std::size_t dim) {
  ModelConfig cfg;
  cfg.d = 6;
  cfg.model_dim = dim;
  cfg.hidden = 2 * dim;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.embedding_depth = 2;
  return cfg;
}

// Inference forward pass: m context rows and 64 queries.
void BM_ForwardPredictor(benchmark::State& state) {
  const auto cfg = bench_model(64);
  const auto m = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const ParamStore params = init_model_params(cfg, rng);
  const Tensor cx = random_tensor({m, cfg.d}, rng), cy = random_tensor({m, 1}, rng), cr(Shape{m, cfg.d}, 1.0);
  const AcquisitionState s(random_tensor({64, cfg.d}, rng), Tensor(Shape{64, cfg.d}, 1.0), std::vector<std::uint8_t>(cfg.d, 0));
  const auto in = make_inference_input(cx, cr, cy, s, 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward_predictor(cfg, params, in).data());
}
BENCHMARK(BM_ForwardPredictor)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

// One predictor training step's forward and backward pass on a 128-row task.
void BM_TrainStep(benchmark::State& state) {
  const auto cfg = bench_model(64);
  Rng rng(3);
  const ParamStore params = init_model_params(cfg, rng);
  Dataset ds;
  ds.x = random_tensor({128, cfg.d}, rng);
  ds.r = Tensor(Shape{128, cfg.d}, 1.0);
  ds.y = random_tensor({128, 1}, rng);
  ds.baseline.assign(cfg.d, 0);
  const auto seq = make_training_sequence(ds, SequenceOptions{}, rng);
  for (auto _ : state) {
    Graph g;
    ParamBinding p(g, params);
    Var loss = sequence_loss(p, cfg, seq, g.constant(seq.query_acquired));
    g.backward(loss);
    benchmark::DoNotOptimize(loss.value().item());
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_ExactCmi(benchmark::State& state) {
  Rng rng(4);
  DiscreteWorldSpec spec;
  spec.d = static_cast<std::size_t>(state.range(0));
  spec.support_min = spec.support_max = 3;
  const auto w = sample_discrete_world(spec, rng);
  const auto states = enumerate_states(w);
  for (auto _ : state)
    for (const auto& s : states)
      for (std::size_t j = 0; j < w.columns(); ++j)
        if (!w.baseline[j] && s[j] < 0) benchmark::DoNotOptimize(exact_cmi(w, s, j, true));
}
BENCHMARK(BM_ExactCmi)->Arg(2)->Arg(3)->Unit(benchmark::kMicrosecond);

void BM_GpPosterior(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  GpKernel k;
  k.lengthscales.assign(6, 1.0);
  const Tensor x = random_tensor({n, 6}, rng), q = random_tensor({64, 6}, rng);
  std::vector<double> y(n);
  for (auto& v : y) v = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(gp_posterior(k, x, y, q).var.data());
}
BENCHMARK(BM_GpPosterior)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace afa

BENCHMARK_MAIN();
