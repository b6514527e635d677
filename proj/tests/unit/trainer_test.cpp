#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "afa/diffkernel/ops.hpp"
#include "afa/diffkernel/tensor_io.hpp"
#include "afa/taskgen/gp.hpp"
#include "afa/trainer/checkpoint.hpp"
#include "afa/trainer/trainer.hpp"

namespace afa {
namespace {

ModelConfig tiny_config(std::size_t d = 2) {
  ModelConfig cfg;
  cfg.d = d;
  cfg.model_dim = 16;
  cfg.hidden = 32;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.embedding_depth = 2;
  return cfg;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("afa_trainer_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

TEST(Gumbel, FrequenciesMatchCategorical) {
  const std::size_t n = 100000;
  Rng rng(17);
  Graph g;
  Tensor logits(Shape{n, 3});
  for (std::size_t i = 0; i < n; ++i) logits.at(i, 0) = 1.0;
  const Tensor cand(Shape{n, 3}, 1.0);
  Var lp = ops::masked_log_softmax(g.constant(logits), cand);
  auto sel = gumbel_straight_through(lp, cand, 0.1, sample_gumbel({n, 3}, rng));
  std::vector<double> freq(3, 0.0);
  for (auto c : sel.choice) freq[c] += 1.0 / n;
  const double z = std::exp(1.0) + 2.0;
  EXPECT_NEAR(freq[0], std::exp(1.0) / z, 0.01);
  EXPECT_NEAR(freq[1], 1.0 / z, 0.01);
  EXPECT_NEAR(freq[2], 1.0 / z, 0.01);
}

TEST(Gumbel, ZeroNoiseSelectsArgmaxAndHardIsOneHot) {
  Graph g;
  const Tensor cand = Tensor::matrix({{1, 1, 1}, {1, 0, 1}});
  Var lp = ops::masked_log_softmax(g.constant(Tensor::matrix({{0.1, 2.0, -1.0}, {0.0, 9.0, 0.5}})), cand);
  auto sel = gumbel_straight_through(lp, cand, 0.1, Tensor(Shape{2, 3}));
  EXPECT_EQ(sel.choice, (std::vector<std::size_t>{1, 2}));
  EXPECT_TRUE(bitwise_equal(sel.hard, Tensor::matrix({{0, 1, 0}, {0, 0, 1}})));
  EXPECT_TRUE(bitwise_equal(sel.action.value(), sel.hard));
  EXPECT_EQ(sel.relaxed.value().at(1, 1), 0.0);
}

TEST(Gumbel, BlockedNeverSelected) {
  Rng rng(3);
  const std::size_t n = 20000;
  Tensor cand(Shape{n, 4}, 1.0), logits(Shape{n, 4});
  for (std::size_t i = 0; i < n; ++i) {
    cand.at(i, i % 4) = 0.0;
    logits.at(i, i % 4) = 50.0;  // blocked entries carry the largest raw score
  }
  Graph g;
  auto sel = gumbel_straight_through(ops::masked_log_softmax(g.constant(logits), cand), cand, 0.1,
                                     sample_gumbel({n, 4}, rng));
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NE(sel.choice[i], i % 4);
    EXPECT_EQ(sel.relaxed.value().at(i, i % 4), 0.0);
  }
}

TEST(Gumbel, RelaxationTightensAsTemperatureFalls) {
  const std::vector<double> taus{1.0, 0.5, 0.1, 0.05, 0.01};
  std::vector<double> mean_gap(taus.size(), 0.0);
  const Tensor cand(Shape{1, 4}, 1.0);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const Tensor noise = sample_gumbel({1, 4}, rng);
    for (std::size_t t = 0; t < taus.size(); ++t) {
      Graph g;
      Var lp = ops::masked_log_softmax(g.constant(Tensor::matrix({{0.3, -0.2, 0.8, 0.0}})), cand);
      auto sel = gumbel_straight_through(lp, cand, taus[t], noise);
      double gap = 0;
      for (std::size_t j = 0; j < 4; ++j) gap = std::max(gap, std::abs(sel.relaxed.value()[j] - sel.hard[j]));
      mean_gap[t] += gap / 1000.0;
    }
  }
  for (std::size_t t = 1; t < taus.size(); ++t) EXPECT_LT(mean_gap[t], mean_gap[t - 1]);
}

TEST(Gumbel, StraightThroughGradientReachesSelectedAndRunnerUp) {
  Graph g;
  Var logits = g.leaf(Tensor::matrix({{0.5, 0.2, -0.4}}), true);
  const Tensor cand(Shape{1, 3}, 1.0);
  auto sel = gumbel_straight_through(ops::masked_log_softmax(logits, cand), cand, 0.5,
                                     Tensor::matrix({{0.1, 0.3, -0.2}}));
  Var loss = ops::sum(ops::mul(sel.action, g.constant(Tensor::matrix({{1.0, -2.0, 0.5}}))));
  g.backward(loss);
  const Tensor& grad = logits.grad();
  EXPECT_NE(grad[sel.choice[0]], 0.0);
  std::size_t runner = sel.choice[0] == 0 ? 1 : 0;
  EXPECT_NE(grad[runner], 0.0);
}

Dataset toy_gp_task(std::size_t n, Rng& rng) {
  GPPriorConfig p;
  p.d = 2;
  p.informative_min = p.informative_max = 1;
  auto ds = sample_gp_task(p, n, rng);
  // Make feature 0 the informative one.
  if (ds.kernel->lengthscales[0] == kUninformativeLengthscale) {
    for (std::size_t i = 0; i < n; ++i) std::swap(ds.x.at(i, 0), ds.x.at(i, 1));
    std::swap(ds.kernel->lengthscales[0], ds.kernel->lengthscales[1]);
  }
  return normalize_per_sequence(ds);
}

TEST(SequenceBuild, LayoutAndCandidates) {
  Rng rng(4);
  GPPriorConfig p;
  p.d = 4;
  p.informative_max = 4;
  p.baseline_count = 1;
  auto ds = sample_gp_task(p, 12, rng);
  for (std::size_t i = 0; i < 12; ++i) ds.r.at(i, 3) = i % 2 ? 1.0 : 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    auto seq = make_training_sequence(ds, SequenceOptions{1, true, 0}, rng);
    EXPECT_GE(seq.m, 1u);
    EXPECT_EQ(seq.m + seq.targets, 12u);
    EXPECT_EQ(seq.prefix.rows(), 12u);
    EXPECT_EQ(seq.mask.rows(), 12 + seq.queries());
    for (std::size_t k = 0; k < seq.queries(); ++k) {
      EXPECT_EQ(seq.query_acquired.at(k, 0), 1.0);
      double cands = 0;
      for (std::size_t j = 0; j < 4; ++j) {
        cands += seq.candidates.at(k, j);
        EXPECT_FALSE(seq.candidates.at(k, j) == 1.0 && seq.query_acquired.at(k, j) == 1.0);
        if (seq.query_values.at(k, j) != 0.0) EXPECT_EQ(seq.candidates.at(k, j) + seq.query_acquired.at(k, j), 1.0);
      }
      EXPECT_GE(cands, 1.0);
    }
  }
}

TEST(OneStepLoss, ExactOneHotRelaxationMatchesHardPath) {
  Rng rng(5);
  auto cfg = tiny_config(3);
  auto params = init_model_params(cfg, rng);
  GPPriorConfig p;
  p.d = 3;
  p.informative_max = 3;
  auto ds = sample_gp_task(p, 10, rng);
  auto seq = make_training_sequence(ds, SequenceOptions{1, true, 0}, rng);
  Tensor hard(seq.candidates.shape());
  for (std::size_t k = 0; k < seq.queries(); ++k)
    for (std::size_t j = 0; j < 3; ++j)
      if (seq.candidates.at(k, j) == 1.0) {
        hard.at(k, j) = 1.0;
        break;
      }
  Graph g;
  ParamBinding b(g, params);
  const double l_hard = one_step_loss(b, cfg, seq, g.constant(hard)).value().item();
  Var st = ops::straight_through(g.constant(hard), hard);
  EXPECT_EQ(one_step_loss(b, cfg, seq, st).value().item(), l_hard);
}

TEST(OneStepLoss, SymmetricFeaturesGiveEqualLoss) {
  // Tie the embedding rows of features 1 and 2 (value and mask slots) and give
  // them identical values: both hard choices and the 50/50 relaxation coincide.
  Rng rng(6);
  auto cfg = tiny_config(3);
  auto params = init_model_params(cfg, rng);
  Tensor& w = params.get("embed.0.w");
  for (std::size_t o = 0; o < w.cols(); ++o) {
    w.at(2, o) = w.at(1, o);
    w.at(3 + 2, o) = w.at(3 + 1, o);
  }
  GPPriorConfig p;
  p.d = 3;
  p.informative_max = 3;
  auto ds = sample_gp_task(p, 8, rng);
  for (std::size_t i = 0; i < 8; ++i) ds.x.at(i, 2) = ds.x.at(i, 1);
  auto seq = make_training_sequence(ds, SequenceOptions{1, false, 0}, rng);
  for (std::size_t k = 0; k < seq.queries(); ++k) {
    seq.query_acquired.at(k, 1) = seq.query_acquired.at(k, 2) = 0.0;
    seq.query_values.at(k, 2) = seq.query_values.at(k, 1);
  }
  auto loss_for = [&](double w1, double w2) {
    Tensor a(seq.query_acquired.shape());
    for (std::size_t k = 0; k < seq.queries(); ++k) a.at(k, 1) = w1, a.at(k, 2) = w2;
    Graph g;
    ParamBinding b(g, params);
    return one_step_loss(b, cfg, seq, g.constant(a)).value().item();
  };
  const double l1 = loss_for(1, 0), l2 = loss_for(0, 1), lmix = loss_for(0.5, 0.5);
  EXPECT_NEAR(l1, l2, 1e-12);
  EXPECT_NEAR(lmix, l1, 1e-12);
}

TEST(Checkpoint, RoundTripAndHashMismatch) {
  Rng rng(7);
  auto cfg = tiny_config();
  auto params = init_model_params(cfg, rng);
  const auto dir = temp_dir("ckpt");
  save_checkpoint(dir / "m.afat", params, CheckpointMeta{cfg, 0, "predictor", 42, 1.25});
  auto ck = load_checkpoint(dir / "m.afat", &cfg);
  EXPECT_EQ(ck.meta.step, 42u);
  EXPECT_EQ(ck.meta.val_loss, 1.25);
  ASSERT_EQ(ck.params.size(), params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_EQ(ck.params.entries()[i].name, params.entries()[i].name);
    EXPECT_EQ(ck.params.entries()[i].group, params.entries()[i].group);
    EXPECT_TRUE(bitwise_equal(ck.params.entries()[i].value, params.entries()[i].value));
  }
  auto other = cfg;
  other.model_dim = 32;
  EXPECT_THROW(load_checkpoint(dir / "m.afat", &other), FormatError);

  // Corrupt one byte of the tensor file.
  std::string bytes = read_file(dir / "m.afat");
  bytes[bytes.size() / 2] ^= 0x5a;
  write_file_atomic(dir / "m.afat", bytes);
  EXPECT_THROW(load_checkpoint(dir / "m.afat", &cfg), FormatError);
}

TEST(Training, BestCheckpointHasMinimumValidationLoss) {
  auto cfg = tiny_config();
  TrainConfig tc;
  tc.predictor_steps = 60;
  tc.batch_tasks = 2;
  tc.warmup = 10;
  tc.lr_predictor = 3e-3;
  tc.checkpoint_every = 10;
  tc.validation_tasks = 4;
  tc.seed = 11;
  tc.out_dir = temp_dir("best");
  auto res = pretrain_predictor(cfg, tc, [](Rng& r) { return toy_gp_task(16, r); });
  double best = 1e300;
  std::size_t best_step = 0;
  for (const auto& row : res.log)
    if (row.val_loss && *row.val_loss < best) best = *row.val_loss, best_step = row.step;
  EXPECT_EQ(res.best_step, best_step);
  auto ck = load_checkpoint(*tc.out_dir / "predictor_best.afat", &cfg);
  EXPECT_EQ(ck.meta.val_loss, best);
  EXPECT_EQ(ck.meta.step, best_step);
  EXPECT_TRUE(std::filesystem::exists(*tc.out_dir / "predictor_log.csv"));
}

TEST(Training, RunsAreBitwiseReproducible) {
  auto cfg = tiny_config();
  TrainConfig tc;
  tc.predictor_steps = 5;
  tc.policy_steps = 5;
  tc.batch_tasks = 2;
  tc.checkpoint_every = 5;
  tc.validation_tasks = 2;
  tc.seed = 3;
  auto sampler = [](Rng& r) { return toy_gp_task(12, r); };
  auto a = pretrain_policy(cfg, tc, sampler, pretrain_predictor(cfg, tc, sampler).last);
  auto b = pretrain_policy(cfg, tc, sampler, pretrain_predictor(cfg, tc, sampler).last);
  for (std::size_t i = 0; i < a.last.size(); ++i)
    EXPECT_TRUE(bitwise_equal(a.last.entries()[i].value, b.last.entries()[i].value));
}

TEST(Training, PolicyStageFreezesNothingButMovesPolicyFastest) {
  auto cfg = tiny_config();
  TrainConfig tc;
  tc.policy_steps = 20;
  tc.batch_tasks = 2;
  tc.warmup = 1;
  tc.checkpoint_every = 20;
  tc.validation_tasks = 2;
  Rng rng(1);
  const auto init = init_model_params(cfg, rng);
  auto res = pretrain_policy(cfg, tc, [](Rng& r) { return toy_gp_task(12, r); }, init);
  auto moved = [&](const std::string& name) {
    double m = 0;
    const auto& a = res.last.get(name);
    const auto& b = init.get(name);
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
  };
  EXPECT_GT(moved("policy.w"), 0.0);
  EXPECT_GT(moved("embed.0.w"), 0.0);
  EXPECT_GT(moved("policy.w"), 5.0 * moved("predictor.w"));
}

TEST(Training, InformativeFeatureLowersNll) {
  auto cfg = tiny_config();
  cfg.model_dim = 32;
  cfg.hidden = 64;
  cfg.layers = 2;
  TrainConfig tc;
  tc.predictor_steps = 400;
  tc.batch_tasks = 4;
  tc.warmup = 50;
  tc.lr_predictor = 1e-3;
  tc.checkpoint_every = 100;
  tc.validation_tasks = 8;
  tc.seed = 5;
  auto res = pretrain_predictor(cfg, tc, [](Rng& r) { return toy_gp_task(32, r); });

  double with = 0, without = 0;
  for (std::size_t t = 0; t < 100; ++t) {
    Rng rng = derive_rng(99, {t});
    const auto ds = toy_gp_task(32, rng);
    std::vector<std::size_t> ctx(24), qry(8);
    for (std::size_t i = 0; i < 24; ++i) ctx[i] = i;
    for (std::size_t i = 0; i < 8; ++i) qry[i] = 24 + i;
    const auto c = subset_rows(ds, ctx);
    auto nll = [&](bool acquire) {
      auto s = AcquisitionState::from_rows(ds, qry);
      if (acquire)
        for (std::size_t k = 0; k < 8; ++k) s.acquire(k, 0);
      const auto out = forward_predictor(cfg, res.params, make_inference_input(c.x, c.r, c.y, s, 1));
      double total = 0;
      for (std::size_t k = 0; k < 8; ++k) {
        const double mu = out.at(k, 0), lv = out.at(k, 1), y = ds.y[qry[k]];
        total += 0.5 * (std::log(2 * M_PI) + lv + (y - mu) * (y - mu) * std::exp(-lv)) / 8.0;
      }
      return total;
    };
    with += nll(true) / 100.0;
    without += nll(false) / 100.0;
  }
  EXPECT_LT(with, without);
}

}  // namespace
}  // namespace afa
