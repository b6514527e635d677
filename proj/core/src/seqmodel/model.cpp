#include "afa/seqmodel/model.hpp"

#include <cmath>
#include <string>

#include "afa/diffkernel/ops.hpp"

namespace afa {
namespace {

void add_linear(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out, double sd, Rng& rng,
                const char* group) {
  Tensor w(Shape{in, out});
  for (auto& v : w.values()) v = normal(rng, 0.0, sd);
  ps.add(name + ".w", std::move(w), group);
  ps.add(name + ".b", Tensor(Shape{out}), group);
}

void add_norm(ParamStore& ps, const std::string& name, std::size_t dim) {
  ps.add(name + ".g", Tensor(Shape{dim}, 1.0), kBackboneGroup);
  ps.add(name + ".b", Tensor(Shape{dim}), kBackboneGroup);
}

Var linear(ParamBinding& p, const std::string& name, Var x) {
  return ops::add_bias(ops::matmul(x, p[name + ".w"]), p[name + ".b"]);
}

Var norm(ParamBinding& p, const std::string& name, Var x) { return ops::layer_norm(x, p[name + ".g"], p[name + ".b"]); }

Var attention(ParamBinding& p, const ModelConfig& cfg, const std::string& name, Var x, const Tensor& mask) {
  const std::size_t dh = cfg.model_dim / cfg.heads;
  Var q = linear(p, name + ".q", x);
  Var k = linear(p, name + ".k", x);
  Var v = linear(p, name + ".v", x);
  std::vector<Var> heads;
  heads.reserve(cfg.heads);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    Var qh = ops::slice_cols(q, h * dh, dh);
    Var kh = ops::slice_cols(k, h * dh, dh);
    Var vh = ops::slice_cols(v, h * dh, dh);
    Var scores = ops::scale(ops::matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    heads.push_back(ops::matmul(ops::masked_softmax(scores, mask), vh));
  }
  return linear(p, name + ".o", cfg.heads == 1 ? heads[0] : ops::concat_cols(heads));
}

}  // namespace

ParamStore init_model_params(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ParamStore ps;
  const std::size_t dm = cfg.model_dim;
  const double residual_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(cfg.layers));
  auto sd = [](std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };

  for (std::size_t i = 0; i < cfg.embedding_depth; ++i) {
    const std::size_t in = i == 0 ? cfg.token_width() : dm;
    add_linear(ps, "embed." + std::to_string(i), in, dm, sd(in), rng, kBackboneGroup);
  }
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string b = "block." + std::to_string(l);
    add_norm(ps, b + ".ln1", dm);
    for (const char* proj : {".attn.q", ".attn.k", ".attn.v"}) add_linear(ps, b + proj, dm, dm, sd(dm), rng, kBackboneGroup);
    add_linear(ps, b + ".attn.o", dm, dm, sd(dm) * residual_scale, rng, kBackboneGroup);
    add_norm(ps, b + ".ln2", dm);
    add_linear(ps, b + ".mlp.in", dm, cfg.hidden, sd(dm), rng, kBackboneGroup);
    add_linear(ps, b + ".mlp.out", cfg.hidden, dm, sd(cfg.hidden) * residual_scale, rng, kBackboneGroup);
  }
  add_norm(ps, "final_ln", dm);
  add_linear(ps, "predictor", dm, cfg.output_dim(), sd(dm), rng, kPredictorGroup);
  add_linear(ps, "policy", dm, cfg.d, sd(dm), rng, kPolicyGroup);
  return ps;
}

Var forward_backbone(ParamBinding& p, const ModelConfig& cfg, Var tokens, const Tensor& mask) {
  if (tokens.value().cols() != cfg.token_width())
    throw ShapeError("forward: token width " + std::to_string(tokens.value().cols()) + " != 2d+c = " +
                     std::to_string(cfg.token_width()));
  const std::size_t len = tokens.value().rows();
  if (mask.shape() != Shape{len, len}) throw ShapeError("forward: mask must be [L, L]");

  Var h = tokens;
  for (std::size_t i = 0; i < cfg.embedding_depth; ++i) {
    h = linear(p, "embed." + std::to_string(i), h);
    if (i + 1 < cfg.embedding_depth) h = ops::gelu(h);
  }
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string b = "block." + std::to_string(l);
    h = ops::add(h, attention(p, cfg, b + ".attn", norm(p, b + ".ln1", h), mask));
    Var m = ops::gelu(linear(p, b + ".mlp.in", norm(p, b + ".ln2", h)));
    h = ops::add(h, linear(p, b + ".mlp.out", m));
  }
  return norm(p, "final_ln", h);
}

Var predictor_head(ParamBinding& p, const ModelConfig&, Var reps) { return linear(p, "predictor", reps); }

Var policy_head(ParamBinding& p, const ModelConfig&, Var reps) { return linear(p, "policy", reps); }

SequenceInput make_inference_input(const Tensor& ctx_x, const Tensor& ctx_r, const Tensor& ctx_y,
                                   const AcquisitionState& state, std::size_t c) {
  const std::size_t m = ctx_x.rows(), q = state.queries();
  SequenceInput in;
  const Tensor ctx = m > 0 ? encode_labeled(ctx_x, ctx_r, ctx_y) : Tensor(Shape{0, 2 * state.d() + c});
  const Tensor qry = encode_queries(state, c);
  in.tokens = Tensor(Shape{m + q, 2 * state.d() + c});
  std::copy(ctx.values().begin(), ctx.values().end(), in.tokens.values().begin());
  std::copy(qry.values().begin(), qry.values().end(), in.tokens.values().begin() + static_cast<std::ptrdiff_t>(ctx.size()));
  in.mask = build_inference_mask(m, q);
  for (std::size_t k = 0; k < q; ++k) in.query_rows.push_back(m + k);
  return in;
}

Tensor forward_predictor(const ModelConfig& cfg, const ParamStore& params, const SequenceInput& in) {
  Graph g;
  ParamBinding p(g, params, std::vector<std::string>{});
  Var reps = forward_backbone(p, cfg, g.constant(in.tokens), in.mask);
  return predictor_head(p, cfg, ops::gather_rows(reps, in.query_rows)).value();
}

Tensor forward_policy(const ModelConfig& cfg, const ParamStore& params, const SequenceInput& in,
                      const Tensor& candidates) {
  Graph g;
  ParamBinding p(g, params, std::vector<std::string>{});
  Var reps = forward_backbone(p, cfg, g.constant(in.tokens), in.mask);
  Var logits = policy_head(p, cfg, ops::gather_rows(reps, in.query_rows));
  return ops::masked_softmax(logits, candidates).value();
}

}  // namespace afa
