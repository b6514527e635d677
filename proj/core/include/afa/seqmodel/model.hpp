#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "afa/diffkernel/params.hpp"
#include "afa/rng.hpp"
#include "afa/seqmodel/config.hpp"
#include "afa/seqmodel/encoding.hpp"

namespace afa {

// Parameter groups used by the optimizer.
inline constexpr const char* kBackboneGroup = "backbone";
inline constexpr const char* kPredictorGroup = "predictor_head";
inline constexpr const char* kPolicyGroup = "policy_head";

ParamStore init_model_params(const ModelConfig& cfg, Rng& rng);

// Embedding MLP, pre-norm masked-attention blocks and a final layer norm.
// No positional information enters, so outputs depend on token order only
// through the mask. tokens: [L, 2d+c], mask: [L, L]. Returns [L, model_dim].
Var forward_backbone(ParamBinding& p, const ModelConfig& cfg, Var tokens, const Tensor& mask);
// [n, output_dim]: (mean, log variance) or class logits.
Var predictor_head(ParamBinding& p, const ModelConfig& cfg, Var reps);
// [n, d] unnormalised action scores.
Var policy_head(ParamBinding& p, const ModelConfig& cfg, Var reps);

// A token sequence plus the rows whose outputs are read.
struct SequenceInput {
  Tensor tokens;
  Tensor mask;
  std::vector<std::size_t> query_rows;
};

// Context rows then one query per state row, inference mask.
SequenceInput make_inference_input(const Tensor& ctx_x, const Tensor& ctx_r, const Tensor& ctx_y,
                                   const AcquisitionState& state, std::size_t c);

// Gradient-free evaluation helpers.
Tensor forward_predictor(const ModelConfig& cfg, const ParamStore& params, const SequenceInput& in);
// Blocked categorical policy: rows over d features, exactly 0 where
// candidates == 0. Throws if a row has no candidate.
Tensor forward_policy(const ModelConfig& cfg, const ParamStore& params, const SequenceInput& in,
                      const Tensor& candidates);

}  // namespace afa
